use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use grpd_cli::{configure_threads, demo, run_scenario, CliError, Scenario, DEMOS};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "grpd", version, about = "Distributions, cones and wave-front checks on groupoid models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_enum, default_value_t = ModelArg::PairCircle)]
    model: ModelArg,
    /// Grid resolution (power of two).
    #[arg(long, global = true, default_value_t = 128)]
    n: usize,
    /// Resolution of the Z factor of PAIR_TIMES_Z.
    #[arg(long, global = true, default_value_t = 8)]
    m_z: usize,
    /// Inline JSON object, or a path to a JSON file.
    #[arg(long, global = true)]
    params: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// u * v. Params: {"lhs": dist, "rhs": dist[, "lhs_cone": cone, "rhs_cone": cone]}.
    Convolve,
    /// Wave-front estimate. Params: {"input": dist[, "wf": estimator params]}.
    WfEstimate,
    /// W1 * W2. Params: {"lhs": cone, "rhs": cone[, "barred": bool]}.
    ConeProduct,
    /// Product bound check. Params: {"lhs", "rhs", "lhs_cone", "rhs_cone"[, "wf"]}.
    Verify,
    /// Run a built-in scenario.
    Demo { name: String },
    ListDemos,
    /// Run a scenario file.
    Run { scenario: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    PairCircle,
    CircleGroup,
    PairTimesZ,
    Affine,
}

impl Cli {
    fn model(&self) -> Value {
        match self.model {
            ModelArg::PairCircle => json!({"kind": "PAIR_CIRCLE", "n": self.n}),
            ModelArg::CircleGroup => json!({"kind": "CIRCLE_GROUP", "n": self.n}),
            ModelArg::PairTimesZ => json!({"kind": "PAIR_TIMES_Z", "n": self.n, "m_z": self.m_z}),
            ModelArg::Affine => json!({"kind": "AFFINE_GROUP"}),
        }
    }

    fn params(&self) -> Result<Map<String, Value>, CliError> {
        let Some(p) = &self.params else {
            return Err(CliError::Invalid("this command needs --params".into()));
        };
        let text = if p.trim_start().starts_with('{') {
            p.clone()
        } else {
            std::fs::read_to_string(p).map_err(|e| CliError::Invalid(format!("{p}: {e}")))?
        };
        match serde_json::from_str(&text) {
            Ok(Value::Object(m)) => Ok(m),
            Ok(_) => Err(CliError::Invalid("--params must be a JSON object".into())),
            Err(e) => Err(CliError::Invalid(format!("--params: {e}"))),
        }
    }
}

fn take(p: &mut Map<String, Value>, key: &str) -> Result<Value, CliError> {
    p.remove(key).ok_or_else(|| CliError::Invalid(format!("--params needs {key:?}")))
}

fn no_leftovers(p: &Map<String, Value>) -> Result<(), CliError> {
    match p.keys().next() {
        Some(k) => Err(CliError::Invalid(format!("unknown --params key {k:?}"))),
        None => Ok(()),
    }
}

/// A one-operation scenario for the single-verb commands.
fn single(cli: &Cli, name: &str) -> Result<Scenario, CliError> {
    let mut p = cli.params()?;
    let mut dists = Map::new();
    let mut cones = Map::new();
    let op = match name {
        "convolve" => {
            dists.insert("lhs".into(), take(&mut p, "lhs")?);
            dists.insert("rhs".into(), take(&mut p, "rhs")?);
            match (p.remove("lhs_cone"), p.remove("rhs_cone")) {
                (Some(a), Some(b)) => {
                    cones.insert("lhs_cone".into(), a);
                    cones.insert("rhs_cone".into(), b);
                    json!({"op": "convolve_gated", "lhs": "lhs", "rhs": "rhs",
                           "lhs_cone": "lhs_cone", "rhs_cone": "rhs_cone", "out": "product"})
                }
                (None, None) => json!({"op": "convolve", "lhs": "lhs", "rhs": "rhs", "out": "product"}),
                _ => return Err(CliError::Invalid("give both lhs_cone and rhs_cone, or neither".into())),
            }
        }
        "wf-estimate" => {
            dists.insert("input".into(), take(&mut p, "input")?);
            let mut op = json!({"op": "wf_estimate", "input": "input", "out": "wavefront"});
            if let Some(wf) = p.remove("wf") {
                op["params"] = wf;
            }
            op
        }
        "cone-product" => {
            cones.insert("lhs".into(), take(&mut p, "lhs")?);
            cones.insert("rhs".into(), take(&mut p, "rhs")?);
            let barred = p.remove("barred").unwrap_or(Value::Bool(false));
            json!({"op": "cone_product", "lhs": "lhs", "rhs": "rhs", "out": "product", "barred": barred})
        }
        "verify" => {
            dists.insert("lhs".into(), take(&mut p, "lhs")?);
            dists.insert("rhs".into(), take(&mut p, "rhs")?);
            cones.insert("lhs_cone".into(), take(&mut p, "lhs_cone")?);
            cones.insert("rhs_cone".into(), take(&mut p, "rhs_cone")?);
            let mut op = json!({"op": "verify", "lhs": "lhs", "rhs": "rhs",
                                "lhs_cone": "lhs_cone", "rhs_cone": "rhs_cone", "out": "bound"});
            if let Some(wf) = p.remove("wf") {
                op["params"] = wf;
            }
            op
        }
        _ => unreachable!(),
    };
    no_leftovers(&p)?;
    Scenario::from_value(json!({
        "version": 1,
        "name": name,
        "model": cli.model(),
        "seed": cli.seed.unwrap_or(0),
        "distributions": dists,
        "cones": cones,
        "operations": [op],
    }))
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let (mut scenario, base) = match &cli.command {
        Command::ListDemos => {
            for (name, text) in DEMOS {
                let s = Scenario::from_json(text)?;
                let suites: Vec<String> = s
                    .operations
                    .iter()
                    .filter_map(|op| match op {
                        grpd_cli::Operation::Check { suite, .. } => Some(format!("criterion {}", suite.criterion())),
                        _ => None,
                    })
                    .collect();
                println!("{name:<24} {}", suites.join(", "));
            }
            return Ok(0);
        }
        Command::Demo { name } => (demo(name)?, PathBuf::from(".")),
        Command::Run { scenario } => {
            let base = scenario.parent().map(Path::to_path_buf).unwrap_or_default();
            (Scenario::load(scenario)?, base)
        }
        Command::Convolve => (single(cli, "convolve")?, PathBuf::from(".")),
        Command::WfEstimate => (single(cli, "wf-estimate")?, PathBuf::from(".")),
        Command::ConeProduct => (single(cli, "cone-product")?, PathBuf::from(".")),
        Command::Verify => (single(cli, "verify")?, PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| scenario.out.clone())
        .unwrap_or_else(|| PathBuf::from("grpd-out").join(&scenario.name));
    configure_threads()?;
    let report = run_scenario(&scenario, &base, &out)?;
    for c in &report.checks {
        println!("{}", c.summary());
    }
    for v in &report.verifications {
        println!("verify {}: {}", v.name, if v.pass { "PASS" } else { "FAIL" });
    }
    println!("{} artifacts written to {}", report.artifacts.len() + 1, out.display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("grpd: {e}");
            ExitCode::from(1)
        }
    }
}
