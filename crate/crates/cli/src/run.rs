//! Scenario execution and report export.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use grpd_core::catalog::{counterexample_distribution, gaussian_bump, random_band_limited, smooth_coeffs};
use grpd_core::checks::{self, CheckReport};
use grpd_core::cone::{a_star_units, cone_product, cone_product_bar, point_cone, rotation_conormal, ConeSet};
use grpd_core::convolution::{convolve, convolve_gated};
use grpd_core::distribution::{make_layer, point_mass, unit_delta, Distribution};
use grpd_core::models::{GroupoidModel, ModelKind};
use grpd_core::spectral::C64;
use grpd_core::wavefront::{decay_slope, estimate_wavefront, verify_product_bound, WfParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::{ConeSpec, DistSpec, Operation, Scenario, Suite, SCHEMA_VERSION};
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySummary {
    pub name: String,
    pub pass: bool,
    pub product_max: f64,
    pub angular_tol: f64,
    pub base_tol: usize,
    pub estimated_cells: usize,
    pub predicted_cells: usize,
}

/// Everything a run produced, minus the artifact contents. Contains no
/// timings or paths outside the output directory, so reruns compare equal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub version: u32,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<GroupoidModel>,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
    pub verifications: Vec<VerifySummary>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn empty(scenario: &str, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            version: SCHEMA_VERSION,
            seed,
            model: None,
            pass: true,
            checks: vec![],
            verifications: vec![],
            artifacts: vec![],
        }
    }

    fn finish(&mut self) {
        self.pass = self.checks.iter().all(CheckReport::pass) && self.verifications.iter().all(|v| v.pass);
        self.artifacts.sort();
        self.artifacts.dedup();
    }

    /// 0 when every asserted property holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

/// Writes `report.json` into `dir`, overwriting.
pub fn export_report(report: &RunReport, dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    write_json(&path, report)?;
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(grpd_core::GrpdError::from)? + "\n";
    std::fs::write(path, text)?;
    Ok(())
}

struct Ctx<'a> {
    seed: u64,
    base: &'a Path,
    out: &'a Path,
    model: Option<GroupoidModel>,
    dists: BTreeMap<String, Distribution>,
    cones: BTreeMap<String, ConeSet>,
    report: RunReport,
}

impl Ctx<'_> {
    fn model(&self) -> Result<GroupoidModel, CliError> {
        self.model.ok_or_else(|| CliError::Invalid("this scenario needs a model".into()))
    }

    fn dist(&self, name: &str) -> Result<&Distribution, CliError> {
        self.dists.get(name).ok_or_else(|| CliError::Invalid(format!("no distribution named {name:?}")))
    }

    fn cone(&self, name: &str) -> Result<&ConeSet, CliError> {
        self.cones.get(name).ok_or_else(|| CliError::Invalid(format!("no cone set named {name:?}")))
    }

    fn fresh(&self, name: &str) -> Result<(), CliError> {
        if self.dists.contains_key(name) || self.cones.contains_key(name) {
            return Err(CliError::Invalid(format!("result name {name:?} is already taken")));
        }
        Ok(())
    }

    fn artifact(&mut self, name: impl Into<String>) {
        self.report.artifacts.push(name.into());
    }

    fn store_dist(&mut self, name: &str, u: Distribution) -> Result<(), CliError> {
        self.fresh(name)?;
        u.write(self.out, name)?;
        self.artifact(format!("{name}.json"));
        if u.smooth.is_some() {
            self.artifact(format!("{name}.grpd"));
        }
        self.dists.insert(name.into(), u);
        Ok(())
    }

    fn store_cone(&mut self, name: &str, w: ConeSet) -> Result<(), CliError> {
        self.fresh(name)?;
        self.write_cone(name, &w)?;
        self.cones.insert(name.into(), w);
        Ok(())
    }

    fn write_cone(&mut self, stem: &str, w: &ConeSet) -> Result<(), CliError> {
        write_json(&self.out.join(format!("{stem}.json")), w)?;
        self.artifact(format!("{stem}.json"));
        Ok(())
    }

    fn wf_params(&self, p: &Option<WfParams>, n: usize) -> Result<WfParams, CliError> {
        let p = p.clone().unwrap_or_else(|| WfParams::for_grid(n));
        p.validate(n)?;
        Ok(p)
    }
}

fn complex(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn build_dist(ctx: &Ctx, name: &str, stream: u64, spec: &DistSpec) -> Result<Distribution, CliError> {
    let m = ctx.model()?;
    let pair_len = if m.kind == ModelKind::PairCircle { m.n } else { 1 };
    let u = match spec {
        DistSpec::GaussianBump { center, width } => gaussian_bump(m, center, *width)?,
        DistSpec::RotationLayer { theta, order } => {
            make_layer(m, *theta, vec![C64::new(1.0, 0.0); pair_len], *order)?
        }
        DistSpec::Layer { theta, order, amplitude, phase, scale } => {
            let s = complex(*scale);
            let coeffs = if pair_len == 1 {
                vec![s]
            } else {
                smooth_coeffs(m.n, *amplitude, *phase).into_iter().map(|c| c * s).collect()
            };
            make_layer(m, *theta, coeffs, *order)?
        }
        DistSpec::PointMass { index, weight } => point_mass(m, index, complex(*weight))?,
        DistSpec::UnitDelta => unit_delta(m)?,
        DistSpec::BandLimited { band } => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            rng.set_stream(stream);
            random_band_limited(m, *band, &mut rng)?
        }
        DistSpec::Counterexample => {
            if m.kind != ModelKind::PairCircle {
                return Err(CliError::Invalid("the counterexample lives on PAIR_CIRCLE".into()));
            }
            counterexample_distribution(m.n)?
        }
        DistSpec::File { path } => {
            let u = Distribution::read(&ctx.base.join(path))?;
            u.model.require_same(&m)?;
            return Ok(u);
        }
    };
    Ok(u.with_label(name))
}

fn build_cone(ctx: &Ctx, spec: &ConeSpec) -> Result<ConeSet, CliError> {
    let m = ctx.model()?;
    Ok(match spec {
        ConeSpec::RotationConormal { theta } => rotation_conormal(m, *theta)?,
        ConeSpec::AStarUnits => a_star_units(m)?,
        ConeSpec::Point { index } => point_cone(m, index)?,
        ConeSpec::Empty => ConeSet::empty(m),
        ConeSpec::File { path } => {
            let text = std::fs::read_to_string(ctx.base.join(path))?;
            let w: ConeSet = serde_json::from_str(&text).map_err(grpd_core::GrpdError::from)?;
            w.model.require_same(&m)?;
            w
        }
    })
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    s.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

fn run_check(ctx: &mut Ctx, suite: Suite, n: Option<usize>, samples: Option<usize>) -> Result<(), CliError> {
    let seed = ctx.seed;
    let rep = match suite {
        Suite::GroupoidAxioms => checks::criterion_1(seed, samples.unwrap_or(1000))?,
        Suite::KernelIdentities => checks::criterion_2(seed, n.unwrap_or(64), samples.unwrap_or(200))?,
        Suite::ConvolutionAlgebra => checks::criterion_3(seed, n.unwrap_or(64))?,
        Suite::GOperators => checks::criterion_4(seed, n.unwrap_or(64))?,
        Suite::TransformationIso => checks::criterion_5(seed, samples.unwrap_or(100))?,
        Suite::Counterexample => {
            let n = n.unwrap_or(128);
            let (rep, wf) = checks::criterion_6(seed, n)?;
            wf.write(ctx.out, "counterexample_wf")?;
            ctx.artifact("counterexample_wf.json");
            ctx.artifact("counterexample_wf.csv");
            let u = counterexample_distribution(n)?;
            let mut csv = String::from("direction,angle,slope,singular\n");
            for (label, dir) in [("(1,0)", [1.0, 0.0]), ("(0,1)", [0.0, 1.0])] {
                let s = decay_slope(&u, &[0, 0], &dir, &wf.params)?;
                let angle = dir[1].atan2(dir[0]);
                csv += &format!("\"{label}\",{angle},{s},{}\n", s > wf.params.slope_threshold);
            }
            std::fs::write(ctx.out.join("counterexample_axes.csv"), csv)?;
            ctx.artifact("counterexample_axes.csv");
            rep
        }
        Suite::ProductBound => {
            let (rep, cases) = checks::criterion_7(seed, n.unwrap_or(128))?;
            for (name, r) in &cases {
                let stem = format!("bound_{}", slug(name));
                ctx.write_cone(&format!("{stem}_estimated"), &r.estimated)?;
                ctx.write_cone(&format!("{stem}_predicted"), &r.predicted)?;
                ctx.write_cone(&format!("{stem}_product"), &r.product)?;
            }
            rep
        }
        Suite::ConeHeredity => checks::criterion_8(seed, n.unwrap_or(64), samples.unwrap_or(500))?,
        Suite::Serialization => {
            let dir = ctx.out.join("roundtrip");
            let rep = checks::serialization_roundtrips(seed, &dir)?;
            let mut names: Vec<String> = std::fs::read_dir(&dir)?
                .map(|e| e.map(|e| format!("roundtrip/{}", e.file_name().to_string_lossy())))
                .collect::<Result<_, _>>()?;
            names.sort();
            for name in names {
                ctx.artifact(name);
            }
            rep
        }
    };
    ctx.report.checks.push(rep);
    Ok(())
}

fn run_op(ctx: &mut Ctx, op: &Operation) -> Result<(), CliError> {
    match op {
        Operation::Convolve { lhs, rhs, out } => {
            let w = convolve(ctx.dist(lhs)?, ctx.dist(rhs)?)?.with_label(out.as_str());
            ctx.store_dist(out, w)
        }
        Operation::ConvolveGated { lhs, rhs, lhs_cone, rhs_cone, out } => {
            let (w, bound) = convolve_gated(ctx.dist(lhs)?, ctx.dist(rhs)?, ctx.cone(lhs_cone)?, ctx.cone(rhs_cone)?)?;
            ctx.store_dist(out, w.with_label(out.as_str()))?;
            ctx.store_cone(&format!("{out}_bound"), bound)
        }
        Operation::WfEstimate { input, out, params } => {
            let u = ctx.dist(input)?;
            let p = ctx.wf_params(params, u.n())?;
            let wf = estimate_wavefront(u, &p)?;
            ctx.fresh(out)?;
            wf.write(ctx.out, out)?;
            ctx.artifact(format!("{out}.json"));
            ctx.artifact(format!("{out}.csv"));
            ctx.cones.insert(out.clone(), wf.estimated);
            Ok(())
        }
        Operation::ConeProduct { lhs, rhs, out, barred } => {
            let (a, b) = (ctx.cone(lhs)?, ctx.cone(rhs)?);
            let w = if *barred { cone_product_bar(a, b)? } else { cone_product(a, b)? };
            ctx.store_cone(out, w)
        }
        Operation::Verify { lhs, rhs, lhs_cone, rhs_cone, out, params } => {
            let (u1, u2) = (ctx.dist(lhs)?, ctx.dist(rhs)?);
            let p = ctx.wf_params(params, u1.n())?;
            let r = verify_product_bound(u1, u2, ctx.cone(lhs_cone)?, ctx.cone(rhs_cone)?, &p)?;
            ctx.fresh(out)?;
            ctx.write_cone(&format!("{out}_estimated"), &r.estimated)?;
            ctx.write_cone(&format!("{out}_predicted"), &r.predicted)?;
            ctx.write_cone(&format!("{out}_product"), &r.product)?;
            ctx.report.verifications.push(VerifySummary {
                name: out.clone(),
                pass: r.pass,
                product_max: r.product_max,
                angular_tol: r.angular_tol,
                base_tol: r.base_tol,
                estimated_cells: r.estimated.cells.len(),
                predicted_cells: r.predicted.cells.len(),
            });
            Ok(())
        }
        Operation::Check { suite, n, samples } => run_check(ctx, *suite, *n, *samples),
    }
}

/// Runs `s`, writing artifacts and `report.json` into `out`. File inputs are
/// resolved against `base`. Property failures are reported, not raised.
pub fn run_scenario(s: &Scenario, base: &Path, out: &Path) -> Result<RunReport, CliError> {
    std::fs::create_dir_all(out)?;
    let mut report = RunReport::empty(&s.name, s.seed);
    report.model = s.model;
    let mut ctx =
        Ctx { seed: s.seed, base, out, model: s.model, dists: BTreeMap::new(), cones: BTreeMap::new(), report };
    for (i, (name, spec)) in s.distributions.iter().enumerate() {
        let u = build_dist(&ctx, name, 1000 + i as u64, spec)?;
        ctx.fresh(name)?;
        ctx.dists.insert(name.clone(), u);
    }
    for (name, spec) in &s.cones {
        let w = build_cone(&ctx, spec)?;
        ctx.fresh(name)?;
        ctx.cones.insert(name.clone(), w);
    }
    for op in &s.operations {
        run_op(&mut ctx, op)?;
    }
    let mut report = ctx.report;
    report.finish();
    export_report(&report, out)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("layer*layer"), "layer_layer");
        assert_eq!(slug("disjoint point masses"), "disjoint_point_masses");
    }

    #[test]
    fn empty_report_is_valid_json() {
        let dir = std::env::temp_dir().join(format!("grpd-empty-{}", std::process::id()));
        let path = export_report(&RunReport::empty("nothing", 0), &dir).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["pass"], true);
        assert_eq!(v["artifacts"].as_array().unwrap().len(), 0);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
