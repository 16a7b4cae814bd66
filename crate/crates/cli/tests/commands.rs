use std::path::{Path, PathBuf};
use std::process::Command;

use grpd_core::cone::ConeSet;
use grpd_core::distribution::Distribution;
use grpd_core::grid::Grid;
use grpd_core::wavefront::WfReport;
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let d = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("commands").join(name);
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn grpd(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_grpd")).args(args).current_dir(cwd).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const LAYER_BUMP: &str = r#"{"lhs": {"catalog": "rotation_layer", "theta": 3},
  "rhs": {"catalog": "gaussian_bump", "center": [0.5, 0.5], "width": 0.1}}"#;

#[test]
fn list_demos_names_all_nine() {
    let (code, out, _) = grpd(&["list-demos"], &scratch("list"));
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 9);
    assert!(out.contains("remark-counterexample") && out.contains("criterion 6"));
}

#[test]
fn convolve_writes_a_loadable_distribution() {
    let d = scratch("convolve");
    let (code, _, err) = grpd(&["convolve", "--n", "32", "--out", "o", "--params", LAYER_BUMP], &d);
    assert_eq!(code, 0, "{err}");
    let u = Distribution::read(&d.join("o/product.json")).unwrap();
    assert_eq!(u.n(), 32);
    let g = Grid::read(&d.join("o/product.grpd")).unwrap();
    assert_eq!(g.dims, vec![32, 32]);
    assert_eq!(report(&d.join("o"))["artifacts"], serde_json::json!(["product.grpd", "product.json"]));
}

#[test]
fn gated_convolution_stores_the_bound() {
    let d = scratch("gated");
    let params = r#"{"lhs": {"catalog": "rotation_layer", "theta": 3}, "rhs": {"catalog": "rotation_layer", "theta": 5},
        "lhs_cone": {"catalog": "rotation_conormal", "theta": 3}, "rhs_cone": {"catalog": "rotation_conormal", "theta": 5}}"#;
    let (code, _, err) = grpd(&["convolve", "--n", "32", "--out", "o", "--params", params], &d);
    assert_eq!(code, 0, "{err}");
    let w: ConeSet = serde_json::from_str(&std::fs::read_to_string(d.join("o/product_bound.json")).unwrap()).unwrap();
    assert!(!w.is_empty());
}

#[test]
fn wf_estimate_round_trips_its_report() {
    let d = scratch("wf");
    let params = r#"{"input": {"catalog": "point_mass", "index": [16, 24]}}"#;
    let (code, _, err) = grpd(&["wf-estimate", "--n", "64", "--out", "o", "--params", params], &d);
    assert_eq!(code, 0, "{err}");
    let r = WfReport::read(&d.join("o/wavefront.json")).unwrap();
    assert!(r.estimated.contains_point(&[16, 24], &[0.3, -1.0]));
    let again = scratch("wf-again");
    r.write(&again, "wavefront").unwrap();
    for f in ["wavefront.json", "wavefront.csv"] {
        assert_eq!(std::fs::read(d.join("o").join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn cone_product_accepts_a_params_file() {
    let d = scratch("cone");
    std::fs::write(
        d.join("p.json"),
        r#"{"lhs": {"catalog": "rotation_conormal", "theta": 3}, "rhs": {"catalog": "a_star_units"}}"#,
    )
    .unwrap();
    let (code, _, err) = grpd(&["cone-product", "--n", "32", "--out", "o", "--params", "p.json"], &d);
    assert_eq!(code, 0, "{err}");
    let w: ConeSet = serde_json::from_str(&std::fs::read_to_string(d.join("o/product.json")).unwrap()).unwrap();
    assert_eq!(w.model.n, 32);
}

#[test]
fn verify_exit_codes() {
    let d = scratch("verify");
    let good = r#"{"lhs": {"catalog": "rotation_layer", "theta": 3}, "rhs": {"catalog": "rotation_layer", "theta": 9},
        "lhs_cone": {"catalog": "rotation_conormal", "theta": 3}, "rhs_cone": {"catalog": "rotation_conormal", "theta": 9}}"#;
    let (code, out, err) = grpd(&["verify", "--n", "64", "--out", "good", "--params", good], &d);
    assert_eq!(code, 0, "{out}{err}");
    for f in ["bound_estimated.json", "bound_predicted.json", "bound_product.json"] {
        assert!(d.join("good").join(f).exists(), "{f}");
    }
    // Claiming both layers smooth makes the bound empty, so the estimate cannot fit.
    let wrong = good.replace(r#""catalog": "rotation_conormal", "theta": 3"#, r#""catalog": "empty""#).replace(
        r#""catalog": "rotation_conormal", "theta": 9"#,
        r#""catalog": "empty""#,
    );
    let (code, _, _) = grpd(&["verify", "--n", "64", "--out", "wrong", "--params", &wrong], &d);
    assert_eq!(code, 2);
    assert_eq!(report(&d.join("wrong"))["pass"], false);
}

#[test]
fn usage_errors_exit_one() {
    let d = scratch("usage");
    for args in [
        vec!["frobnicate"],
        vec!["demo", "no-such-demo"],
        vec!["convolve"],
        vec!["convolve", "--params", r#"{"lhs": {"catalog": "unit_delta"}}"#],
        vec!["convolve", "--params", r#"{"lhs": {"catalog": "unit_delta"}, "rhs": {"catalog": "unit_delta"}, "x": 1}"#],
        vec!["convolve", "--n", "48", "--params", LAYER_BUMP],
        vec!["run", "missing.json"],
        vec!["wf-estimate", "--n", "32", "--params", r#"{"input": {"catalog": "unit_delta"}}"#],
    ] {
        let (code, _, _) = grpd(&args, &d);
        assert_eq!(code, 1, "{args:?}");
    }
    let (code, _, _) = grpd(&["--help"], &d);
    assert_eq!(code, 0);
}

#[test]
fn gate_failure_is_a_usage_error() {
    let d = scratch("gate");
    let params = r#"{"lhs": {"catalog": "point_mass", "index": [0, 0]}, "rhs": {"catalog": "point_mass", "index": [0, 0]},
        "lhs_cone": {"catalog": "point", "index": [0, 0]}, "rhs_cone": {"catalog": "point", "index": [0, 0]}}"#;
    let (code, _, err) = grpd(&["verify", "--n", "64", "--out", "o", "--params", params], &d);
    assert_eq!(code, 1);
    assert!(err.contains("cone condition"), "{err}");
}

#[test]
fn scenario_files_resolve_inputs_next_to_themselves() {
    let d = scratch("run");
    let (code, _, err) = grpd(&["convolve", "--n", "64", "--out", "inputs", "--params", LAYER_BUMP], &d);
    assert_eq!(code, 0, "{err}");
    let scenario = r#"{
        "version": 1, "name": "chain", "seed": 7,
        "model": {"kind": "PAIR_CIRCLE", "n": 64},
        "distributions": {
            "w": {"catalog": "file", "path": "inputs/product.json"},
            "noise": {"catalog": "band_limited", "band": 2},
            "delta": {"catalog": "unit_delta"}
        },
        "cones": {"units": {"catalog": "a_star_units"}, "empty": {"catalog": "empty"}},
        "operations": [
            {"op": "convolve", "lhs": "delta", "rhs": "w", "out": "dw"},
            {"op": "convolve", "lhs": "dw", "rhs": "noise", "out": "smooth"},
            {"op": "wf_estimate", "input": "smooth", "out": "smooth_wf"},
            {"op": "cone_product", "lhs": "units", "rhs": "smooth_wf", "out": "prod", "barred": true},
            {"op": "verify", "lhs": "delta", "rhs": "noise", "lhs_cone": "units", "rhs_cone": "empty", "out": "dn"}
        ]
    }"#;
    std::fs::write(d.join("chain.json"), scenario).unwrap();
    let (code, out, err) = grpd(&["run", "chain.json", "--out", "o1"], &d);
    assert_eq!(code, 0, "{out}{err}");
    let (code, _, _) = grpd(&["run", "chain.json", "--out", "o2"], &d);
    assert_eq!(code, 0);
    let r = report(&d.join("o1"));
    assert_eq!(r["seed"], 7);
    for f in r["artifacts"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        assert_eq!(std::fs::read(d.join("o1").join(f)).unwrap(), std::fs::read(d.join("o2").join(f)).unwrap(), "{f}");
    }
    // A different seed changes the sampled field.
    let (code, _, _) = grpd(&["run", "chain.json", "--out", "o3", "--seed", "8"], &d);
    assert_eq!(code, 0);
    assert_ne!(std::fs::read(d.join("o1/smooth.grpd")).unwrap(), std::fs::read(d.join("o3/smooth.grpd")).unwrap());
}

#[test]
fn duplicate_result_names_are_rejected() {
    let d = scratch("dup");
    let scenario = r#"{"version": 1, "name": "dup", "model": {"kind": "PAIR_CIRCLE", "n": 16},
        "distributions": {"a": {"catalog": "unit_delta"}},
        "operations": [{"op": "convolve", "lhs": "a", "rhs": "a", "out": "a"}]}"#;
    std::fs::write(d.join("dup.json"), scenario).unwrap();
    let (code, _, err) = grpd(&["run", "dup.json", "--out", "o"], &d);
    assert_eq!(code, 1);
    assert!(err.contains("already taken"), "{err}");
}

#[test]
fn threads_variable_is_validated() {
    let d = scratch("threads");
    let out = Command::new(env!("CARGO_BIN_EXE_grpd"))
        .args(["cone-product", "--n", "16", "--out", "o", "--params"])
        .arg(r#"{"lhs": {"catalog": "empty"}, "rhs": {"catalog": "empty"}}"#)
        .env("GRPD_THREADS", "many")
        .current_dir(&d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_grpd"))
        .args(["cone-product", "--n", "16", "--out", "o", "--params"])
        .arg(r#"{"lhs": {"catalog": "empty"}, "rhs": {"catalog": "empty"}}"#)
        .env("GRPD_THREADS", "1")
        .current_dir(&d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
