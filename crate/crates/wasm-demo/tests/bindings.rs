use grpd_core::cone::ConeSet;
use grpd_wasm_demo::{convolve_grid, parse, product_bound_json, wavefront_json};
use serde_json::Value;

#[test]
fn specs_parse() {
    for s in ["layer:8", "layer:8:1", "bump:0.5:0.5:0.1", "delta", "point:3:4", "noise:3", "counterexample"] {
        parse(s, 64).unwrap();
    }
    for s in ["layer", "layer:x", "bump:0.5", "warp:1", "point:99:0"] {
        assert!(parse(s, 64).is_err(), "{s}");
    }
}

#[test]
fn delta_times_layer_draws_the_layer() {
    let g = convolve_grid("delta", "layer:5", 32).unwrap();
    for x in 0..32 {
        for y in 0..32 {
            let want = if y == (x + 27) % 32 { 32.0 } else { 0.0 };
            assert!((g[x * 32 + y] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn point_mass_estimate_is_a_cone_set() {
    let text = wavefront_json("point:16:16", 64).unwrap();
    let w: ConeSet = serde_json::from_str(&text).unwrap();
    assert!(w.contains_point(&[16, 16], &[1.0, 0.0]));
}

#[test]
fn layer_product_bound_passes() {
    let v: Value = serde_json::from_str(&product_bound_json("layer:8", "layer:20:1", 64).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(!v["estimated"]["cells"].as_array().unwrap().is_empty());
}
