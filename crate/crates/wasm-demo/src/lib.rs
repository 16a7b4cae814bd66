//! Browser bindings. Distributions are named by short specs:
//! `layer:θ:k`, `bump:x:y:w`, `delta`, `point:i:j`, `noise:band`, `counterexample`.

use grpd_core::catalog::{counterexample_distribution, gaussian_bump, random_band_limited, rotation_layer};
use grpd_core::cone::{a_star_units, point_cone, rotation_conormal, ConeSet};
use grpd_core::convolution::convolve;
use grpd_core::distribution::{point_mass, unit_delta, Distribution};
use grpd_core::models::GroupoidModel;
use grpd_core::spectral::C64;
use grpd_core::wavefront::{estimate_wavefront, rasterize, verify_product_bound, WfParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn num<T: std::str::FromStr>(parts: &[&str], i: usize, spec: &str) -> Result<T, String> {
    parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| format!("bad spec {spec:?}"))
}

/// Parses a spec into a distribution on PAIR_CIRCLE(n) and the cone set it is known to carry.
pub fn parse(spec: &str, n: usize) -> Result<(Distribution, ConeSet), String> {
    let m = GroupoidModel::pair_circle(n).map_err(|e| e.to_string())?;
    let p: Vec<&str> = spec.trim().split(':').collect();
    let built = match p[0] {
        "layer" => {
            let theta: usize = num(&p, 1, spec)?;
            rotation_layer(m, theta, num(&p, 2, spec).unwrap_or(0)).and_then(|u| Ok((u, rotation_conormal(m, theta)?)))
        }
        "bump" => gaussian_bump(m, &[num(&p, 1, spec)?, num(&p, 2, spec)?], num(&p, 3, spec)?)
            .map(|u| (u, ConeSet::empty(m))),
        "delta" => unit_delta(m).and_then(|u| Ok((u, a_star_units(m)?))),
        "point" => {
            let idx = [num(&p, 1, spec)?, num(&p, 2, spec)?];
            point_mass(m, &idx, C64::new(1.0, 0.0)).and_then(|u| Ok((u, point_cone(m, &idx)?)))
        }
        "noise" => random_band_limited(m, num(&p, 1, spec)?, &mut ChaCha8Rng::seed_from_u64(0))
            .map(|u| (u, ConeSet::empty(m))),
        // Its wave front set is only estimated, so no cone is claimed.
        "counterexample" => counterexample_distribution(n).map(|u| (u, ConeSet::empty(m))),
        _ => return Err(format!("unknown spec {spec:?}")),
    };
    built.map_err(|e| e.to_string())
}

/// `|u * v|` drawn on the grid, row-major, layers at order zero.
pub fn convolve_grid(lhs: &str, rhs: &str, n: usize) -> Result<Vec<f64>, String> {
    let (u, _) = parse(lhs, n)?;
    let (v, _) = parse(rhs, n)?;
    let w = convolve(&u, &v).map_err(|e| e.to_string())?;
    Ok(rasterize(&w).iter().map(|c| c.norm()).collect())
}

/// Estimated wave front set of one spec, as cone-set JSON.
pub fn wavefront_json(spec: &str, n: usize) -> Result<String, String> {
    let (u, _) = parse(spec, n)?;
    let r = estimate_wavefront(&u, &WfParams::for_grid(n)).map_err(|e| e.to_string())?;
    serde_json::to_string(&r.estimated).map_err(|e| e.to_string())
}

/// `{"pass", "product_max", "estimated", "predicted"}` for the product bound of two specs.
pub fn product_bound_json(lhs: &str, rhs: &str, n: usize) -> Result<String, String> {
    let (u1, w1) = parse(lhs, n)?;
    let (u2, w2) = parse(rhs, n)?;
    let r = verify_product_bound(&u1, &u2, &w1, &w2, &WfParams::for_grid(n)).map_err(|e| e.to_string())?;
    let out = serde_json::json!({
        "pass": r.pass,
        "product_max": r.product_max,
        "estimated": r.estimated,
        "predicted": r.predicted,
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn convolve_magnitude(lhs: &str, rhs: &str, n: usize) -> Result<Vec<f64>, JsValue> {
    convolve_grid(lhs, rhs, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn estimate(spec: &str, n: usize) -> Result<String, JsValue> {
    wavefront_json(spec, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn product_bound(lhs: &str, rhs: &str, n: usize) -> Result<String, JsValue> {
    product_bound_json(lhs, rhs, n).map_err(|e| JsValue::from_str(&e))
}
