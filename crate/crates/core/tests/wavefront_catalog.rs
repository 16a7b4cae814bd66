use std::f64::consts::PI;

use grpd_core::catalog::{
    counterexample_distribution, dft2, gaussian_bump, random_band_limited, rotation_layer, smooth_coeffs,
};
use grpd_core::cone::{a_star_units, point_cone, rotation_conormal, ConeSet, Directions};
use grpd_core::distribution::{make_layer, point_mass, unit_delta, Distribution};
use grpd_core::models::GroupoidModel;
use grpd_core::spectral::{freq, C64};
use grpd_core::wavefront::*;
use grpd_core::GrpdError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 128;

fn pair() -> GroupoidModel {
    GroupoidModel::pair_circle(N).unwrap()
}

fn params() -> WfParams {
    WfParams::for_grid(N)
}

/// Slope of the unwindowed DFT shell maxima over radii 1..n/4.
fn dense_dft_slope(u: &Distribution) -> f64 {
    let spec: Vec<f64> = dft2(N, u.materialize()).iter().map(|c| c.norm()).collect();
    let top = spec.iter().cloned().fold(0.0, f64::max);
    let mut edges = vec![1.0f64];
    while edges.last().unwrap() * 2f64.sqrt() <= (N / 4) as f64 + 1e-9 {
        edges.push(edges.last().unwrap() * 2f64.sqrt());
    }
    let (mut xs, mut ys) = (vec![], vec![]);
    for w in edges.windows(2) {
        let mut m = 1e-13 * top;
        for (i, v) in spec.iter().enumerate() {
            let (k, l) = (freq(i / N, N) as f64, freq(i % N, N) as f64);
            let r = (k * k + l * l).sqrt();
            if r >= w[0] && r < w[1] {
                m = m.max(*v);
            }
        }
        xs.push((w[0] * w[1]).sqrt().ln());
        ys.push(m.ln());
    }
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Every `(point, angle)` lies in a reported cell whose base is within `base_tol`.
fn covers(est: &ConeSet, truth: &[(Vec<usize>, f64)], base_tol: usize) -> bool {
    truth.iter().all(|(pt, ang)| {
        est.cells.iter().any(|c| {
            c.base.iter().zip(pt).all(|(iv, &k)| iv.dilate(base_tol).contains(k)) && c.dirs.contains_angle(*ang)
        })
    })
}

fn conormal_truth(theta: usize) -> Vec<(Vec<usize>, f64)> {
    (0..N)
        .flat_map(|x| {
            let y = (x + N - theta % N) % N;
            [(vec![x, y], 0.75 * PI), (vec![x, y], 1.75 * PI)]
        })
        .collect()
}

#[test]
fn smooth_fields_report_nothing() {
    let p = params();
    let bump = gaussian_bump(pair(), &[0.5, 0.5], 0.08).unwrap();
    assert!(dense_dft_slope(&bump) < -6.0);
    assert!(estimate_wavefront(&bump, &p).unwrap().estimated.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..20 {
        let band = rng.gen_range(1..=8);
        let u = random_band_limited(pair(), band, &mut rng).unwrap();
        let oracle = dense_dft_slope(&u);
        assert!(oracle < -6.0, "field {i}: dense slope {oracle}");
        let e = estimate_wavefront(&u, &p).unwrap();
        assert!(e.estimated.is_empty(), "field {i} (band {band}) reported {} cells", e.estimated.cells.len());
    }
}

#[test]
fn point_mass_is_singular_in_every_direction() {
    let p = params();
    let u = point_mass(pair(), &[0, 0], C64::new(1.0, 0.0)).unwrap();
    let e = estimate_wavefront(&u, &p).unwrap();
    let truth: Vec<_> = (0..p.n_directions).map(|d| (vec![0, 0], p.direction_angle(d))).collect();
    assert!(covers(&e.estimated, &truth, 0));
    assert!(cone_contains(&e.estimated, &point_cone(pair(), &[0, 0]).unwrap(), 0.0, 2 * p.probe_stride).unwrap());
    for dir in [[1.0, 0.0], [0.0, 1.0], [1.0, -1.0], [-0.3, 0.8]] {
        let s = decay_slope(&u, &[0, 0], &dir, &p).unwrap();
        assert!(s.abs() < 0.3, "{dir:?}: {s}");
    }
}

#[test]
fn rotation_layers_sit_in_their_conormals() {
    let p = params();
    let tol = 2 * p.probe_stride;
    for (theta, order) in [(0, 0), (7, 0), (16, 1), (40, 2), (93, 1), (121, 0)] {
        let u = rotation_layer(pair(), theta, order).unwrap();
        let e = estimate_wavefront(&u, &p).unwrap().estimated;
        let c = rotation_conormal(pair(), theta).unwrap();
        assert!(cone_contains(&e, &c, PI / 18.0, tol).unwrap(), "θ={theta} k={order}");
        assert!(covers(&e, &conormal_truth(theta), tol), "θ={theta} k={order} not covered");
    }
    let wavy = make_layer(pair(), 20, smooth_coeffs(N, 0.5, 0.1), 0).unwrap();
    let e = estimate_wavefront(&wavy, &p).unwrap().estimated;
    assert!(cone_contains(&e, &rotation_conormal(pair(), 20).unwrap(), PI / 18.0, tol).unwrap());
}

#[test]
fn unit_delta_covers_the_unit_conormal() {
    let p = params();
    let e = estimate_wavefront(&unit_delta(pair()).unwrap(), &p).unwrap().estimated;
    let units = a_star_units(pair()).unwrap();
    assert!(cone_contains(&e, &units, PI / 18.0, 2 * p.probe_stride).unwrap());
    assert!(covers(&e, &conormal_truth(0), 2 * p.probe_stride));
}

#[test]
fn counterexample_is_singular_along_the_fiber_axis() {
    let p = params();
    let u = counterexample_distribution(N).unwrap();
    let e = estimate_wavefront(&u, &p).unwrap().estimated;
    let near_axis = e.cells.iter().any(|c| {
        c.base.iter().all(|iv| iv.dilate(2 * p.probe_stride).contains(0))
            && c.dirs.arcs().iter().any(|a| {
                [0.0, PI].iter().any(|&t| a.dilate(PI / 18.0).contains(t))
            })
    });
    assert!(near_axis);
    assert!(decay_slope(&u, &[0, 0], &[1.0, 0.0], &p).unwrap() > -2.5);
    assert!(decay_slope(&u, &[0, 0], &[-1.0, 0.0], &p).unwrap() > -2.5);
    assert!(decay_slope(&u, &[0, 0], &[0.0, 1.0], &p).unwrap() < -4.0);
    // away from the origin the field is smooth
    assert!(e.cells.iter().all(|c| c.base.iter().all(|iv| iv.dilate(2 * p.probe_stride).contains(0))));
}

#[test]
fn slope_table_matches_the_estimate() {
    let p = params();
    let u = rotation_layer(pair(), 30, 0).unwrap();
    let r = estimate_wavefront(&u, &p).unwrap();
    for cell in &r.estimated.cells {
        let at: Vec<usize> = cell.base.iter().map(|iv| iv.start).collect();
        let rows: Vec<&SlopeEntry> = r.slopes.iter().filter(|s| s.center == at).collect();
        assert_eq!(rows.len(), p.n_directions);
        for (d, row) in rows.iter().enumerate() {
            let prev = rows[(d + p.n_directions - 1) % p.n_directions].slope;
            let next = rows[(d + 1) % p.n_directions].slope;
            let quiet = row.slope <= p.slope_threshold
                && prev <= p.slope_threshold
                && next <= p.slope_threshold;
            // reported arcs are one step around directions whose slope exceeds the threshold
            if quiet {
                assert!(!cell.dirs.contains_angle(row.angle), "{at:?} direction {d}");
            }
        }
    }
}

#[test]
fn group_model_estimates() {
    let m = GroupoidModel::circle_group(N).unwrap();
    let p = params();
    let u = point_mass(m, &[10], C64::new(1.0, 0.0)).unwrap();
    let e = estimate_wavefront(&u, &p).unwrap().estimated;
    assert!(e.cells.iter().any(|c| c.base[0].dilate(p.probe_stride).contains(10)
        && c.dirs == Directions::Signs { plus: true, minus: true }));
    assert!(cone_contains(&e, &point_cone(m, &[10]).unwrap(), 0.0, 2 * p.probe_stride).unwrap());
    let s = gaussian_bump(m, &[0.3], 0.1).unwrap();
    assert!(estimate_wavefront(&s, &p).unwrap().estimated.is_empty());
}

#[test]
fn continuous_models_are_unsupported() {
    let m = GroupoidModel::affine_group();
    assert!(matches!(Distribution::zero(m), Err(GrpdError::Unsupported(_))));
}

#[test]
fn product_catalog_passes_the_bound() {
    let m = pair();
    let p = params();
    let (l1, l2) = (rotation_layer(m, 16, 0).unwrap(), rotation_layer(m, 40, 1).unwrap());
    let (c1, c2) = (rotation_conormal(m, 16).unwrap(), rotation_conormal(m, 40).unwrap());
    let e = ConeSet::empty(m);
    let s1 = gaussian_bump(m, &[0.3, 0.6], 0.08).unwrap();
    let s2 = gaussian_bump(m, &[0.5, 0.5], 0.1).unwrap();
    let d = unit_delta(m).unwrap();
    let units = a_star_units(m).unwrap();

    let r = verify_product_bound(&l1, &l2, &c1, &c2, &p).unwrap();
    assert!(r.pass);
    assert!(covers(&r.estimated, &conormal_truth(56), 2 * p.probe_stride));
    let r = verify_product_bound(&d, &l2, &units, &c2, &p).unwrap();
    assert!(r.pass);
    assert!(cone_contains(&r.estimated, &grpd_core::cone::cone_product_bar(&units, &c2).unwrap(), PI / 18.0, 2 * p.probe_stride).unwrap());
    for (a, b, wa, wb) in [(&l1, &s1, &c1, &e), (&s1, &l2, &e, &c2), (&s1, &s2, &e, &e)] {
        let r = verify_product_bound(a, b, wa, wb, &p).unwrap();
        assert!(r.pass && r.estimated.is_empty());
    }
    let p1 = point_mass(m, &[0, 0], C64::new(1.0, 0.0)).unwrap();
    let p2 = point_mass(m, &[64, 64], C64::new(1.0, 0.0)).unwrap();
    let w1 = point_cone(m, &[0, 0]).unwrap();
    let w2 = point_cone(m, &[64, 64]).unwrap();
    let r = verify_product_bound(&p1, &p2, &w1, &w2, &p).unwrap();
    assert!(r.pass && r.estimated.is_empty() && r.product_max < 1e-12);
}

#[test]
fn gate_failure_propagates() {
    let m = pair();
    let w = point_cone(m, &[3, 3]).unwrap();
    let u = point_mass(m, &[3, 3], C64::new(1.0, 0.0)).unwrap();
    assert!(matches!(verify_product_bound(&u, &u, &w, &w, &params()), Err(GrpdError::ConeCondition(_))));
}

#[test]
fn report_files_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("wf_report");
    std::fs::create_dir_all(&dir).unwrap();
    let r = estimate_wavefront(&counterexample_distribution(64).unwrap(), &WfParams::for_grid(64)).unwrap();
    r.write(&dir, "cx").unwrap();
    let back = WfReport::read(&dir.join("cx.json")).unwrap();
    assert_eq!(back, r);
    let (j, c) = (std::fs::read(dir.join("cx.json")).unwrap(), std::fs::read(dir.join("cx.csv")).unwrap());
    back.write(&dir, "cx").unwrap();
    assert_eq!(std::fs::read(dir.join("cx.json")).unwrap(), j);
    assert_eq!(std::fs::read(dir.join("cx.csv")).unwrap(), c);
}

#[test]
fn nominal_params_validate() {
    for n in [64, 128, 256] {
        WfParams::nominal(n).validate(n).unwrap();
        WfParams::for_grid(n).validate(n).unwrap();
    }
}
