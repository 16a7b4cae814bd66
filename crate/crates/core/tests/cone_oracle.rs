//! Dense-sampling oracle for the closed-form pair-model cone products, plus
//! the transversality heredity statements.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use grpd_core::cone::{
    cone_product, cone_product_bar, hormander_gate, random_cone, transversality, Arc, ConeCell,
    ConeSet, Directions, Transversality,
};
use grpd_core::models::GroupoidModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_angle(arc: &Arc, rng: &mut ChaCha8Rng) -> Option<f64> {
    let w = arc.width();
    let choice = rng.gen_range(0..4);
    let t = match choice {
        0 if !arc.lo_open => 0.0,
        1 if !arc.hi_open => w,
        _ if w > 0.0 => rng.gen_range(0.0..1.0) * w,
        _ => return if arc.lo_open { None } else { Some(arc.lo) },
    };
    if (t == 0.0 && arc.lo_open) || (t == w && arc.hi_open) {
        return None;
    }
    Some((arc.lo + t).rem_euclid(TAU))
}

const AXES: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

/// Snap exact axis angles so that `sin`/`cos` vanish exactly.
fn unit(a: f64) -> (f64, f64) {
    for (k, &ax) in AXES.iter().enumerate() {
        if (a - ax).abs() < 1e-15 {
            return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][k];
        }
    }
    (a.cos(), a.sin())
}

/// Samples composable pairs from `w1 × w2` and checks the product contains them.
fn check_oracle(w1: &ConeSet, w2: &ConeSet, p: &ConeSet, bar: bool, rng: &mut ChaCha8Rng) -> usize {
    let mut hits = 0;
    let n = w1.model.n;
    for c1 in &w1.cells {
        for c2 in &w2.cells {
            let ys: Vec<usize> = c1.base[1].iter().filter(|&y| c2.base[0].contains(y)).collect();
            if ys.is_empty() {
                continue;
            }
            for _ in 0..40 {
                let x = c1.base[0].iter().nth(rng.gen_range(0..c1.base[0].len)).unwrap();
                let z = c2.base[1].iter().nth(rng.gen_range(0..c2.base[1].len)).unwrap();
                let a1 = &c1.dirs.arcs()[rng.gen_range(0..c1.dirs.arcs().len())];
                let a2 = &c2.dirs.arcs()[rng.gen_range(0..c2.dirs.arcs().len())];
                // axis angles inside the arcs are sampled explicitly
                let alpha = if rng.gen_bool(0.3) {
                    AXES.iter().copied().find(|&ax| a1.contains(ax)).or_else(|| sample_angle(a1, rng))
                } else {
                    sample_angle(a1, rng)
                };
                let beta = if rng.gen_bool(0.3) {
                    AXES.iter().copied().find(|&ax| a2.contains(ax)).or_else(|| sample_angle(a2, rng))
                } else {
                    sample_angle(a2, rng)
                };
                let (Some(alpha), Some(beta)) = (alpha, beta) else { continue };
                let (c_a, s_a) = unit(alpha);
                let (c_b, s_b) = unit(beta);
                let v = if s_a == 0.0 && c_b == 0.0 {
                    let (t, u) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
                    [t * c_a, u * s_b]
                } else if s_a * c_b < 0.0 {
                    // u cos β = −t sin α with t = 1
                    let u = -s_a / c_b;
                    [c_a, u * s_b]
                } else {
                    continue;
                };
                if v[0] == 0.0 && v[1].abs() < 1e-12 {
                    continue;
                }
                assert!(
                    p.contains_point(&[x, z], &v),
                    "missing ({x},{z}) {v:?} from α={alpha} β={beta}\n{c1:?}\n{c2:?}"
                );
                hits += 1;
            }
        }
    }
    if bar {
        for c1 in &w1.cells {
            for ax in [0.0, PI] {
                if c1.dirs.contains_angle(ax) {
                    let x = c1.base[0].start;
                    let (cx, _) = unit(ax);
                    assert!(p.contains_point(&[x, rng.gen_range(0..n)], &[cx, 0.0]));
                }
            }
        }
        for c2 in &w2.cells {
            for ax in [FRAC_PI_2, 3.0 * FRAC_PI_2] {
                if c2.dirs.contains_angle(ax) {
                    let z = c2.base[1].start;
                    let (_, sy) = unit(ax);
                    assert!(p.contains_point(&[rng.gen_range(0..n), z], &[0.0, sy]));
                }
            }
        }
    }
    hits
}

#[test]
fn pair_product_contains_sampled_compositions() {
    let model = GroupoidModel::pair_circle(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut total = 0;
    for _ in 0..300 {
        let w1 = random_cone(model, 3, &mut rng);
        let w2 = random_cone(model, 3, &mut rng);
        let p = cone_product(&w1, &w2).unwrap();
        total += check_oracle(&w1, &w2, &p, false, &mut rng);
        let pb = cone_product_bar(&w1, &w2).unwrap();
        total += check_oracle(&w1, &w2, &pb, true, &mut rng);
    }
    assert!(total > 1000, "oracle exercised only {total} compositions");
}

#[test]
fn quadrant_from_axis_directions_is_open() {
    let model = GroupoidModel::pair_circle(8).unwrap();
    let cell = |b: [usize; 2], a: f64| ConeCell {
        base: vec![
            grpd_core::cone::CircInterval::point(b[0], 8),
            grpd_core::cone::CircInterval::point(b[1], 8),
        ],
        dirs: Directions::Arcs(vec![Arc::point(a)]),
    };
    let w1 = ConeSet::new(model, vec![cell([0, 1], 0.0)]).unwrap();
    let w2 = ConeSet::new(model, vec![cell([1, 2], FRAC_PI_2)]).unwrap();
    let p = cone_product(&w1, &w2).unwrap();
    assert!(p.contains_point(&[0, 2], &[1.0, 1.0]));
    assert!(!p.contains_point(&[0, 2], &[1.0, 0.0]));
    assert!(!p.contains_point(&[0, 2], &[0.0, 1.0]));
    assert!(transversality(&w1, Transversality::STransversal));
    assert!(transversality(&p, Transversality::STransversal));
    // the barred product picks up the ζ-axis from 0 × W2
    let pb = cone_product_bar(&w1, &w2).unwrap();
    assert!(pb.contains_point(&[5, 2], &[0.0, 1.0]));
    assert!(!transversality(&pb, Transversality::STransversal));
}

fn heredity_holds(w1: &ConeSet, w2: &ConeSet, bar: bool) -> bool {
    let p = if bar { cone_product_bar(w1, w2).unwrap() } else { cone_product(w1, w2).unwrap() };
    let s_ok = !transversality(w1, Transversality::STransversal)
        || transversality(&p, Transversality::STransversal);
    let r_ok = !transversality(w2, Transversality::RTransversal)
        || transversality(&p, Transversality::RTransversal);
    s_ok && r_ok
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn heredity_for_the_product(seed in any::<u64>()) {
        let model = GroupoidModel::pair_circle(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = random_cone(model, 2, &mut rng);
        let w2 = random_cone(model, 2, &mut rng);
        prop_assert!(heredity_holds(&w1, &w2, false));
    }

    #[test]
    fn s_transversal_first_factor_passes_the_gate(seed in any::<u64>()) {
        let model = GroupoidModel::pair_circle(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = random_cone(model, 2, &mut rng);
        let w2 = random_cone(model, 2, &mut rng);
        if transversality(&w1, Transversality::STransversal)
            || transversality(&w2, Transversality::RTransversal)
        {
            prop_assert!(hormander_gate(&w1, &w2).unwrap());
        }
    }

    // For the barred product the zero-section terms need both factors transversal.
    #[test]
    fn heredity_for_the_barred_product_of_like_factors(seed in any::<u64>()) {
        let model = GroupoidModel::pair_circle(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = random_cone(model, 2, &mut rng);
        let w2 = random_cone(model, 2, &mut rng);
        let p = cone_product_bar(&w1, &w2).unwrap();
        for which in [Transversality::STransversal, Transversality::RTransversal] {
            if transversality(&w1, which) && transversality(&w2, which) {
                prop_assert!(transversality(&p, which));
            }
        }
    }
}
