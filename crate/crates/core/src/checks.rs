//! Property suites behind the acceptance criteria, shared by the CLI demos and
//! the acceptance test. Every suite is deterministic for a given seed.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{
    counterexample_distribution, gaussian_bump, random_band_limited, smooth_coeffs,
};
use crate::cone::{
    a_star_units, cone_product, cone_product_bar, point_cone, random_cell, random_cone, rotation_conormal,
    transversality, ConeSet, Transversality,
};
use crate::convolution::{
    apply_operator, convolve, equivariance_defect, module_property_check, recover_kernel, GOperator,
};
use crate::cotangent::{
    ct_anchor_maps, ct_invert, ct_multiply, in_kernel, in_kernel_m, lagrangian_residual,
    sample_composable_ct_pair, sample_composable_ct_triple, transformation_iso_phi, transformation_multiply,
    CotangentPoint, CotangentUnit, KernelKind,
};
use crate::distribution::{
    make_layer, point_mass, pushforward_base, star_involution, unit_delta, Anchor, Distribution, TestFunction,
};
use crate::error::Result;
use crate::grid::Grid;
use crate::models::{
    anchor_maps, invert, multiply, sample_composable_triple, sample_element, unit_embed, Element, GroupoidModel,
    ModelKind, Unit,
};
use crate::spectral::{freq, Spectral, C64};
use crate::wavefront::{estimate_wavefront, verify_product_bound, WfParams, WfReport};

pub const TITLES: [&str; 9] = [
    "groupoid and cotangent groupoid axioms",
    "kernel identities and Lagrangian graph",
    "convolution algebra laws",
    "G-operator correspondence",
    "transformation groupoid isomorphism",
    "counterexample reproduction",
    "microlocal product bound",
    "cone algebra heredity",
    "determinism and serialization",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// `"<"` or `"<="`.
    pub cmp: &'static str,
    pub limit: f64,
    pub pass: bool,
}

impl Metric {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, cmp: "<", limit, pass: value < limit }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, cmp: "<=", limit, pass: value <= limit }
    }

    /// A yes/no property, stored as a failure count.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::at_most(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub criterion: usize,
    pub title: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    /// Diagnostics that are reported but do not decide the verdict.
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(criterion: usize, seed: u64) -> Self {
        Self { criterion, title: TITLES[criterion - 1].into(), seed, metrics: vec![], notes: vec![] }
    }

    pub fn pass(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }

    fn push(&mut self, m: Metric) {
        self.metrics.push(m);
    }

    /// One line, e.g. `criterion 3 (convolution algebra laws): PASS`.
    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self.metrics.iter().filter(|m| !m.pass).map(|m| m.name.as_str()).collect();
        let verdict = if failed.is_empty() { "PASS".to_string() } else { format!("FAIL [{}]", failed.join(", ")) };
        format!("criterion {} ({}): {}", self.criterion, self.title, verdict)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn elem_residual(a: &Element, b: &Element) -> f64 {
    if a.model() != b.model() {
        return 1.0;
    }
    match (a.indices(), b.indices()) {
        (Some(p), Some(q)) => f64::from(u8::from(p != q)),
        _ => a.coords().iter().zip(b.coords()).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
    }
}

fn unit_residual(a: &Unit, b: &Unit) -> f64 {
    if a.model() != b.model() || a.indices() != b.indices() {
        return 1.0;
    }
    a.coords().iter().zip(b.coords()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn vec_residual(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return 1.0;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn ct_residual(a: &CotangentPoint, b: &CotangentPoint) -> f64 {
    elem_residual(&a.base, &b.base).max(vec_residual(&a.covector, &b.covector))
}

fn ctu_residual(a: &CotangentUnit, b: &CotangentUnit) -> f64 {
    unit_residual(&a.unit, &b.unit).max(vec_residual(&a.class, &b.class))
}

fn all_models() -> Result<Vec<GroupoidModel>> {
    Ok(vec![
        GroupoidModel::pair_circle(64)?,
        GroupoidModel::circle_group(64)?,
        GroupoidModel::pair_times_z(64, 8)?,
        GroupoidModel::affine_group(),
    ])
}

fn model_name(m: &GroupoidModel) -> &'static str {
    match m.kind {
        ModelKind::PairCircle => "PAIR_CIRCLE",
        ModelKind::CircleGroup => "CIRCLE_GROUP",
        ModelKind::PairTimesZ => "PAIR_TIMES_Z",
        ModelKind::AffineGroup => "AFFINE_GROUP",
    }
}

/// Axioms of G and of T*G on `samples` tuples per model.
pub fn criterion_1(seed: u64, samples: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new(1, seed);
    for (mi, model) in all_models()?.into_iter().enumerate() {
        let mut r = rng(seed, mi as u64);
        let (mut assoc, mut anchors, mut unit, mut inv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..samples {
            let (g1, g2, g3) = sample_composable_triple(model, &mut r);
            let g12 = multiply(&g1, &g2)?;
            assoc = assoc.max(elem_residual(&multiply(&g12, &g3)?, &multiply(&g1, &multiply(&g2, &g3)?)?));
            let (s12, r12) = anchor_maps(&g12)?;
            anchors = anchors.max(unit_residual(&s12, &anchor_maps(&g2)?.0));
            anchors = anchors.max(unit_residual(&r12, &anchor_maps(&g1)?.1));
            let (s1, r1) = anchor_maps(&g1)?;
            unit = unit.max(elem_residual(&multiply(&unit_embed(&r1)?, &g1)?, &g1));
            unit = unit.max(elem_residual(&multiply(&g1, &unit_embed(&s1)?)?, &g1));
            let gi = invert(&g1)?;
            inv = inv.max(elem_residual(&multiply(&g1, &gi)?, &unit_embed(&r1)?));
            inv = inv.max(elem_residual(&multiply(&gi, &g1)?, &unit_embed(&s1)?));
        }
        let name = model_name(&model);
        rep.push(Metric::below(format!("{name} associativity"), assoc, 1e-9));
        rep.push(Metric::below(format!("{name} anchors of products"), anchors, 1e-9));
        rep.push(Metric::below(format!("{name} unit laws"), unit, 1e-9));
        rep.push(Metric::below(format!("{name} inverse laws"), inv, 1e-9));

        let (mut assoc, mut anchors, mut unit, mut inv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..samples {
            let (d1, d2, d3) = sample_composable_ct_triple(model, &mut r);
            let d12 = ct_multiply(&d1, &d2)?;
            assoc = assoc.max(ct_residual(&ct_multiply(&d12, &d3)?, &ct_multiply(&d1, &ct_multiply(&d2, &d3)?)?));
            let (s12, r12) = ct_anchor_maps(&d12)?;
            anchors = anchors.max(ctu_residual(&s12, &ct_anchor_maps(&d2)?.0));
            anchors = anchors.max(ctu_residual(&r12, &ct_anchor_maps(&d1)?.1));
            let (s1, r1) = ct_anchor_maps(&d1)?;
            unit = unit.max(ct_residual(&ct_multiply(&r1.embed()?, &d1)?, &d1));
            unit = unit.max(ct_residual(&ct_multiply(&d1, &s1.embed()?)?, &d1));
            let di = ct_invert(&d1)?;
            inv = inv.max(ct_residual(&ct_multiply(&d1, &di)?, &r1.embed()?));
            inv = inv.max(ct_residual(&ct_multiply(&di, &d1)?, &s1.embed()?));
        }
        rep.push(Metric::below(format!("T*{name} associativity"), assoc, 1e-9));
        rep.push(Metric::below(format!("T*{name} anchors of products"), anchors, 1e-9));
        rep.push(Metric::below(format!("T*{name} unit laws"), unit, 1e-9));
        rep.push(Metric::below(format!("T*{name} inverse laws"), inv, 1e-9));
    }
    Ok(rep)
}

#[cfg(feature = "parallel")]
fn map_rows<F: Fn(usize) -> Result<usize> + Sync + Send>(n: usize, f: F) -> Result<Vec<usize>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_rows<F: Fn(usize) -> Result<usize>>(n: usize, f: F) -> Result<Vec<usize>> {
    (0..n).map(f).collect()
}

/// Coordinate axes along which an anchor map is constant, found by stepping the indices.
fn kernel_axes(g: &Element, target: bool) -> Result<Vec<usize>> {
    let model = *g.model();
    let idx = g.indices().expect("grid model").to_vec();
    let pick = |e: &Element| -> Result<Unit> {
        let (s, r) = anchor_maps(e)?;
        Ok(if target { r } else { s })
    };
    let here = pick(g)?;
    let mut axes = vec![];
    for ax in 0..idx.len() {
        let mut j = idx.clone();
        j[ax] = (j[ax] + 1) % model.axis_len(ax);
        if pick(&Element::grid(model, &j)?)? == here {
            axes.push(ax);
        }
    }
    Ok(axes)
}

/// Kernel identities on every base of PAIR_CIRCLE(n) and the Lagrangian residual
/// on `triples` composable triples of the affine group.
pub fn criterion_2(seed: u64, n: usize, triples: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new(2, seed);
    let model = GroupoidModel::pair_circle(n)?;
    let lattice: Vec<f64> = vec![-2.0, -1.0, 0.0, 1.0, 2.5];
    let (mut ks, mut kr) = (0usize, 0usize);
    for x in 0..n {
        for y in 0..n {
            let g = Element::grid(model, &[x, y])?;
            // (ker dr)^⊥ and (ker ds)^⊥ as annihilators of the constant axes
            let (dr0, ds0) = (kernel_axes(&g, true)?, kernel_axes(&g, false)?);
            for &a in &lattice {
                for &b in &lattice {
                    let cov = vec![a, b];
                    let d = CotangentPoint::new(g.clone(), cov.clone())?;
                    let ann = |axes: &[usize]| axes.iter().all(|&i| cov[i] == 0.0);
                    ks += usize::from(in_kernel(&d, KernelKind::KerSGamma)? != ann(&dr0));
                    kr += usize::from(in_kernel(&d, KernelKind::KerRGamma)? != ann(&ds0));
                }
            }
        }
    }
    rep.push(Metric::at_most("ker s_Γ vs (ker dr)^⊥ mismatches", ks as f64, 0.0));
    rep.push(Metric::at_most("ker r_Γ vs (ker ds)^⊥ mismatches", kr as f64, 0.0));

    // N*G^(2): (ξ1, η1, ξ2, η2) kills (e_x, 0), (0, e_y) and (e_y, e_x)
    let etas = [-1.0, 0.0, 2.0];
    let outer = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (-1.0, 2.0)];
    let row = |x: usize| -> Result<usize> {
        let mut bad = 0usize;
        for y in 0..n {
            let g1 = Element::grid(model, &[x, y])?;
            for z in 0..n {
                let g2 = Element::grid(model, &[y, z])?;
                for &eta1 in &etas {
                    for &(xi1, eta2) in &outer {
                        let cov1 = [xi1, eta1];
                        let cov2 = [-eta1, eta2];
                        let d1 = CotangentPoint::new(g1.clone(), cov1.to_vec())?;
                        let d2 = CotangentPoint::new(g2.clone(), cov2.to_vec())?;
                        let conormal = cov1[0] == 0.0 && cov2[1] == 0.0 && cov1[1] + cov2[0] == 0.0;
                        bad += usize::from(in_kernel_m(&d1, &d2)? != conormal);
                    }
                }
            }
        }
        Ok(bad)
    };
    let km: usize = map_rows(n, row)?.into_iter().sum();
    rep.push(Metric::at_most("ker m_Γ vs N*G^(2) mismatches", km as f64, 0.0));

    let aff = GroupoidModel::affine_group();
    let mut r = rng(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..triples {
        let (d1, d2, d3) = sample_composable_ct_triple(aff, &mut r);
        worst = worst.max(lagrangian_residual(&d1, &d2)?);
        worst = worst.max(lagrangian_residual(&d2, &d3)?);
        worst = worst.max(lagrangian_residual(&ct_multiply(&d1, &d2)?, &d3)?);
    }
    rep.push(Metric::below("AFFINE_GROUP Lagrangian residual", worst, 1e-6));
    Ok(rep)
}

/// Factors used for the algebra laws: smooth, order-0 layer with varying
/// coefficients, order-1 layer with a constant coefficient.
pub fn algebra_factors(model: GroupoidModel) -> Result<Vec<Distribution>> {
    let n = model.n;
    let one = |v: C64| if model.kind == ModelKind::PairCircle { vec![v; n] } else { vec![v] };
    let coeffs = if model.kind == ModelKind::PairCircle { smooth_coeffs(n, 0.4, 0.1) } else { one(c(0.8)) };
    let centre: Vec<f64> = if model.kind == ModelKind::PairCircle { vec![0.3, 0.6] } else { vec![0.3] };
    Ok(vec![
        gaussian_bump(model, &centre, 0.15)?,
        make_layer(model, 5, coeffs, 0)?,
        make_layer(model, 11, one(C64::new(0.05, 0.02)), 1)?,
    ])
}

fn star_mismatch(u: &Distribution, v: &Distribution) -> Result<f64> {
    let lhs = star_involution(&convolve(u, v)?);
    let rhs = convolve(&star_involution(v), &star_involution(u))?;
    lhs.distance(&rhs)
}

/// Associativity, unit and involution laws at grid size `n`.
pub fn criterion_3(seed: u64, n: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new(3, seed);
    for model in [GroupoidModel::pair_circle(n)?, GroupoidModel::circle_group(n)?] {
        let name = model_name(&model);
        let f = algebra_factors(model)?;
        let mut band = rng(seed, 3);
        let mut g = f.clone();
        g.push(random_band_limited(model, 5, &mut band)?.scale(c(0.2)));
        let (mut assoc, mut star) = (0.0f64, 0.0f64);
        for a in &g {
            for b in &g {
                star = star.max(star_mismatch(a, b)?);
                let ab = convolve(a, b)?;
                for cc in &g {
                    let l = convolve(&ab, cc)?;
                    let r = convolve(a, &convolve(b, cc)?)?;
                    assoc = assoc.max(l.distance(&r)?);
                }
            }
        }
        rep.push(Metric::below(format!("{name} associativity"), assoc, 1e-9));
        rep.push(Metric::below(format!("{name} (u*v)⋆ − v⋆*u⋆"), star, 1e-10));
        let d = unit_delta(model)?;
        let (mut layer_unit, mut smooth_unit) = (0.0f64, 0.0f64);
        for u in &g {
            for w in [convolve(&d, u)?, convolve(u, &d)?] {
                let e = w.distance(u)?;
                if u.smooth.is_some() {
                    smooth_unit = smooth_unit.max(e);
                } else {
                    layer_unit = layer_unit.max(e);
                }
            }
        }
        rep.push(Metric::at_most(format!("{name} δ unit on layers"), layer_unit, 0.0));
        rep.push(Metric::below(format!("{name} δ unit on smooth parts"), smooth_unit, 1e-12));
    }
    Ok(rep)
}

fn test_functions(model: GroupoidModel) -> Result<Vec<TestFunction>> {
    use std::f64::consts::TAU;
    Ok(vec![
        TestFunction::from_fn(model, |p| {
            let y = p.get(1).copied().unwrap_or(0.0);
            C64::new((TAU * p[0]).sin().exp() * (TAU * y).cos(), 0.3 * (TAU * (p[0] + 2.0 * y)).sin())
        })?,
        TestFunction::new(model, gaussian_bump(model, &vec![0.7; model.dim()], 0.12)?.smooth.expect("smooth"))?,
    ])
}

/// Module property, equivariance and kernel recovery at grid size `n`.
pub fn criterion_4(seed: u64, n: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new(4, seed);
    for model in [GroupoidModel::pair_circle(n)?, GroupoidModel::circle_group(n)?] {
        let name = model_name(&model);
        let mut r = rng(seed, 4);
        let kernels = algebra_factors(model)?;
        let fs = test_functions(model)?;
        let gammas: Vec<Element> = (0..8).map(|_| sample_element(model, &mut r)).collect();
        let (mut module, mut eq_layer, mut eq_smooth, mut recover) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for k in &kernels {
            let p = GOperator::new(k.clone())?;
            for g in &fs {
                module = module.max(module_property_check(&p, g)?);
            }
            for gamma in &gammas {
                for f in &fs {
                    let e = equivariance_defect(&p, gamma, f)?;
                    if k.smooth.is_some() {
                        eq_smooth = eq_smooth.max(e);
                    } else {
                        eq_layer = eq_layer.max(e);
                    }
                }
            }
            let back = recover_kernel(model, |f| apply_operator(&p, f))?;
            recover = recover.max(back.distance(k)?);
        }
        rep.push(Metric::below(format!("{name} module property defect"), module, 1e-9));
        rep.push(Metric::at_most(format!("{name} equivariance defect (layers)"), eq_layer, 0.0));
        rep.push(Metric::below(format!("{name} equivariance defect (smooth)"), eq_smooth, 1e-12));
        rep.push(Metric::below(format!("{name} recover_kernel round trip"), recover, 1e-9));
    }
    Ok(rep)
}

/// Φ(δ1δ2) = Φ(δ1)Φ(δ2) on `pairs` sampled composable pairs of the affine group.
pub fn criterion_5(seed: u64, pairs: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new(5, seed);
    let aff = GroupoidModel::affine_group();
    let mut r = rng(seed, 5);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (d1, d2) = sample_composable_ct_pair(aff, &mut r);
        let (g, xi) = transformation_iso_phi(&ct_multiply(&d1, &d2)?)?;
        let (h, eta) = transformation_multiply(&transformation_iso_phi(&d1)?, &transformation_iso_phi(&d2)?)?;
        worst = worst.max(elem_residual(&g, &h)).max(vec_residual(&xi, &eta));
    }
    rep.push(Metric::below("Φ(δ1δ2) − Φ(δ1)Φ(δ2)", worst, 1e-9));
    Ok(rep)
}

/// Largest DFT modulus (normalized by n) beyond index n/4.
pub fn dft_tail(v: &[C64]) -> f64 {
    let n = v.len();
    let mut w = v.to_vec();
    Spectral::new(n).forward(&mut w);
    (0..n)
        .filter(|&k| freq(k, n).unsigned_abs() as usize > n / 4)
        .fold(0.0, |m, k| m.max(w[k].norm() / n as f64))
}

/// The counterexample at grid size `n`. Also returns its wave-front report.
pub fn criterion_6(seed: u64, n: usize) -> Result<(CheckReport, WfReport)> {
    use std::f64::consts::TAU;
    let mut rep = CheckReport::new(6, seed);
    let u = counterexample_distribution(n)?;
    let fs = [
        TestFunction::from_fn(u.model, |p| c((TAU * p[0]).cos().exp() * (1.0 + 0.5 * (TAU * p[1]).sin())))?,
        TestFunction::from_fn(u.model, |_| c(1.0))?,
        TestFunction::from_fn(u.model, |p| C64::new((2.0 * TAU * p[0]).sin(), (TAU * (p[0] - p[1])).cos()))?,
    ];
    let tail = fs.iter().map(|f| pushforward_base(&u, f, Anchor::AlongS).map(|v| dft_tail(&v))).try_fold(
        0.0f64,
        |m, t| t.map(|t| m.max(t)),
    )?;
    rep.push(Metric::below("s-pushforward DFT tail beyond n/4", tail, 1e-8));
    let p = WfParams::for_grid(n);
    let wf = estimate_wavefront(&u, &p)?;
    let tol = PI / 18.0;
    let best = wf
        .estimated
        .cells
        .iter()
        .flat_map(|cell| cell.dirs.arcs().iter())
        .flat_map(|a| [0.0, PI].map(|t| if a.contains(t) { 0.0 } else { angular_gap(a, t) }))
        .fold(PI, f64::min);
    rep.push(Metric::at_most("angle from (±1,0) to the estimate [rad]", best, tol));
    let s10 = crate::wavefront::decay_slope(&u, &[0, 0], &[1.0, 0.0], &p)?;
    let s01 = crate::wavefront::decay_slope(&u, &[0, 0], &[0.0, 1.0], &p)?;
    rep.notes.push(format!("slope along (1,0) at the origin: {s10}"));
    rep.notes.push(format!("slope along (0,1) at the origin: {s01}"));
    Ok((rep, wf))
}

fn angular_gap(a: &crate::cone::Arc, t: f64) -> f64 {
    let d = |x: f64| {
        let e = (x - t).rem_euclid(2.0 * PI);
        e.min(2.0 * PI - e)
    };
    d(a.lo).min(d(a.hi))
}

/// One entry of the product catalog.
pub struct ProductCase {
    pub name: &'static str,
    pub u1: Distribution,
    pub u2: Distribution,
    pub w1: ConeSet,
    pub w2: ConeSet,
}

pub fn product_catalog(n: usize) -> Result<Vec<ProductCase>> {
    let m = GroupoidModel::pair_circle(n)?;
    let (t1, t2) = (n / 8, (5 * n) / 16);
    let l1 = make_layer(m, t1, vec![c(1.0); n], 0)?.with_label("Λ1");
    let l2 = make_layer(m, t2, vec![c(1.0); n], 1)?.with_label("Λ2");
    let (c1, c2) = (rotation_conormal(m, t1)?, rotation_conormal(m, t2)?);
    let s1 = gaussian_bump(m, &[0.3, 0.6], 0.08)?;
    let s2 = gaussian_bump(m, &[0.5, 0.5], 0.1)?;
    let e = ConeSet::empty(m);
    let half = n / 2;
    let case = |name, u1: &Distribution, u2: &Distribution, w1: &ConeSet, w2: &ConeSet| ProductCase {
        name,
        u1: u1.clone(),
        u2: u2.clone(),
        w1: w1.clone(),
        w2: w2.clone(),
    };
    Ok(vec![
        case("layer*layer", &l1, &l2, &c1, &c2),
        case("delta*layer", &unit_delta(m)?, &l2, &a_star_units(m)?, &c2),
        case("layer*smooth", &l1, &s1, &c1, &e),
        case("smooth*layer", &s1, &l2, &e, &c2),
        case("smooth*smooth", &s1, &s2, &e, &e),
        case(
            "disjoint point masses",
            &point_mass(m, &[0, 0], c(1.0))?,
            &point_mass(m, &[half, half], c(1.0))?,
            &point_cone(m, &[0, 0])?,
            &point_cone(m, &[half, half])?,
        ),
    ])
}

/// The product bound on the catalog at grid size `n`.
pub fn criterion_7(seed: u64, n: usize) -> Result<(CheckReport, Vec<(String, crate::wavefront::ProductBoundReport)>)> {
    let mut rep = CheckReport::new(7, seed);
    let p = WfParams::for_grid(n);
    let mut out = vec![];
    for case in product_catalog(n)? {
        let r = verify_product_bound(&case.u1, &case.u2, &case.w1, &case.w2, &p)?;
        rep.push(Metric::holds(format!("{} contained in W1 ∗̄ W2", case.name), r.pass));
        if case.name == "disjoint point masses" {
            rep.push(Metric::below("disjoint product max norm", r.product_max, 1e-12));
        }
        out.push((case.name.to_string(), r));
    }
    Ok((rep, out))
}

/// Heredity on `pairs` random cell pairs of PAIR_CIRCLE(n).
pub fn criterion_8(seed: u64, n: usize, pairs: usize) -> Result<CheckReport> {
    let mut rep = CheckReport::new(8, seed);
    let model = GroupoidModel::pair_circle(n)?;
    let mut r = rng(seed, 8);
    let (mut unbarred, mut barred, mut one_factor_bar) = (0usize, 0usize, 0usize);
    let (mut s_cases, mut r_cases) = (0usize, 0usize);
    for _ in 0..pairs {
        let w1 = ConeSet::new(model, vec![random_cell(model, &mut r)])?;
        let w2 = ConeSet::new(model, vec![random_cell(model, &mut r)])?;
        let p = cone_product(&w1, &w2)?;
        let pb = cone_product_bar(&w1, &w2)?;
        let (s1, s2) = (transversality(&w1, Transversality::STransversal), transversality(&w2, Transversality::STransversal));
        let (r1, r2) = (transversality(&w1, Transversality::RTransversal), transversality(&w2, Transversality::RTransversal));
        s_cases += usize::from(s1);
        r_cases += usize::from(r2);
        if s1 && !transversality(&p, Transversality::STransversal) {
            unbarred += 1;
        }
        if r2 && !transversality(&p, Transversality::RTransversal) {
            unbarred += 1;
        }
        if s1 && s2 && !transversality(&pb, Transversality::STransversal) {
            barred += 1;
        }
        if r1 && r2 && !transversality(&pb, Transversality::RTransversal) {
            barred += 1;
        }
        if (s1 && !transversality(&pb, Transversality::STransversal))
            || (r2 && !transversality(&pb, Transversality::RTransversal))
        {
            one_factor_bar += 1;
        }
    }
    rep.push(Metric::at_most("W1*W2 heredity violations (one transversal factor)", unbarred as f64, 0.0));
    rep.push(Metric::at_most("W1 ∗̄ W2 heredity violations (both factors transversal)", barred as f64, 0.0));
    rep.push(Metric::holds("a_star_units bi-transversal", transversality(&a_star_units(model)?, Transversality::BiTransversal)));
    rep.notes.push(format!("{pairs} cell pairs: {s_cases} with W1 s-transversal, {r_cases} with W2 r-transversal"));
    rep.notes.push(format!(
        "W1 ∗̄ W2 with only one transversal factor loses transversality in {one_factor_bar} pairs (the 0 × W2 and W1 × 0 terms)"
    ));
    Ok(rep)
}

fn bits(v: &[C64]) -> Vec<(u64, u64)> {
    v.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect()
}

/// Writes and re-reads every file format under `dir`.
pub fn serialization_roundtrips(seed: u64, dir: &Path) -> Result<CheckReport> {
    let mut rep = CheckReport::new(9, seed);
    std::fs::create_dir_all(dir)?;
    let mut r = rng(seed, 9);
    let specials = [0.0, -0.0, f64::MIN_POSITIVE / 3.0, f64::MAX, -1e-300, f64::INFINITY, f64::NAN, 1.0 / 3.0];
    let mut grid_ok = true;
    for dims in [vec![7], vec![5, 9], vec![3, 4, 5]] {
        let len: usize = dims.iter().product();
        let data: Vec<C64> = (0..len)
            .map(|i| {
                let re = if i < specials.len() { specials[i] } else { r.gen_range(-1e3..1e3) };
                C64::new(re, r.gen::<f64>() - 0.5)
            })
            .collect();
        let g = Grid::new(dims.clone(), data)?;
        let path = dir.join(format!("grid_rank{}.grpd", dims.len()));
        g.write(&path)?;
        let back = Grid::read(&path)?;
        grid_ok &= back.dims == g.dims && bits(&back.data) == bits(&g.data);
        grid_ok &= std::fs::read(&path)? == g.to_bytes();
    }
    rep.push(Metric::holds("GRPD grids bit-exact", grid_ok));

    let m = GroupoidModel::pair_circle(32)?;
    let mut u = random_band_limited(m, 4, &mut r)?.add(&make_layer(m, 3, smooth_coeffs(32, 0.3, 0.2), 2)?)?;
    u = u.add(&point_mass(m, &[4, 9], C64::new(0.5, -2.0))?)?.with_label("mixed");
    let g = make_layer(GroupoidModel::circle_group(32)?, 7, vec![C64::new(1.0 / 3.0, 0.1)], 1)?;
    let mut dist_ok = true;
    for (stem, d) in [("mixed", &u), ("group_layer", &g)] {
        d.write(dir, stem)?;
        let back = Distribution::read(&dir.join(format!("{stem}.json")))?;
        dist_ok &= back == *d;
        let json = std::fs::read(dir.join(format!("{stem}.json")))?;
        back.write(dir, stem)?;
        dist_ok &= std::fs::read(dir.join(format!("{stem}.json")))? == json;
    }
    rep.push(Metric::holds("distribution JSON + grid round trip", dist_ok));

    let mut cone_ok = true;
    for model in [m, GroupoidModel::circle_group(32)?, GroupoidModel::pair_times_z(16, 4)?] {
        let w = random_cone(model, 4, &mut r);
        let text = serde_json::to_string_pretty(&w)?;
        let back: ConeSet = serde_json::from_str(&text)?;
        cone_ok &= back == w && serde_json::to_string_pretty(&back)? == text;
        std::fs::write(dir.join(format!("cone_{}.json", model_name(&model).to_lowercase())), text + "\n")?;
    }
    rep.push(Metric::holds("cone set JSON round trip", cone_ok));

    let m64 = GroupoidModel::pair_circle(64)?;
    let wf = estimate_wavefront(&point_mass(m64, &[16, 16], c(1.0))?, &WfParams::for_grid(64))?;
    wf.write(dir, "wf_report")?;
    let back = WfReport::read(&dir.join("wf_report.json"))?;
    let (j, s) = (std::fs::read(dir.join("wf_report.json"))?, std::fs::read(dir.join("wf_report.csv"))?);
    back.write(dir, "wf_report")?;
    let wf_ok = back == wf
        && std::fs::read(dir.join("wf_report.json"))? == j
        && std::fs::read(dir.join("wf_report.csv"))? == s;
    rep.push(Metric::holds("wave-front report JSON + CSV round trip", wf_ok));

    let p = WfParams::nominal(128);
    let pj = serde_json::to_string(&p)?;
    let models = all_models()?;
    let mj = serde_json::to_string(&models)?;
    let misc_ok = serde_json::from_str::<WfParams>(&pj)? == p
        && serde_json::from_str::<Vec<GroupoidModel>>(&mj)? == models;
    rep.push(Metric::holds("parameter and model JSON round trip", misc_ok));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_and_summary() {
        let mut r = CheckReport::new(2, 0);
        r.push(Metric::below("a", 0.5, 1.0));
        assert!(r.pass());
        r.push(Metric::at_most("b", 1.0, 0.0));
        assert!(!r.pass());
        assert_eq!(r.summary(), "criterion 2 (kernel identities and Lagrangian graph): FAIL [b]");
    }

    #[test]
    fn small_suites_pass() {
        assert!(criterion_1(1, 50).unwrap().pass());
        assert!(criterion_5(1, 20).unwrap().pass());
        assert!(criterion_8(1, 16, 60).unwrap().pass());
    }
}
