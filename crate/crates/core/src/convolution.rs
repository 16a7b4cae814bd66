//! The convolution product, its gated variant, and G-operators.

use crate::cone::{cone_product_bar, hormander_gate, ConeSet};
use crate::distribution::{
    add_layer_density, compose_layers, push_multiplication, tensor_restrict, Anchor, Distribution, Layer,
    TestFunction,
};
use crate::error::{GrpdError, Result};
use crate::models::{Element, ModelKind};
use crate::spectral::{circulant_apply, Spectral, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[cfg(feature = "parallel")]
fn rows_map<F>(rows: usize, f: F) -> Vec<Vec<C64>>
where
    F: Fn(usize) -> Vec<C64> + Sync + Send,
{
    use rayon::prelude::*;
    (0..rows).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn rows_map<F>(rows: usize, f: F) -> Vec<Vec<C64>>
where
    F: Fn(usize) -> Vec<C64>,
{
    (0..rows).map(f).collect()
}

/// `(1/n) A B` for `n × n` row-major matrices.
fn matmul_scaled(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let s = 1.0 / n as f64;
    rows_map(n, |x| {
        let mut row = vec![ZERO; n];
        for y in 0..n {
            let ay = a[x * n + y];
            if ay == ZERO {
                continue;
            }
            for (r, bv) in row.iter_mut().zip(&b[y * n..(y + 1) * n]) {
                *r += ay * bv;
            }
        }
        row.iter_mut().for_each(|v| *v *= s);
        row
    })
    .concat()
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `Λ * B` on the pair model: `c(x) (−1)^k (∂_1^k B)(x − θ, z)`.
fn layer_dense(n: usize, l: &Layer, b: &[C64]) -> Vec<C64> {
    let bk = if l.fiber_order == 0 {
        b.to_vec()
    } else {
        let sp = Spectral::new(n);
        let mut out = b.to_vec();
        let mut col = vec![ZERO; n];
        for z in 0..n {
            for y in 0..n {
                col[y] = b[y * n + z];
            }
            sp.deriv(&mut col, l.fiber_order);
            for y in 0..n {
                out[y * n + z] = col[y];
            }
        }
        out
    };
    let sg = sign(l.fiber_order);
    let mut out = vec![ZERO; n * n];
    for x in 0..n {
        let src = (x + n - l.section) % n;
        let c = l.coeffs[x] * sg;
        for z in 0..n {
            out[x * n + z] = c * bk[src * n + z];
        }
    }
    out
}

/// `A * Λ` on the pair model: `D^k[A(x, · + θ) c(· + θ)](z)`.
fn dense_layer(n: usize, a: &[C64], l: &Layer) -> Vec<C64> {
    let sp = Spectral::new(n);
    let mut out = vec![ZERO; n * n];
    for x in 0..n {
        let row = &mut out[x * n..(x + 1) * n];
        for (j, r) in row.iter_mut().enumerate() {
            let y = (j + l.section) % n;
            *r = a[x * n + y] * l.coeffs[y];
        }
        sp.deriv(row, l.fiber_order);
    }
    out
}

/// `(1/n) Σ_y a(y) b(x − y)` on the circle group, summed in a fixed order.
fn group_conv(n: usize, a: &[C64], b: &[C64]) -> Vec<C64> {
    let s = 1.0 / n as f64;
    (0..n)
        .map(|x| {
            let mut acc = ZERO;
            for y in 0..n {
                acc += a[y] * b[(x + n - y) % n];
            }
            acc * s
        })
        .collect()
}

fn group_layer_dense(n: usize, l: &Layer, v: &[C64]) -> Vec<C64> {
    let d = Spectral::new(n).deriv_stencil(l.fiber_order);
    let dv = if l.fiber_order == 0 { v.to_vec() } else { circulant_apply(&d, v) };
    (0..n).map(|g| l.coeffs[0] * dv[(g + n - l.section) % n]).collect()
}

fn is_zero(v: &[C64]) -> bool {
    v.iter().all(|c| *c == ZERO)
}

/// `u * v`. Needs `u` transversal to `s` or `v` transversal to `r`.
pub fn convolve(u: &Distribution, v: &Distribution) -> Result<Distribution> {
    u.model.require_same(&v.model)?;
    if !(u.is_transversal(Anchor::AlongS) || v.is_transversal(Anchor::AlongR)) {
        return Err(GrpdError::Transversality(
            "neither factor is transversal (grid point masses on both sides); use convolve_gated".into(),
        ));
    }
    let model = u.model;
    let n = model.n;
    let group = model.kind == ModelKind::CircleGroup;
    let (a, b) = (u.dense_part(), v.dense_part());
    let (za, zb) = (is_zero(&a), is_zero(&b));
    let mut dense = vec![ZERO; a.len()];
    let mut acc = |w: Vec<C64>| dense.iter_mut().zip(w).for_each(|(p, q)| *p += q);
    if !za && !zb {
        acc(if group { group_conv(n, &a, &b) } else { matmul_scaled(n, &a, &b) });
    }
    if !zb {
        for l in &u.layers {
            acc(if group { group_layer_dense(n, l, &b) } else { layer_dense(n, l, &b) });
        }
    }
    if !za {
        for l in &v.layers {
            acc(if group { group_layer_dense(n, l, &a) } else { dense_layer(n, &a, l) });
        }
    }
    let mut layers = Vec::new();
    for l1 in &u.layers {
        for l2 in &v.layers {
            match compose_layers(&model, l1, l2)? {
                Some(l) => layers.push(l),
                None => {
                    let mut d2 = vec![ZERO; n * n];
                    add_layer_density(&model, &Spectral::new(n), l2, &mut d2);
                    acc(layer_dense(n, l1, &d2));
                }
            }
        }
    }
    let any = dense.iter().any(|c| *c != ZERO);
    Ok(Distribution {
        model,
        smooth: any.then_some(dense),
        layers,
        atoms: vec![],
        label: format!("({})*({})", u.label, v.label),
    })
}

/// `m_*(u ×_π v)` computed through the composable-pair pipeline, with the
/// predicted bound `W1 ∗̄ W2`. Refuses when the cone condition fails.
pub fn convolve_gated(
    u: &Distribution,
    v: &Distribution,
    w1: &ConeSet,
    w2: &ConeSet,
) -> Result<(Distribution, ConeSet)> {
    u.model.require_same(&v.model)?;
    u.model.require_same(&w1.model)?;
    w1.model.require_same(&w2.model)?;
    if !hormander_gate(w1, w2)? {
        return Err(GrpdError::ConeCondition("W1 × W2 meets ker m_Γ".into()));
    }
    let predicted = cone_product_bar(w1, w2)?;
    let w = push_multiplication(&tensor_restrict(u, v)?)?;
    Ok((w.with_label(format!("({})*̄({})", u.label, v.label)), predicted))
}

/// Left convolution by an `r`-transversal kernel.
#[derive(Clone, Debug)]
pub struct GOperator {
    kernel: Distribution,
}

impl GOperator {
    pub fn new(kernel: Distribution) -> Result<Self> {
        if !kernel.is_transversal(Anchor::AlongR) {
            return Err(GrpdError::Transversality("G-operator kernels must be r-transversal".into()));
        }
        Ok(Self { kernel })
    }

    pub fn kernel(&self) -> &Distribution {
        &self.kernel
    }

    /// Adjoint kernel; kernels built from smooth parts and layers are bi-transversal.
    pub fn adjoint(&self) -> Result<Self> {
        Self::new(crate::distribution::star_involution(&self.kernel))
    }
}

pub fn apply_operator(p: &GOperator, f: &TestFunction) -> Result<TestFunction> {
    let w = convolve(&p.kernel, &f.clone().into_distribution())?;
    TestFunction::new(f.model, w.materialize())
}

/// Fixed test functions for the module property.
fn basket(model: crate::models::GroupoidModel) -> Result<Vec<TestFunction>> {
    use std::f64::consts::TAU;
    let b = crate::catalog::gaussian_bump(model, &[0.3, 0.6], 0.1)?;
    let mut out = vec![TestFunction::new(model, b.smooth.unwrap())?];
    out.push(TestFunction::from_fn(model, |p| {
        let y = p.get(1).copied().unwrap_or(0.0);
        C64::new((TAU * p[0]).cos() * (1.0 + (TAU * y).sin()), (2.0 * TAU * (p[0] - y)).sin())
    })?);
    out.push(TestFunction::from_fn(model, |p| C64::new(1.0, 0.0) + p.iter().map(|t| (TAU * t).sin().exp()).product::<f64>())?);
    Ok(out)
}

/// `max_f ‖P(f*g) − P(f)*g‖_∞` over a fixed basket of `f`.
pub fn module_property_check(p: &GOperator, g: &TestFunction) -> Result<f64> {
    let gd = g.clone().into_distribution();
    let mut worst: f64 = 0.0;
    for f in basket(g.model)? {
        let fg = convolve(&f.clone().into_distribution(), &gd)?;
        let lhs = apply_operator(p, &TestFunction::new(g.model, fg.materialize())?)?;
        let pf = apply_operator(p, &f)?;
        let rhs = convolve(&pf.into_distribution(), &gd)?.materialize();
        worst = worst.max(crate::grid::max_diff(&lhs.values, &rhs));
    }
    Ok(worst)
}

/// Right translation `R_γ f(η) = f(ηγ)` on the fiber `s^{-1}(r(γ))`, with
/// `f` left unchanged elsewhere.
pub fn right_translate(gamma: &Element, f: &TestFunction) -> Result<TestFunction> {
    f.model.require_same(gamma.model())?;
    let n = f.model.n;
    let idx = gamma.indices().ok_or_else(|| GrpdError::Unsupported("continuous model".into()))?;
    let mut v = f.values.clone();
    match f.model.kind {
        ModelKind::PairCircle => {
            let (a, b) = (idx[0], idx[1]);
            for x in 0..n {
                v[x * n + a] = f.values[x * n + b];
            }
        }
        ModelKind::CircleGroup => {
            for g in 0..n {
                v[g] = f.values[(g + idx[0]) % n];
            }
        }
        k => return Err(GrpdError::Unsupported(format!("translation on {k:?}"))),
    }
    TestFunction::new(f.model, v)
}

/// `‖P(R_γ f) − R_γ P(f)‖_∞` on the fiber `s^{-1}(r(γ))`.
pub fn equivariance_defect(p: &GOperator, gamma: &Element, f: &TestFunction) -> Result<f64> {
    let n = f.model.n;
    let lhs = apply_operator(p, &right_translate(gamma, f)?)?;
    let rhs = right_translate(gamma, &apply_operator(p, f)?)?;
    let idx = gamma.indices().expect("grid model checked above");
    let fiber: Vec<usize> = match f.model.kind {
        ModelKind::PairCircle => (0..n).map(|x| x * n + idx[0]).collect(),
        _ => (0..n).collect(),
    };
    Ok(fiber.iter().fold(0.0, |m, &i| m.max((lhs.values[i] - rhs.values[i]).norm())))
}

/// Rebuilds `k_P` from a black-box `apply` by probing the fiber-supported basis
/// functions `n·1_{(j,j)}` (pair model) or `n·1_0` (group). A kernel supported on
/// one rotation graph comes back as an order-0 layer.
pub fn recover_kernel<F>(model: crate::models::GroupoidModel, apply: F) -> Result<Distribution>
where
    F: Fn(&TestFunction) -> Result<TestFunction> + Sync,
{
    let n = model.n;
    let nf = n as f64;
    let probe = |j: usize| -> Result<Vec<C64>> {
        let mut e = vec![ZERO; model.grid_dims().iter().product()];
        let at = if model.kind == ModelKind::PairCircle { j * n + j } else { j };
        e[at] = C64::new(nf, 0.0);
        let out = apply(&TestFunction::new(model, e)?)?;
        if out.model != model || out.values.len() != out.model.grid_dims().iter().product::<usize>() {
            return Err(GrpdError::Shape("operator output does not fit the model".into()));
        }
        Ok(out.values)
    };
    let kernel: Vec<C64> = match model.kind {
        ModelKind::PairCircle => {
            let cols = probe_all(n, probe)?;
            let mut k = vec![ZERO; n * n];
            for (j, col) in cols.iter().enumerate() {
                for x in 0..n {
                    k[x * n + j] = col[x * n + j];
                }
            }
            k
        }
        ModelKind::CircleGroup => probe(0)?,
        k => return Err(GrpdError::Unsupported(format!("kernels on {k:?}"))),
    };
    Ok(detect_layer(model, kernel))
}

#[cfg(feature = "parallel")]
fn probe_all<P>(n: usize, probe: P) -> Result<Vec<Vec<C64>>>
where
    P: Fn(usize) -> Result<Vec<C64>> + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(&probe).collect()
}

#[cfg(not(feature = "parallel"))]
fn probe_all<P>(n: usize, probe: P) -> Result<Vec<Vec<C64>>>
where
    P: Fn(usize) -> Result<Vec<C64>>,
{
    (0..n).map(probe).collect()
}

fn detect_layer(model: crate::models::GroupoidModel, k: Vec<C64>) -> Distribution {
    let n = model.n;
    let nf = n as f64;
    let support: Vec<usize> = (0..k.len()).filter(|&i| k[i] != ZERO).collect();
    let smooth = |k: Vec<C64>| Distribution::smooth(model, k, "recovered").expect("shape follows the model");
    match model.kind {
        ModelKind::CircleGroup if support.len() == 1 => {
            let a = support[0];
            crate::distribution::make_layer(model, a, vec![k[a] / nf], 0)
                .expect("valid layer")
                .with_label("recovered")
        }
        ModelKind::PairCircle if !support.is_empty() => {
            let theta = |i: usize| (i / n + n - i % n) % n;
            let t0 = theta(support[0]);
            if support.iter().all(|&i| theta(i) == t0) {
                let coeffs = (0..n).map(|x| k[x * n + (x + n - t0) % n] / nf).collect();
                crate::distribution::make_layer(model, t0, coeffs, 0)
                    .expect("valid layer")
                    .with_label("recovered")
            } else {
                smooth(k)
            }
        }
        _ => smooth(k),
    }
}
