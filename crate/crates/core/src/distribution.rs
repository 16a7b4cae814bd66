//! Compactly supported distributions on the circle grid models.
//!
//! A distribution is a dense grid part plus symbolic layers (and, on the pair
//! model, grid point masses). Every distribution `u` is identified with its
//! density grid `M(u)`, so that `⟨u, f⟩ = n^{-dim} Σ M(u)·f`. For the pair model
//! a layer `(θ, c, k)` has density `n·c(x)·d_k(y − x + θ)`, where `d_k` is the
//! stencil of the spectral derivative `D^k` along `y`; it pairs as
//!
//! `⟨Λ, f⟩ = (1/n) Σ_x c(x) (−1)^k (D_y^k f)(x, x − θ)`.
//!
//! On the circle group a layer is a differentiated point mass `c·(−1)^k D^k f(a)`.
//! Only `PAIR_CIRCLE` and `CIRCLE_GROUP` carry distributions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GrpdError, Result};
use crate::grid::{max_abs, Grid};
use crate::models::{GroupoidModel, ModelKind, Unit};
use crate::spectral::{stencil_table, Spectral, C64};

pub const MAX_ORDER: usize = 4;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn supported(model: &GroupoidModel) -> Result<()> {
    match model.kind {
        ModelKind::PairCircle | ModelKind::CircleGroup => Ok(()),
        k => Err(GrpdError::Unsupported(format!("distributions on {k:?}"))),
    }
}

fn grid_len(model: &GroupoidModel) -> usize {
    model.grid_dims().iter().product()
}

/// Which anchor the base fibers are taken along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Anchor {
    AlongS,
    AlongR,
}

/// Grid test function on `G`; quadrature weight `1/n` per circle factor.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub model: GroupoidModel,
    pub values: Vec<C64>,
}

impl TestFunction {
    pub fn new(model: GroupoidModel, values: Vec<C64>) -> Result<Self> {
        supported(&model)?;
        if values.len() != grid_len(&model) {
            return Err(GrpdError::Shape(format!(
                "test function has {} values, grid needs {}",
                values.len(),
                grid_len(&model)
            )));
        }
        Ok(Self { model, values })
    }

    /// Samples `f` at the grid coordinates (`k/n` per axis).
    pub fn from_fn(model: GroupoidModel, f: impl Fn(&[f64]) -> C64) -> Result<Self> {
        supported(&model)?;
        let n = model.n;
        let nf = n as f64;
        let values = match model.kind {
            ModelKind::PairCircle => (0..n * n)
                .map(|i| f(&[(i / n) as f64 / nf, (i % n) as f64 / nf]))
                .collect(),
            _ => (0..n).map(|i| f(&[i as f64 / nf])).collect(),
        };
        Self::new(model, values)
    }

    pub fn into_distribution(self) -> Distribution {
        Distribution {
            model: self.model,
            smooth: Some(self.values),
            layers: vec![],
            atoms: vec![],
            label: "test-function".into(),
        }
    }
}

/// Layer on the graph `{(x, x − θ)}` (pair model) or at the point `θ` (group model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub section: usize,
    pub coeffs: Vec<C64>,
    pub fiber_order: usize,
}

impl Layer {
    pub fn has_constant_coeffs(&self) -> bool {
        self.coeffs.iter().all(|c| *c == self.coeffs[0])
    }
}

/// Grid point mass on the pair model, stored as an indicator of value `weight`.
/// It is not transversal to either anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: Vec<usize>,
    pub weight: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub model: GroupoidModel,
    pub smooth: Option<Vec<C64>>,
    pub layers: Vec<Layer>,
    pub atoms: Vec<Atom>,
    pub label: String,
}

impl Distribution {
    pub fn zero(model: GroupoidModel) -> Result<Self> {
        supported(&model)?;
        Ok(Self { model, smooth: None, layers: vec![], atoms: vec![], label: "0".into() })
    }

    pub fn smooth(model: GroupoidModel, values: Vec<C64>, label: &str) -> Result<Self> {
        let f = TestFunction::new(model, values)?;
        Ok(Self { label: label.into(), ..f.into_distribution() })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    /// Smooth and layer parts are transversal by construction; grid point
    /// masses are not. Every distribution on the circle group is transversal.
    pub fn is_transversal(&self, _which: Anchor) -> bool {
        self.model.kind == ModelKind::CircleGroup || self.atoms.is_empty()
    }

    /// Dense grid part: smooth values plus atom indicators.
    pub fn dense_part(&self) -> Vec<C64> {
        let n = self.n();
        let mut v = self.smooth.clone().unwrap_or_else(|| vec![ZERO; grid_len(&self.model)]);
        for a in &self.atoms {
            v[a.index[0] * n + a.index[1]] += a.weight;
        }
        v
    }

    /// The density grid `M(u)`.
    pub fn materialize(&self) -> Vec<C64> {
        let mut v = self.dense_part();
        if !self.layers.is_empty() {
            let sp = Spectral::new(self.n());
            for l in &self.layers {
                add_layer_density(&self.model, &sp, l, &mut v);
            }
        }
        v
    }

    pub fn add(&self, other: &Distribution) -> Result<Distribution> {
        self.model.require_same(&other.model)?;
        let smooth = match (&self.smooth, &other.smooth) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
        };
        Ok(Distribution {
            model: self.model,
            smooth,
            layers: self.layers.iter().chain(&other.layers).cloned().collect(),
            atoms: self.atoms.iter().chain(&other.atoms).cloned().collect(),
            label: format!("{}+{}", self.label, other.label),
        })
    }

    pub fn scale(&self, s: C64) -> Distribution {
        Distribution {
            model: self.model,
            smooth: self.smooth.as_ref().map(|v| v.iter().map(|x| x * s).collect()),
            layers: self
                .layers
                .iter()
                .map(|l| Layer { coeffs: l.coeffs.iter().map(|c| c * s).collect(), ..l.clone() })
                .collect(),
            atoms: self.atoms.iter().map(|a| Atom { weight: a.weight * s, ..a.clone() }).collect(),
            label: self.label.clone(),
        }
    }

    /// Merges layers with equal `(section, order)` and atoms with equal index;
    /// drops zero layers and atoms.
    pub fn normalized(&self) -> Distribution {
        let mut layers: BTreeMap<(usize, usize), Vec<C64>> = BTreeMap::new();
        for l in &self.layers {
            match layers.get_mut(&(l.section, l.fiber_order)) {
                Some(c) => c.iter_mut().zip(&l.coeffs).for_each(|(a, b)| *a += b),
                None => {
                    layers.insert((l.section, l.fiber_order), l.coeffs.clone());
                }
            }
        }
        let mut atoms: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
        for a in &self.atoms {
            *atoms.entry(a.index.clone()).or_insert(ZERO) += a.weight;
        }
        Distribution {
            model: self.model,
            smooth: self.smooth.clone(),
            layers: layers
                .into_iter()
                .filter(|(_, c)| c.iter().any(|v| *v != ZERO))
                .map(|((section, fiber_order), coeffs)| Layer { section, coeffs, fiber_order })
                .collect(),
            atoms: atoms
                .into_iter()
                .filter(|(_, w)| *w != ZERO)
                .map(|(index, weight)| Atom { index, weight })
                .collect(),
            label: self.label.clone(),
        }
    }

    /// Structural distance: layers with a common `(section, order)` are compared
    /// by coefficients, everything else through the density grid.
    pub fn distance(&self, other: &Distribution) -> Result<f64> {
        self.model.require_same(&other.model)?;
        let (a, b) = (self.normalized(), other.normalized());
        let key = |l: &Layer| (l.section, l.fiber_order);
        let bmap: BTreeMap<_, &Layer> = b.layers.iter().map(|l| (key(l), l)).collect();
        let amap: BTreeMap<_, &Layer> = a.layers.iter().map(|l| (key(l), l)).collect();
        let mut worst: f64 = 0.0;
        let mut rest_a = Distribution { layers: vec![], ..a.clone() };
        let mut rest_b = Distribution { layers: vec![], ..b.clone() };
        for l in &a.layers {
            match bmap.get(&key(l)) {
                Some(m) => {
                    for (p, q) in l.coeffs.iter().zip(&m.coeffs) {
                        worst = worst.max((p - q).norm());
                    }
                }
                None => rest_a.layers.push(l.clone()),
            }
        }
        for l in &b.layers {
            if !amap.contains_key(&key(l)) {
                rest_b.layers.push(l.clone());
            }
        }
        let (ma, mb) = (rest_a.materialize(), rest_b.materialize());
        Ok(worst.max(crate::grid::max_diff(&ma, &mb)))
    }
}

/// Adds the density of a layer to a grid.
pub(crate) fn add_layer_density(model: &GroupoidModel, sp: &Spectral, l: &Layer, v: &mut [C64]) {
    let n = model.n;
    let nf = n as f64;
    let d = sp.deriv_stencil(l.fiber_order);
    match model.kind {
        ModelKind::PairCircle => {
            for x in 0..n {
                let cx = l.coeffs[x] * nf;
                if cx == ZERO {
                    continue;
                }
                for y in 0..n {
                    v[x * n + y] += cx * d[(y + l.section + n - x) % n];
                }
            }
        }
        _ => {
            let c = l.coeffs[0] * nf;
            for y in 0..n {
                v[y] += c * d[(y + n - l.section) % n];
            }
        }
    }
}

/// `make_layer` with validation of section, coefficient shape and order cap.
pub fn make_layer(
    model: GroupoidModel,
    section: usize,
    coeffs: Vec<C64>,
    fiber_order: usize,
) -> Result<Distribution> {
    supported(&model)?;
    if fiber_order > MAX_ORDER {
        return Err(GrpdError::OrderCap(fiber_order));
    }
    if section >= model.n {
        return Err(GrpdError::Domain(format!("section {section} outside the {}-grid", model.n)));
    }
    let want = if model.kind == ModelKind::PairCircle { model.n } else { 1 };
    if coeffs.len() != want {
        return Err(GrpdError::Shape(format!("layer needs {want} coefficients, got {}", coeffs.len())));
    }
    Ok(Distribution {
        model,
        smooth: None,
        layers: vec![Layer { section, coeffs, fiber_order }],
        atoms: vec![],
        label: format!("layer(θ={section},k={fiber_order})"),
    })
}

/// Point mass. On the pair model it is the grid indicator (quadrature weight
/// `1/n²`); on the circle group it is the order-0 layer `f ↦ weight·f(a)`.
pub fn point_mass(model: GroupoidModel, idx: &[usize], weight: C64) -> Result<Distribution> {
    supported(&model)?;
    if idx.len() != model.dim() || idx.iter().any(|&i| i >= model.n) {
        return Err(GrpdError::Domain(format!("point {idx:?} is not on the grid")));
    }
    if model.kind == ModelKind::CircleGroup {
        return Ok(make_layer(model, idx[0], vec![weight], 0)?.with_label(format!("δ_{}", idx[0])));
    }
    Ok(Distribution {
        model,
        smooth: None,
        layers: vec![],
        atoms: vec![Atom { index: idx.to_vec(), weight }],
        label: format!("point({},{})", idx[0], idx[1]),
    })
}

/// The convolution unit: the unit-section layer on the pair model, `δ_0` on the group.
pub fn unit_delta(model: GroupoidModel) -> Result<Distribution> {
    supported(&model)?;
    let want = if model.kind == ModelKind::PairCircle { model.n } else { 1 };
    Ok(make_layer(model, 0, vec![C64::new(1.0, 0.0); want], 0)?.with_label("δ"))
}

fn check_pair(u: &Distribution, f: &TestFunction) -> Result<()> {
    u.model.require_same(&f.model)?;
    supported(&u.model)
}

/// `⟨u, f⟩`.
pub fn pair(u: &Distribution, f: &TestFunction) -> Result<C64> {
    check_pair(u, f)?;
    let n = u.n();
    let nf = n as f64;
    let dim = u.model.dim() as i32;
    let mut acc = ZERO;
    if let Some(s) = &u.smooth {
        acc += s.iter().zip(&f.values).map(|(a, b)| a * b).sum::<C64>() / nf.powi(dim);
    }
    for a in &u.atoms {
        acc += a.weight * f.values[a.index[0] * n + a.index[1]] / (nf * nf);
    }
    if !u.layers.is_empty() {
        let sp = Spectral::new(n);
        for l in &u.layers {
            let d = sp.deriv_stencil(l.fiber_order);
            let sign = if l.fiber_order % 2 == 0 { 1.0 } else { -1.0 };
            match u.model.kind {
                ModelKind::PairCircle => {
                    let mut s = ZERO;
                    for x in 0..n {
                        let row = &f.values[x * n..(x + 1) * n];
                        s += l.coeffs[x] * stencil_at(&d, row, (x + n - l.section) % n);
                    }
                    acc += s * sign / nf;
                }
                _ => acc += l.coeffs[0] * sign * stencil_at(&d, &f.values, l.section),
            }
        }
    }
    Ok(acc)
}

/// `(D^k v)(a) = Σ_j d(a − j) v(j)`.
pub(crate) fn stencil_at(d: &[C64], v: &[C64], a: usize) -> C64 {
    let n = v.len();
    let mut s = ZERO;
    for (j, vj) in v.iter().enumerate() {
        s += d[(a + n - j) % n] * vj;
    }
    s
}

/// `x ↦ ⟨u restricted to the fiber over x, f⟩`; on the group the base is a point.
pub fn pushforward_base(u: &Distribution, f: &TestFunction, which: Anchor) -> Result<Vec<C64>> {
    check_pair(u, f)?;
    if u.model.kind == ModelKind::CircleGroup {
        return Ok(vec![pair(u, f)?]);
    }
    let n = u.n();
    let fv = |x: usize, y: usize| f.values[x * n + y];
    let table = stencil_table(n, MAX_ORDER);
    let out = (0..n)
        .map(|b| {
            let fd = slice_family(u, b, which);
            let g: Vec<C64> = match which {
                Anchor::AlongR => (0..n).map(|y| fv(b, y)).collect(),
                Anchor::AlongS => (0..n).map(|x| fv(x, b)).collect(),
            };
            fd.pair_with(&g, &table)
        })
        .collect();
    Ok(out)
}

/// Point mass `g ↦ (−1)^k D^k[profile·g](index)` in a fiber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberMass {
    pub index: usize,
    pub order: usize,
    pub profile: Vec<C64>,
}

/// The family member `u_x` on the fiber over a base point.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberDistribution {
    pub model: GroupoidModel,
    pub base: usize,
    pub which: Anchor,
    pub values: Vec<C64>,
    pub masses: Vec<FiberMass>,
}

impl FiberDistribution {
    pub fn pair(&self, g: &[C64]) -> C64 {
        let max = self.masses.iter().map(|m| m.order).max().unwrap_or(0);
        self.pair_with(g, &stencil_table(self.values.len(), max))
    }

    /// `pair` with precomputed derivative stencils (`table[k] = d_k`).
    pub fn pair_with(&self, g: &[C64], table: &[Vec<C64>]) -> C64 {
        let n = self.values.len();
        let mut acc = self.values.iter().zip(g).map(|(a, b)| a * b).sum::<C64>() / n as f64;
        for m in &self.masses {
            let d = &table[m.order];
            let mut s = ZERO;
            for (j, (p, v)) in m.profile.iter().zip(g).enumerate() {
                s += d[(m.index + n - j) % n] * p * v;
            }
            let sign = if m.order % 2 == 0 { 1.0 } else { -1.0 };
            acc += s * sign;
        }
        acc
    }
}

/// `slice_family` at a unit of the pair model (or the single unit of the group).
pub fn slice_at(u: &Distribution, x: &Unit, which: Anchor) -> Result<FiberDistribution> {
    u.model.require_same(x.model())?;
    supported(&u.model)?;
    let b = x.indices().first().copied().unwrap_or(0);
    Ok(slice_family(u, b, which))
}

/// Fiber over base index `b`: the row `{(b, ·)}` along `r`, the column `{(·, b)}` along `s`.
pub fn slice_family(u: &Distribution, b: usize, which: Anchor) -> FiberDistribution {
    let n = u.n();
    if u.model.kind == ModelKind::CircleGroup {
        return FiberDistribution {
            model: u.model,
            base: 0,
            which,
            values: u.smooth.clone().unwrap_or_else(|| vec![ZERO; n]),
            masses: u
                .layers
                .iter()
                .map(|l| FiberMass { index: l.section, order: l.fiber_order, profile: vec![l.coeffs[0]; n] })
                .collect(),
        };
    }
    let dense = u.dense_part();
    let (values, masses) = match which {
        Anchor::AlongR => (
            dense[b * n..(b + 1) * n].to_vec(),
            u.layers
                .iter()
                .map(|l| FiberMass {
                    index: (b + n - l.section) % n,
                    order: l.fiber_order,
                    profile: vec![l.coeffs[b]; n],
                })
                .collect(),
        ),
        Anchor::AlongS => (
            (0..n).map(|x| dense[x * n + b]).collect(),
            u.layers
                .iter()
                .map(|l| {
                    let sign = if l.fiber_order % 2 == 0 { 1.0 } else { -1.0 };
                    FiberMass {
                        index: (b + l.section) % n,
                        order: l.fiber_order,
                        profile: l.coeffs.iter().map(|c| c * sign).collect(),
                    }
                })
                .collect(),
        ),
    };
    FiberDistribution { model: u.model, base: b, which, values, masses }
}

/// One term of `u1 ×_π u2` on the composable pairs.
#[derive(Clone, Debug, PartialEq)]
pub enum PairTerm {
    /// Sampled values on the composable-pair grid: `(x, y, z)` on the pair
    /// model, `(g1, g2)` on the group.
    Dense(Vec<C64>),
    LayerDense(Layer, Vec<C64>),
    DenseLayer(Vec<C64>, Layer),
    LayerLayer(Layer, Layer),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComposablePair {
    pub model: GroupoidModel,
    pub terms: Vec<PairTerm>,
}

/// `ρ^*(u1 ⊗ u2)`: dense factors are sampled, layer factors restrict symbolically.
pub fn tensor_restrict(u1: &Distribution, u2: &Distribution) -> Result<ComposablePair> {
    u1.model.require_same(&u2.model)?;
    supported(&u1.model)?;
    let n = u1.n();
    let (d1, d2) = (u1.dense_part(), u2.dense_part());
    let (z1, z2) = (d1.iter().all(|v| *v == ZERO), d2.iter().all(|v| *v == ZERO));
    let mut terms = Vec::new();
    if !z1 && !z2 {
        let dense = match u1.model.kind {
            ModelKind::PairCircle => {
                let mut t = vec![ZERO; n * n * n];
                for x in 0..n {
                    for y in 0..n {
                        let a = d1[x * n + y];
                        if a == ZERO {
                            continue;
                        }
                        let base = (x * n + y) * n;
                        for z in 0..n {
                            t[base + z] = a * d2[y * n + z];
                        }
                    }
                }
                t
            }
            _ => {
                let mut t = vec![ZERO; n * n];
                for g1 in 0..n {
                    for g2 in 0..n {
                        t[g1 * n + g2] = d1[g1] * d2[g2];
                    }
                }
                t
            }
        };
        terms.push(PairTerm::Dense(dense));
    }
    for l in &u1.layers {
        if !z2 {
            terms.push(PairTerm::LayerDense(l.clone(), d2.clone()));
        }
    }
    for l in &u2.layers {
        if !z1 {
            terms.push(PairTerm::DenseLayer(d1.clone(), l.clone()));
        }
    }
    for l1 in &u1.layers {
        for l2 in &u2.layers {
            terms.push(PairTerm::LayerLayer(l1.clone(), l2.clone()));
        }
    }
    Ok(ComposablePair { model: u1.model, terms })
}

fn layer_dist(model: GroupoidModel, l: Layer) -> Distribution {
    Distribution { model, smooth: None, layers: vec![l], atoms: vec![], label: String::new() }
}

/// `m_*` of a composable-pair distribution, evaluated fiberwise.
pub fn push_multiplication(cp: &ComposablePair) -> Result<Distribution> {
    let model = cp.model;
    let n = model.n;
    let nf = n as f64;
    let group = model.kind == ModelKind::CircleGroup;
    let mut dense = vec![ZERO; grid_len(&model)];
    let mut layers = Vec::new();
    let sp = Spectral::new(n);
    let table = stencil_table(n, MAX_ORDER);
    for t in &cp.terms {
        match t {
            PairTerm::Dense(v) if group => {
                for g1 in 0..n {
                    for g in 0..n {
                        dense[g] += v[g1 * n + (g + n - g1) % n] / nf;
                    }
                }
            }
            PairTerm::Dense(v) => {
                for x in 0..n {
                    for y in 0..n {
                        let base = (x * n + y) * n;
                        for z in 0..n {
                            dense[x * n + z] += v[base + z] / nf;
                        }
                    }
                }
            }
            PairTerm::LayerDense(l, v) if group => {
                let d = sp.deriv_stencil(l.fiber_order);
                let dv = crate::spectral::circulant_apply(&d, v);
                for g in 0..n {
                    dense[g] += l.coeffs[0] * dv[(g + n - l.section) % n];
                }
            }
            PairTerm::LayerDense(l, v) => {
                let u = layer_dist(model, l.clone());
                for x in 0..n {
                    let fx = slice_family(&u, x, Anchor::AlongR);
                    for z in 0..n {
                        let col: Vec<C64> = (0..n).map(|y| v[y * n + z]).collect();
                        dense[x * n + z] += fx.pair_with(&col, &table);
                    }
                }
            }
            PairTerm::DenseLayer(v, l) if group => {
                let d = sp.deriv_stencil(l.fiber_order);
                let dv = crate::spectral::circulant_apply(&d, v);
                for g in 0..n {
                    dense[g] += l.coeffs[0] * dv[(g + n - l.section) % n];
                }
            }
            PairTerm::DenseLayer(v, l) => {
                let u = layer_dist(model, l.clone());
                for z in 0..n {
                    let fz = slice_family(&u, z, Anchor::AlongS);
                    for x in 0..n {
                        dense[x * n + z] += fz.pair_with(&v[x * n..(x + 1) * n], &table);
                    }
                }
            }
            PairTerm::LayerLayer(a, b) => match compose_layers(&model, a, b)? {
                Some(l) => layers.push(l),
                None => {
                    let mut v = vec![ZERO; n * n];
                    add_layer_density(&model, &sp, b, &mut v);
                    let sub = push_multiplication(&ComposablePair {
                        model,
                        terms: vec![PairTerm::LayerDense(a.clone(), v)],
                    })?;
                    dense.iter_mut().zip(sub.dense_part()).for_each(|(p, q)| *p += q);
                }
            },
        }
    }
    let nonzero = dense.iter().any(|v| *v != ZERO);
    Ok(Distribution {
        model,
        smooth: nonzero.then_some(dense),
        layers,
        atoms: vec![],
        label: "m_*".into(),
    })
}

/// Exact layer form of `Λ1 * Λ2` when one exists: always on the group; on the
/// pair model when `Λ1` has order 0 or `Λ2` has constant coefficients.
pub(crate) fn compose_layers(model: &GroupoidModel, a: &Layer, b: &Layer) -> Result<Option<Layer>> {
    let n = model.n;
    let k = a.fiber_order + b.fiber_order;
    if k > MAX_ORDER {
        return Err(GrpdError::OrderCap(k));
    }
    let section = (a.section + b.section) % n;
    if model.kind == ModelKind::CircleGroup {
        return Ok(Some(Layer { section, coeffs: vec![a.coeffs[0] * b.coeffs[0]], fiber_order: k }));
    }
    if a.fiber_order > 0 && !b.has_constant_coeffs() {
        return Ok(None);
    }
    let coeffs = (0..n).map(|x| a.coeffs[x] * b.coeffs[(x + n - a.section) % n]).collect();
    Ok(Some(Layer { section, coeffs, fiber_order: k }))
}

/// `u^⋆ = conj(i^* u)`.
pub fn star_involution(u: &Distribution) -> Distribution {
    let n = u.n();
    let group = u.model.kind == ModelKind::CircleGroup;
    let mut smooth = u.smooth.as_ref().map(|s| {
        if group {
            (0..n).map(|g| s[(n - g) % n].conj()).collect::<Vec<_>>()
        } else {
            let mut t = vec![ZERO; n * n];
            for x in 0..n {
                for y in 0..n {
                    t[y * n + x] = s[x * n + y].conj();
                }
            }
            t
        }
    });
    let atoms = u
        .atoms
        .iter()
        .map(|a| Atom { index: vec![a.index[1], a.index[0]], weight: a.weight.conj() })
        .collect();
    let mut layers = Vec::new();
    let mut rest = Vec::new();
    for l in &u.layers {
        let sign = if l.fiber_order % 2 == 0 { 1.0 } else { -1.0 };
        let section = (n - l.section) % n;
        if group {
            layers.push(Layer { section, coeffs: vec![l.coeffs[0].conj() * sign], fiber_order: l.fiber_order });
        } else if l.fiber_order == 0 {
            let coeffs = (0..n).map(|x| l.coeffs[(x + l.section) % n].conj()).collect();
            layers.push(Layer { section, coeffs, fiber_order: 0 });
        } else if l.has_constant_coeffs() {
            let coeffs = vec![l.coeffs[0].conj() * sign; n];
            layers.push(Layer { section, coeffs, fiber_order: l.fiber_order });
        } else {
            rest.push(l.clone());
        }
    }
    if !rest.is_empty() {
        // no finite layer form: take the adjoint of the density grid
        let sp = Spectral::new(n);
        let mut v = vec![ZERO; n * n];
        for l in &rest {
            add_layer_density(&u.model, &sp, l, &mut v);
        }
        let s = smooth.get_or_insert_with(|| vec![ZERO; n * n]);
        for x in 0..n {
            for y in 0..n {
                s[y * n + x] += v[x * n + y].conj();
            }
        }
    }
    Distribution { model: u.model, smooth, layers, atoms, label: format!("({})⋆", u.label) }
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    model: GroupoidModel,
    label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    smooth: Option<String>,
    layers: Vec<Layer>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    atoms: Vec<Atom>,
}

impl Distribution {
    /// Writes `<stem>.json` (model, label, layers, atoms) and, when a grid part
    /// exists, `<stem>.grpd`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let smooth_name = self.smooth.as_ref().map(|_| format!("{stem}.grpd"));
        if let (Some(s), Some(name)) = (&self.smooth, &smooth_name) {
            Grid::new(self.model.grid_dims(), s.clone())?.write(&dir.join(name))?;
        }
        let meta = DistributionFile {
            model: self.model,
            label: self.label.clone(),
            smooth: smooth_name,
            layers: self.layers.clone(),
            atoms: self.atoms.clone(),
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }

    pub fn read(json_path: &Path) -> Result<Self> {
        let meta: DistributionFile = serde_json::from_str(&std::fs::read_to_string(json_path)?)?;
        supported(&meta.model)?;
        let smooth = match &meta.smooth {
            Some(name) => {
                let dir = json_path.parent().unwrap_or_else(|| Path::new("."));
                let g = Grid::read(&dir.join(name))?;
                if g.dims != meta.model.grid_dims() {
                    return Err(GrpdError::Shape(format!("grid {:?} does not fit the model", g.dims)));
                }
                Some(g.data)
            }
            None => None,
        };
        let mut u = Distribution::zero(meta.model)?;
        for l in meta.layers {
            let m = make_layer(meta.model, l.section, l.coeffs, l.fiber_order)?;
            u.layers.extend(m.layers);
        }
        u.smooth = smooth;
        u.atoms = meta.atoms;
        u.label = meta.label;
        Ok(u)
    }
}

/// Largest modulus of the density grid; a cheap size measure for reports.
pub fn density_max(u: &Distribution) -> f64 {
    max_abs(&u.materialize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn pair64() -> GroupoidModel {
        GroupoidModel::pair_circle(64).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn pairing_of_constants() {
        let m = pair64();
        let u = Distribution::smooth(m, vec![c(1.0); 64 * 64], "1").unwrap();
        let f = TestFunction::from_fn(m, |_| c(1.0)).unwrap();
        assert!((pair(&u, &f).unwrap() - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn unit_layer_pairs_with_the_diagonal() {
        let m = pair64();
        let f = TestFunction::from_fn(m, |p| C64::new((TAU * p[0]).cos() + p[1], p[0] * p[1])).unwrap();
        let want: C64 = (0..64).map(|x| f.values[x * 64 + x]).sum::<C64>() / 64.0;
        let got = pair(&unit_delta(m).unwrap(), &f).unwrap();
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn differentiated_layers_against_analytic_values() {
        let n = 64;
        let m = pair64();
        let theta = 16;
        let t = theta as f64 / n as f64;
        let sin = TestFunction::from_fn(m, |p| c((TAU * p[1]).sin())).unwrap();
        let u1 = make_layer(m, theta, vec![c(1.0); n], 1).unwrap();
        let want: f64 = (0..n).map(|x| -TAU * (TAU * (x as f64 / n as f64 - t)).cos()).sum::<f64>() / n as f64;
        assert!((pair(&u1, &sin).unwrap() - c(want)).norm() < 1e-10);

        let cos = TestFunction::from_fn(m, |p| c((TAU * p[1]).cos() + (TAU * p[0]).cos())).unwrap();
        let u2 = make_layer(m, theta, vec![c(1.0); n], 2).unwrap();
        let want2: f64 =
            (0..n).map(|x| -TAU * TAU * (TAU * (x as f64 / n as f64 - t)).cos()).sum::<f64>() / n as f64;
        assert!((pair(&u2, &cos).unwrap() - c(want2)).norm() < 1e-9);
        assert!(matches!(make_layer(m, 0, vec![c(1.0); n], 5), Err(GrpdError::OrderCap(5))));
    }

    #[test]
    fn pairing_matches_the_density_grid() {
        let m = GroupoidModel::pair_circle(32).unwrap();
        let coeffs: Vec<C64> = (0..32).map(|x| C64::new(1.0 + (x as f64 / 5.0).sin(), 0.3)).collect();
        let f = TestFunction::from_fn(m, |p| C64::new((TAU * (p[0] + 2.0 * p[1])).sin(), p[0])).unwrap();
        for k in 0..=3 {
            let u = make_layer(m, 7, coeffs.clone(), k).unwrap();
            let dense = Distribution::smooth(m, u.materialize(), "dense").unwrap();
            let (a, b) = (pair(&u, &f).unwrap(), pair(&dense, &f).unwrap());
            assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()), "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn pushforwards_integrate_to_the_pairing() {
        let m = GroupoidModel::pair_circle(32).unwrap();
        let mut u = make_layer(m, 5, (0..32).map(|x| c(1.0 + x as f64 / 32.0)).collect(), 1).unwrap();
        u.smooth = Some((0..32 * 32).map(|i| c((i as f64 * 0.37).sin())).collect());
        u.atoms.push(Atom { index: vec![3, 9], weight: c(2.0) });
        let f = TestFunction::from_fn(m, |p| C64::new((TAU * p[0]).sin() * p[1], 1.0)).unwrap();
        let total = pair(&u, &f).unwrap();
        for which in [Anchor::AlongR, Anchor::AlongS] {
            let pf = pushforward_base(&u, &f, which).unwrap();
            let s: C64 = pf.iter().sum::<C64>() / 32.0;
            assert!((s - total).norm() < 1e-10);
        }
        let delta = unit_delta(m).unwrap();
        let pf = pushforward_base(&delta, &f, Anchor::AlongS).unwrap();
        for x in 0..32 {
            assert_eq!(pf[x], f.values[x * 32 + x]);
        }
    }

    #[test]
    fn slices_of_layers_are_point_masses() {
        let m = GroupoidModel::pair_circle(16).unwrap();
        let u = make_layer(m, 4, vec![c(1.0); 16], 0).unwrap();
        let fd = slice_family(&u, 6, Anchor::AlongR);
        assert_eq!(fd.masses[0].index, 2);
        let g: Vec<C64> = (0..16).map(|i| c(i as f64)).collect();
        assert_eq!(fd.pair(&g), c(2.0));
        let fs = slice_family(&u, 6, Anchor::AlongS);
        assert_eq!(fs.masses[0].index, 10);
    }

    #[test]
    fn star_examples() {
        let m = GroupoidModel::pair_circle(16).unwrap();
        let d = unit_delta(m).unwrap();
        assert_eq!(star_involution(&d).layers, d.layers);
        let l = make_layer(m, 4, vec![c(1.0); 16], 0).unwrap();
        assert_eq!(star_involution(&l).layers[0].section, 12);
        let s: Vec<C64> = (0..256).map(|i| C64::new(i as f64, (i % 7) as f64)).collect();
        let u = Distribution::smooth(m, s.clone(), "u").unwrap();
        let st = star_involution(&u);
        assert_eq!(st.smooth.as_ref().unwrap()[3 * 16 + 5], s[5 * 16 + 3].conj());
        // involution is exact, including the densified case
        let rough = make_layer(m, 3, (0..16).map(|x| C64::new(x as f64, 1.0)).collect(), 2).unwrap();
        for v in [&u, &l, &rough] {
            let back = star_involution(&star_involution(v));
            assert!(back.distance(v).unwrap() < 1e-9);
        }
        let ll = star_involution(&star_involution(&l));
        assert_eq!(ll.layers, l.layers);
    }

    #[test]
    fn tensor_restriction_of_rank_one_kernels() {
        let n = 8;
        let m = GroupoidModel::pair_circle(n).unwrap();
        let fx = |i: usize| c(1.0 + i as f64);
        let gy = |i: usize| c((i as f64).cos());
        let u1 = Distribution::smooth(m, (0..n * n).map(|i| fx(i / n) * gy(i % n)).collect(), "").unwrap();
        let u2 = Distribution::smooth(m, (0..n * n).map(|i| gy(i / n) * fx(i % n)).collect(), "").unwrap();
        let cp = tensor_restrict(&u1, &u2).unwrap();
        let PairTerm::Dense(t) = &cp.terms[0] else { panic!("dense term expected") };
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let want = fx(x) * gy(y) * gy(y) * fx(z);
                    assert!((t[(x * n + y) * n + z] - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn json_sidecar_round_trip() {
        let dir = std::env::temp_dir().join(format!("grpd-dist-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let m = GroupoidModel::pair_circle(8).unwrap();
        let mut u = make_layer(m, 3, (0..8).map(|x| C64::new(0.1 * x as f64, 1.0 / 3.0)).collect(), 2).unwrap();
        u.smooth = Some((0..64).map(|i| C64::new((i as f64).sqrt(), -1e-300)).collect());
        u.atoms.push(Atom { index: vec![1, 2], weight: c(0.7) });
        u.write(&dir, "u").unwrap();
        let back = Distribution::read(&dir.join("u.json")).unwrap();
        assert_eq!(back, u);
        let first = std::fs::read(dir.join("u.json")).unwrap();
        back.write(&dir, "u").unwrap();
        assert_eq!(std::fs::read(dir.join("u.json")).unwrap(), first);
        std::fs::remove_dir_all(&dir).ok();
    }
}
