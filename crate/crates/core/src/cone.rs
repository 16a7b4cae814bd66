//! Conic subsets of T*G∖0 as finite unions of cells.
//!
//! A cell is a box of grid points on the base (one closed circle interval per
//! coordinate) times a set of covector directions: signs in dimension 1,
//! arcs of `[0, 2π)` in dimension 2 and spherical caps in dimension 3.
//! All products are over-approximations of the exact cone products.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GrpdError, Result};
use crate::models::{GroupoidModel, ModelKind};

const ANG_EPS: f64 = 1e-12;

/// Angular sampling step used for the 3-D (sampled) cone products.
pub const SAMPLED_STEP: f64 = TAU / 64.0;

/// Closed interval `{start, start+1, …, start+len−1}` of a cyclic grid of size `modulus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CircInterval {
    pub start: usize,
    pub len: usize,
    pub modulus: usize,
}

impl CircInterval {
    pub fn new(start: usize, len: usize, modulus: usize) -> Self {
        assert!(modulus > 0 && len > 0, "empty circle interval");
        if len >= modulus {
            Self { start: 0, len: modulus, modulus }
        } else {
            Self { start: start % modulus, len, modulus }
        }
    }

    pub fn point(k: usize, modulus: usize) -> Self {
        Self::new(k, 1, modulus)
    }

    pub fn full(modulus: usize) -> Self {
        Self::new(0, modulus, modulus)
    }

    pub fn is_full(&self) -> bool {
        self.len == self.modulus
    }

    pub fn contains(&self, k: usize) -> bool {
        (k % self.modulus + self.modulus - self.start) % self.modulus < self.len
    }

    pub fn intersects(&self, o: &CircInterval) -> bool {
        self.contains(o.start) || o.contains(self.start)
    }

    /// Grows by `k` grid points on each side.
    pub fn dilate(&self, k: usize) -> Self {
        let m = self.modulus;
        Self::new((self.start + m * (k / m + 1) - k) % m, self.len + 2 * k, m)
    }

    /// `{a + b : a ∈ self, b ∈ o}`.
    pub fn minkowski_sum(&self, o: &CircInterval) -> Self {
        Self::new(self.start + o.start, self.len + o.len - 1, self.modulus)
    }

    pub fn negate(&self) -> Self {
        let m = self.modulus;
        let last = self.start + self.len - 1;
        Self::new((m - last % m) % m, self.len, m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).map(move |i| (self.start + i) % self.modulus)
    }

    fn to_json(self) -> [f64; 2] {
        let m = self.modulus as f64;
        if self.is_full() {
            [0.0, 1.0]
        } else {
            [self.start as f64 / m, ((self.start + self.len - 1) % self.modulus) as f64 / m]
        }
    }

    fn from_json(v: [f64; 2], modulus: usize) -> Result<Self> {
        let m = modulus as f64;
        if v[0] == 0.0 && v[1] == 1.0 {
            return Ok(Self::full(modulus));
        }
        let idx = |x: f64| -> Result<usize> {
            let k = x * m;
            if !(0.0..1.0).contains(&x) || (k - k.round()).abs() > 1e-9 {
                return Err(GrpdError::Format(format!("base bound {x} is not a grid value")));
            }
            Ok(k.round() as usize)
        };
        let (lo, hi) = (idx(v[0])?, idx(v[1])?);
        let len = (hi + modulus - lo) % modulus + 1;
        Ok(Self::new(lo, len, modulus))
    }
}

/// Arc from `lo` counter-clockwise to `hi`, both in `[0, 2π)`; each endpoint may
/// be open or closed. The full circle is `lo = 0, hi = 2π`.
///
/// Open endpoints matter: composing `(1, 0)` with `(0, 1)` yields the open
/// quadrant between them, whose closure would touch both kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

fn norm_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl Arc {
    pub fn full() -> Self {
        Arc { lo: 0.0, hi: TAU, lo_open: false, hi_open: false }
    }

    pub fn point(a: f64) -> Self {
        let a = norm_angle(a);
        Arc { lo: a, hi: a, lo_open: false, hi_open: false }
    }

    /// Closed arc starting at `lo` with angular `width`.
    pub fn span(lo: f64, width: f64) -> Self {
        Self::span_with(lo, width, false, false)
    }

    pub fn span_with(lo: f64, width: f64, lo_open: bool, hi_open: bool) -> Self {
        if width >= TAU - ANG_EPS {
            return Self::full();
        }
        let width = width.max(0.0);
        let degenerate = width <= ANG_EPS;
        Arc {
            lo: norm_angle(lo),
            hi: norm_angle(lo + width),
            lo_open: lo_open && !degenerate,
            hi_open: hi_open && !degenerate,
        }
    }

    pub fn is_full(&self) -> bool {
        self.lo == 0.0 && self.hi == TAU
    }

    pub fn width(&self) -> f64 {
        if self.is_full() {
            TAU
        } else {
            (self.hi - self.lo).rem_euclid(TAU)
        }
    }

    fn offset(&self, a: f64) -> f64 {
        let d = (a - self.lo).rem_euclid(TAU);
        if d > TAU - ANG_EPS {
            0.0
        } else {
            d
        }
    }

    pub fn contains(&self, a: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let (d, w) = (self.offset(a), self.width());
        if d <= ANG_EPS {
            !self.lo_open
        } else if (d - w).abs() <= ANG_EPS {
            !self.hi_open
        } else {
            d < w
        }
    }

    /// Whether `a` lies strictly inside the arc.
    pub fn contains_interior(&self, a: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let d = self.offset(a);
        d > ANG_EPS && d < self.width() - ANG_EPS
    }

    pub fn contains_arc(&self, o: &Arc) -> bool {
        if self.is_full() {
            return true;
        }
        if o.is_full() {
            return false;
        }
        let d = self.offset(o.lo);
        let (w, wo) = (self.width(), o.width());
        if d + wo > w + ANG_EPS {
            return false;
        }
        let lo_ok = d > ANG_EPS || !self.lo_open || o.lo_open;
        let hi_ok = (d + wo - w).abs() > ANG_EPS || !self.hi_open || o.hi_open;
        lo_ok && hi_ok
    }

    /// Closed arc grown by `tol` on both sides.
    pub fn dilate(&self, tol: f64) -> Self {
        if self.is_full() {
            return *self;
        }
        Self::span(self.lo - tol, self.width() + 2.0 * tol)
    }

    pub fn closure(&self) -> Self {
        Arc { lo_open: false, hi_open: false, ..*self }
    }

    pub fn mid(&self) -> f64 {
        norm_angle(self.lo + self.width() / 2.0)
    }

    /// Pieces of this arc inside the closed window `[w0, w0 + width]`, in
    /// window-local angles, with open flags.
    fn pieces_in(&self, w0: f64, width: f64) -> Vec<Piece> {
        if self.is_full() {
            return vec![Piece { lo: 0.0, hi: width, lo_open: false, hi_open: false }];
        }
        let d = (self.lo - w0).rem_euclid(TAU);
        let wa = self.width();
        let mut out = Vec::new();
        for shift in [d - TAU, d] {
            let (lo, lo_open) = if shift >= 0.0 { (shift, self.lo_open) } else { (0.0, false) };
            let end = shift + wa;
            let (hi, hi_open) = if end <= width { (end, self.hi_open) } else { (width, false) };
            if lo < hi - ANG_EPS || (lo <= hi + ANG_EPS && !lo_open && !hi_open) {
                out.push(Piece { lo, hi: hi.max(lo), lo_open, hi_open });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
}

/// Merges arcs into a canonical sorted list of disjoint arcs. Arcs that only
/// touch at a point missing from both stay separate.
pub fn merge_arcs(arcs: &[Arc]) -> Vec<Arc> {
    if arcs.iter().any(Arc::is_full) {
        return vec![Arc::full()];
    }
    // (lo, hi, lo_open, hi_open) on the line, hi may exceed 2π
    let mut iv: Vec<(f64, f64, bool, bool)> =
        arcs.iter().map(|a| (a.lo, a.lo + a.width(), a.lo_open, a.hi_open)).collect();
    if iv.is_empty() {
        return vec![];
    }
    iv.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.2.cmp(&b.2))
    });
    let joins = |last: &(f64, f64, bool, bool), next: &(f64, f64, bool, bool)| {
        next.0 < last.1 - ANG_EPS || (next.0 <= last.1 + ANG_EPS && !(last.3 && next.2))
    };
    let extend = |last: &mut (f64, f64, bool, bool), next: &(f64, f64, bool, bool)| {
        if next.1 > last.1 + ANG_EPS {
            last.1 = next.1;
            last.3 = next.3;
        } else if (next.1 - last.1).abs() <= ANG_EPS {
            last.3 = last.3 && next.3;
        }
    };
    let mut merged: Vec<(f64, f64, bool, bool)> = Vec::new();
    for cur in iv {
        match merged.last_mut() {
            Some(last) if joins(last, &cur) => extend(last, &cur),
            _ => merged.push(cur),
        }
    }
    // wrap-around: the tail may reach past 2π into the leading arcs
    while merged.len() > 1 {
        let last = *merged.last().unwrap();
        let first = merged[0];
        let shifted = (first.0 + TAU, first.1 + TAU, first.2, first.3);
        if joins(&last, &shifted) {
            merged.remove(0);
            extend(merged.last_mut().unwrap(), &shifted);
        } else {
            break;
        }
    }
    if merged.len() == 1 {
        let (lo, hi, lo_open, hi_open) = merged[0];
        let covers = hi - lo > TAU + ANG_EPS
            || (hi - lo >= TAU - ANG_EPS && !(lo_open && hi_open));
        if covers {
            return vec![Arc::full()];
        }
    }
    let mut out: Vec<Arc> =
        merged.into_iter().map(|(lo, hi, lo_open, hi_open)| Arc::span_with(lo, hi - lo, lo_open, hi_open)).collect();
    out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(Ordering::Equal));
    out
}

/// Spherical cap: all unit vectors within angle `radius` of `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cap {
    pub center: [f64; 3],
    pub radius: f64,
}

fn norm3(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < 1e-300 {
        None
    } else {
        Some([v[0] / n, v[1] / n, v[2] / n])
    }
}

fn angle3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    d.acos()
}

impl Cap {
    pub fn new(center: [f64; 3], radius: f64) -> Result<Self> {
        let c = norm3(center).ok_or_else(|| GrpdError::Domain("cap center is zero".into()))?;
        Ok(Cap { center: c, radius: radius.clamp(0.0, PI) })
    }

    pub fn full() -> Self {
        Cap { center: [0.0, 0.0, 1.0], radius: PI }
    }

    pub fn contains(&self, v: &[f64; 3]) -> bool {
        angle3(&self.center, v) <= self.radius + ANG_EPS
    }

    /// Whether the cap meets the great circle `{v : v[axis] = 0}`.
    pub fn meets_plane(&self, axis: usize) -> bool {
        self.center[axis].abs().clamp(0.0, 1.0).asin() <= self.radius + ANG_EPS
    }
}

/// Direction part of a cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Directions {
    Signs { plus: bool, minus: bool },
    Arcs(Vec<Arc>),
    Caps(Vec<Cap>),
}

impl Directions {
    pub fn is_empty(&self) -> bool {
        match self {
            Directions::Signs { plus, minus } => !plus && !minus,
            Directions::Arcs(a) => a.is_empty(),
            Directions::Caps(c) => c.is_empty(),
        }
    }

    pub fn full(dim: usize) -> Self {
        match dim {
            1 => Directions::Signs { plus: true, minus: true },
            2 => Directions::Arcs(vec![Arc::full()]),
            _ => Directions::Caps(vec![Cap::full()]),
        }
    }

    pub fn arcs(&self) -> &[Arc] {
        match self {
            Directions::Arcs(a) => a,
            _ => &[],
        }
    }

    pub fn caps(&self) -> &[Cap] {
        match self {
            Directions::Caps(c) => c,
            _ => &[],
        }
    }

    pub fn contains_angle(&self, a: f64) -> bool {
        self.arcs().iter().any(|arc| arc.contains(a))
    }

    /// Whether the direction of the covector `v` belongs to the set.
    pub fn contains_covector(&self, v: &[f64]) -> bool {
        match self {
            Directions::Signs { plus, minus } => (v[0] > 0.0 && *plus) || (v[0] < 0.0 && *minus),
            Directions::Arcs(a) => {
                if v[0] == 0.0 && v[1] == 0.0 {
                    return false;
                }
                let ang = norm_angle(v[1].atan2(v[0]));
                a.iter().any(|arc| arc.contains(ang))
            }
            Directions::Caps(c) => match norm3([v[0], v[1], v[2]]) {
                Some(u) => c.iter().any(|cap| cap.contains(&u)),
                None => false,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeCell {
    pub base: Vec<CircInterval>,
    pub dirs: Directions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeSet {
    pub model: GroupoidModel,
    pub cells: Vec<ConeCell>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Transversality {
    RTransversal,
    STransversal,
    BiTransversal,
}

fn cell_key(c: &ConeCell) -> Vec<usize> {
    c.base.iter().flat_map(|b| [b.start, b.len]).collect()
}

impl ConeSet {
    pub fn empty(model: GroupoidModel) -> Self {
        ConeSet { model, cells: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn new(model: GroupoidModel, cells: Vec<ConeCell>) -> Result<Self> {
        model.require_grid()?;
        let dims = model.grid_dims();
        for c in &cells {
            if c.base.len() != dims.len()
                || c.base.iter().zip(&dims).any(|(b, &d)| b.modulus != d)
            {
                return Err(GrpdError::Shape("cell base box does not match the model grid".into()));
            }
            let ok = matches!(
                (&c.dirs, dims.len()),
                (Directions::Signs { .. }, 1) | (Directions::Arcs(_), 2) | (Directions::Caps(_), 3)
            );
            if !ok {
                return Err(GrpdError::Shape("direction type does not match dim G".into()));
            }
        }
        Ok(ConeSet { model, cells }.normalized())
    }

    /// Prunes empty cells, merges cells sharing a base box and sorts them.
    pub fn normalized(mut self) -> Self {
        self.cells.retain(|c| !c.dirs.is_empty());
        self.cells.sort_by_key(cell_key);
        let mut out: Vec<ConeCell> = Vec::with_capacity(self.cells.len());
        for c in self.cells {
            match out.last_mut() {
                Some(last) if last.base == c.base => merge_dirs(&mut last.dirs, c.dirs),
                _ => out.push(c),
            }
        }
        for c in &mut out {
            if let Directions::Arcs(a) = &mut c.dirs {
                *a = merge_arcs(a);
            }
            if let Directions::Caps(caps) = &mut c.dirs {
                caps.sort_by(|a, b| {
                    (a.center, a.radius).partial_cmp(&(b.center, b.radius)).unwrap_or(Ordering::Equal)
                });
                caps.dedup();
            }
        }
        ConeSet { model: self.model, cells: out }
    }

    pub fn union(&self, other: &ConeSet) -> Result<ConeSet> {
        self.model.require_same(&other.model)?;
        let mut cells = self.cells.clone();
        cells.extend(other.cells.iter().cloned());
        Ok(ConeSet { model: self.model, cells }.normalized())
    }

    /// Whether the covector `v` at grid point `idx` lies in the set.
    pub fn contains_point(&self, idx: &[usize], v: &[f64]) -> bool {
        self.cells.iter().any(|c| {
            c.base.iter().zip(idx).all(|(b, &k)| b.contains(k)) && c.dirs.contains_covector(v)
        })
    }
}

fn merge_dirs(into: &mut Directions, from: Directions) {
    match (into, from) {
        (Directions::Signs { plus, minus }, Directions::Signs { plus: p, minus: m }) => {
            *plus |= p;
            *minus |= m;
        }
        (Directions::Arcs(a), Directions::Arcs(b)) => a.extend(b),
        (Directions::Caps(a), Directions::Caps(b)) => a.extend(b),
        _ => unreachable!("direction kinds follow the model"),
    }
}

// ---- constructors ----

fn diag_dir(model: &GroupoidModel, sign: f64) -> Directions {
    match model.kind {
        ModelKind::PairTimesZ => {
            Directions::Caps(vec![Cap::new([sign, -sign, 0.0], 0.0).expect("nonzero")])
        }
        _ => Directions::Arcs(vec![Arc::point(if sign > 0.0 { 7.0 * PI / 4.0 } else { 3.0 * PI / 4.0 })]),
    }
}

fn conormal_dirs(model: &GroupoidModel) -> Directions {
    let mut d = diag_dir(model, 1.0);
    merge_dirs(&mut d, diag_dir(model, -1.0));
    d
}

/// The conormal cone of the graph `{(x, x − θ)}` (θ in grid steps), i.e. `{(ξ, −ξ)}`.
pub fn rotation_conormal(model: GroupoidModel, theta: usize) -> Result<ConeSet> {
    let n = model.n;
    let cells = match model.kind {
        ModelKind::PairCircle => (0..n)
            .map(|x| ConeCell {
                base: vec![CircInterval::point(x, n), CircInterval::point((x + n - theta % n) % n, n)],
                dirs: conormal_dirs(&model),
            })
            .collect(),
        ModelKind::PairTimesZ => (0..n)
            .map(|x| ConeCell {
                base: vec![
                    CircInterval::point(x, n),
                    CircInterval::point((x + n - theta % n) % n, n),
                    CircInterval::full(model.m_z),
                ],
                dirs: conormal_dirs(&model),
            })
            .collect(),
        _ => return Err(GrpdError::Unsupported("rotation graphs live on pair models".into())),
    };
    ConeSet::new(model, cells)
}

/// A*G∖0 realized in model coordinates.
pub fn a_star_units(model: GroupoidModel) -> Result<ConeSet> {
    match model.kind {
        ModelKind::CircleGroup => point_cone(model, &[0]),
        ModelKind::AffineGroup => {
            Err(GrpdError::Unsupported("cone sets need a grid model".into()))
        }
        _ => rotation_conormal(model, 0),
    }
}

/// All nonzero directions over one grid point.
pub fn point_cone(model: GroupoidModel, idx: &[usize]) -> Result<ConeSet> {
    model.require_grid()?;
    let dims = model.grid_dims();
    if idx.len() != dims.len() {
        return Err(GrpdError::Shape("point index length".into()));
    }
    let base = idx.iter().zip(&dims).map(|(&k, &d)| CircInterval::point(k, d)).collect();
    ConeSet::new(model, vec![ConeCell { base, dirs: Directions::full(dims.len()) }])
}

// ---- transversality and the gate ----

fn cell_meets_kernel(dim: usize, dirs: &Directions, which: Transversality) -> bool {
    // r-transversal: avoid ker s_Γ = {η = 0}; s-transversal: avoid ker r_Γ = {ξ = 0}.
    let check_r = matches!(which, Transversality::RTransversal | Transversality::BiTransversal);
    let check_s = matches!(which, Transversality::STransversal | Transversality::BiTransversal);
    match dim {
        1 => false,
        2 => {
            (check_r && (dirs.contains_angle(0.0) || dirs.contains_angle(PI)))
                || (check_s && (dirs.contains_angle(FRAC_PI_2) || dirs.contains_angle(3.0 * FRAC_PI_2)))
        }
        _ => dirs
            .caps()
            .iter()
            .any(|c| (check_r && c.meets_plane(1)) || (check_s && c.meets_plane(0))),
    }
}

pub fn transversality(w: &ConeSet, which: Transversality) -> bool {
    let dim = w.model.dim();
    !w.cells.iter().any(|c| cell_meets_kernel(dim, &c.dirs, which))
}

/// Whether `W1 × W2` avoids ker m_Γ = N*G^(2).
pub fn hormander_gate(w1: &ConeSet, w2: &ConeSet) -> Result<bool> {
    w1.model.require_same(&w2.model)?;
    match w1.model.kind {
        ModelKind::CircleGroup | ModelKind::AffineGroup => Ok(true),
        ModelKind::PairCircle => {
            for c1 in &w1.cells {
                for c2 in &w2.cells {
                    if !c1.base[1].intersects(&c2.base[0]) {
                        continue;
                    }
                    // ((x,y,0,η), (y,z,−η,0))
                    let up = c1.dirs.contains_angle(FRAC_PI_2) && c2.dirs.contains_angle(PI);
                    let down = c1.dirs.contains_angle(3.0 * FRAC_PI_2) && c2.dirs.contains_angle(0.0);
                    if up || down {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        ModelKind::PairTimesZ => {
            // ((x,y,z,0,η,σ), (y,x',z,−η,0,−σ)), searched on a dilated circle of (η, σ)
            let steps = (TAU / SAMPLED_STEP).ceil() as usize;
            for c1 in &w1.cells {
                for c2 in &w2.cells {
                    if !c1.base[1].intersects(&c2.base[0]) || !c1.base[2].intersects(&c2.base[2]) {
                        continue;
                    }
                    for k in 0..steps {
                        let t = k as f64 * TAU / steps as f64;
                        let (e, s) = (t.cos(), t.sin());
                        let u1 = [0.0, e, s];
                        let u2 = [-e, 0.0, -s];
                        let near = |caps: &[Cap], u: &[f64; 3]| {
                            caps.iter().any(|c| angle3(&c.center, u) <= c.radius + SAMPLED_STEP)
                        };
                        if near(c1.dirs.caps(), &u1) && near(c2.dirs.caps(), &u2) {
                            return Ok(false);
                        }
                    }
                }
            }
            Ok(true)
        }
    }
}

// ---- products ----

/// A closed/open range of reals, possibly unbounded; `*_in` says whether the
/// endpoint value is attained.
#[derive(Clone, Copy, Debug)]
struct Range {
    lo: f64,
    hi: f64,
    lo_in: bool,
    hi_in: bool,
}

fn cot(x: f64) -> f64 {
    if (x - FRAC_PI_2).abs() <= 1e-15 {
        0.0
    } else {
        1.0 / x.tan()
    }
}

/// `cot` over a window-local piece of `[0, π]`; decreasing, unbounded at the ends.
fn cot_range(p: &Piece) -> Range {
    let (hi, hi_in) = if p.lo <= ANG_EPS { (f64::INFINITY, false) } else { (cot(p.lo), !p.lo_open) };
    let (lo, lo_in) =
        if p.hi >= PI - ANG_EPS { (f64::NEG_INFINITY, false) } else { (cot(p.hi), !p.hi_open) };
    Range { lo, hi, lo_in, hi_in }
}

fn negcot_range(p: &Piece) -> Range {
    let r = cot_range(p);
    Range { lo: -r.hi, hi: -r.lo, lo_in: r.hi_in, hi_in: r.lo_in }
}

/// True for the window-endpoint pieces, which stand for η = 0 (handled separately).
fn axis_only(p: &Piece) -> bool {
    p.hi <= ANG_EPS || p.lo >= PI - ANG_EPS
}

fn has_pos(r: Range) -> bool {
    r.hi > 0.0 && (r.lo < r.hi || r.hi_in)
}

fn has_neg(r: Range) -> bool {
    r.lo < 0.0 && (r.lo < r.hi || r.lo_in)
}

fn has_zero(r: Range) -> bool {
    (r.lo < 0.0 && r.hi > 0.0) || (r.lo == 0.0 && r.lo_in) || (r.hi == 0.0 && r.hi_in)
}

/// Directions of the points of the rectangle `ra × rb` as one arc.
fn rect_arc(ra: Range, rb: Range) -> Arc {
    if ra.lo < 0.0 && ra.hi > 0.0 && rb.lo < 0.0 && rb.hi > 0.0 {
        return Arc::full();
    }
    let reps = |r: Range| -> Vec<(f64, bool)> {
        let v: Vec<(f64, bool)> = [(r.lo, r.lo_in), (r.hi, r.hi_in)]
            .into_iter()
            .filter(|x| x.0.is_finite())
            .collect();
        if v.is_empty() {
            vec![(0.0, true)]
        } else {
            v
        }
    };
    // (angle, attained)
    let mut pts: Vec<(f64, bool)> = Vec::new();
    for (a, ain) in reps(ra) {
        for (b, bin) in reps(rb) {
            if a != 0.0 || b != 0.0 {
                pts.push((norm_angle(b.atan2(a)), ain && bin));
            }
        }
    }
    if ra.hi == f64::INFINITY {
        pts.push((0.0, false));
    }
    if ra.lo == f64::NEG_INFINITY {
        pts.push((PI, false));
    }
    if rb.hi == f64::INFINITY {
        pts.push((FRAC_PI_2, false));
    }
    if rb.lo == f64::NEG_INFINITY {
        pts.push((3.0 * FRAC_PI_2, false));
    }
    // axis rays run along rectangle edges; decide them exactly
    for p in pts.iter_mut() {
        for (k, ax) in [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2].into_iter().enumerate() {
            if (p.0 - ax).abs() <= ANG_EPS {
                p.1 = match k {
                    0 => has_pos(ra) && has_zero(rb),
                    1 => has_zero(ra) && has_pos(rb),
                    2 => has_neg(ra) && has_zero(rb),
                    _ => has_zero(ra) && has_neg(rb),
                };
            }
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    // collapse equal angles, keeping "attained" if any representative is
    let mut uniq: Vec<(f64, bool)> = Vec::new();
    for p in pts {
        match uniq.last_mut() {
            Some(last) if (p.0 - last.0).abs() <= ANG_EPS => last.1 |= p.1,
            _ => uniq.push(p),
        }
    }
    if uniq.len() > 1 && (uniq[0].0 + TAU - uniq.last().unwrap().0) <= ANG_EPS {
        let l = uniq.pop().unwrap();
        uniq[0].1 |= l.1;
    }
    if uniq.len() == 1 {
        return Arc::point(uniq[0].0);
    }
    let mut best = (0.0, 0usize);
    for i in 0..uniq.len() {
        let next = if i + 1 == uniq.len() { uniq[0].0 + TAU } else { uniq[i + 1].0 };
        let gap = next - uniq[i].0;
        if gap > best.0 {
            best = (gap, i);
        }
    }
    if best.0 < PI - ANG_EPS {
        return Arc::full();
    }
    let start = uniq[(best.1 + 1) % uniq.len()];
    let end = uniq[best.1];
    Arc::span_with(start.0, TAU - best.0, !start.1, !end.1)
}

fn sign_set(dirs: &Directions, pos: f64, neg: f64) -> Vec<f64> {
    let mut s = Vec::new();
    if dirs.contains_angle(pos) {
        s.push(1.0);
    }
    if dirs.contains_angle(neg) {
        s.push(-1.0);
    }
    s
}

/// Result directions of composing the arc sets of two pair-model cells.
fn pair_product_arcs(a1: &Directions, a2: &Directions) -> Vec<Arc> {
    let mut out = Vec::new();
    // η = 0: (ξ,0) composed with (0,ζ) gives an open quadrant
    for s1 in sign_set(a1, 0.0, PI) {
        for s2 in sign_set(a2, FRAC_PI_2, 3.0 * FRAC_PI_2) {
            let start = if s1 > 0.0 { 0.0 } else { PI };
            let end = if s2 > 0.0 { FRAC_PI_2 } else { 3.0 * FRAC_PI_2 };
            let w = (end - start).rem_euclid(TAU);
            if w <= FRAC_PI_2 + ANG_EPS {
                out.push(Arc::span_with(start, w, true, true));
            } else {
                out.push(Arc::span_with(end, TAU - w, true, true));
            }
        }
    }
    // η > 0: (cot α, −tan β), β ∈ [π/2, 3π/2]
    let up1: Vec<Piece> = a1.arcs().iter().flat_map(|a| a.pieces_in(0.0, PI)).filter(|p| !axis_only(p)).collect();
    let up2: Vec<Piece> =
        a2.arcs().iter().flat_map(|a| a.pieces_in(FRAC_PI_2, PI)).filter(|p| !axis_only(p)).collect();
    for p1 in &up1 {
        for p2 in &up2 {
            out.push(rect_arc(cot_range(p1), cot_range(p2)));
        }
    }
    // η < 0: (−cot α, tan β), β ∈ [−π/2, π/2]
    let dn1: Vec<Piece> = a1.arcs().iter().flat_map(|a| a.pieces_in(PI, PI)).filter(|p| !axis_only(p)).collect();
    let dn2: Vec<Piece> =
        a2.arcs().iter().flat_map(|a| a.pieces_in(3.0 * FRAC_PI_2, PI)).filter(|p| !axis_only(p)).collect();
    for p1 in &dn1 {
        for p2 in &dn2 {
            out.push(rect_arc(negcot_range(p1), negcot_range(p2)));
        }
    }
    out
}

fn signs_at(dirs: &Directions, pos: f64, neg: f64) -> Vec<Arc> {
    sign_set(dirs, pos, neg)
        .into_iter()
        .map(|s| Arc::point(if s > 0.0 { pos } else { neg }))
        .collect()
}

/// `W1 * W2 = m_Γ((W1 × W2) ∩ Γ^(2))`.
pub fn cone_product(w1: &ConeSet, w2: &ConeSet) -> Result<ConeSet> {
    product_impl(w1, w2, false)
}

/// `W1 ∗̄ W2`, which adds the terms `W1 × 0` and `0 × W2`.
pub fn cone_product_bar(w1: &ConeSet, w2: &ConeSet) -> Result<ConeSet> {
    product_impl(w1, w2, true)
}

fn product_impl(w1: &ConeSet, w2: &ConeSet, bar: bool) -> Result<ConeSet> {
    w1.model.require_same(&w2.model)?;
    let model = w1.model;
    model.require_grid()?;
    let mut cells = Vec::new();
    match model.kind {
        ModelKind::CircleGroup => {
            // s_Γ = r_Γ = ξ, so both factors carry the same covector; zero terms vanish.
            for c1 in &w1.cells {
                for c2 in &w2.cells {
                    if let (
                        Directions::Signs { plus: p1, minus: m1 },
                        Directions::Signs { plus: p2, minus: m2 },
                    ) = (&c1.dirs, &c2.dirs)
                    {
                        cells.push(ConeCell {
                            base: vec![c1.base[0].minkowski_sum(&c2.base[0])],
                            dirs: Directions::Signs { plus: *p1 && *p2, minus: *m1 && *m2 },
                        });
                    }
                }
            }
        }
        ModelKind::PairCircle => {
            let n = model.n;
            for c1 in &w1.cells {
                for c2 in &w2.cells {
                    if !c1.base[1].intersects(&c2.base[0]) {
                        continue;
                    }
                    cells.push(ConeCell {
                        base: vec![c1.base[0], c2.base[1]],
                        dirs: Directions::Arcs(pair_product_arcs(&c1.dirs, &c2.dirs)),
                    });
                }
            }
            if bar {
                for c1 in &w1.cells {
                    cells.push(ConeCell {
                        base: vec![c1.base[0], CircInterval::full(n)],
                        dirs: Directions::Arcs(signs_at(&c1.dirs, 0.0, PI)),
                    });
                }
                for c2 in &w2.cells {
                    cells.push(ConeCell {
                        base: vec![CircInterval::full(n), c2.base[1]],
                        dirs: Directions::Arcs(signs_at(&c2.dirs, FRAC_PI_2, 3.0 * FRAC_PI_2)),
                    });
                }
            }
        }
        ModelKind::PairTimesZ => {
            let samples = SphereSamples::new(SAMPLED_STEP);
            for c1 in &w1.cells {
                for c2 in &w2.cells {
                    if !c1.base[1].intersects(&c2.base[0]) || !c1.base[2].intersects(&c2.base[2]) {
                        continue;
                    }
                    let z = intersect_interval(&c1.base[2], &c2.base[2]);
                    let caps = samples.product_caps(c1.dirs.caps(), c2.dirs.caps());
                    cells.push(ConeCell {
                        base: vec![c1.base[0], c2.base[1], z],
                        dirs: Directions::Caps(caps),
                    });
                }
            }
            if bar {
                let n = model.n;
                for c1 in &w1.cells {
                    let dirs = samples.plane_caps(c1.dirs.caps(), 1, |v| [v[0], 0.0, v[2]]);
                    cells.push(ConeCell {
                        base: vec![c1.base[0], CircInterval::full(n), c1.base[2]],
                        dirs: Directions::Caps(dirs),
                    });
                }
                for c2 in &w2.cells {
                    let dirs = samples.plane_caps(c2.dirs.caps(), 0, |v| [0.0, v[1], v[2]]);
                    cells.push(ConeCell {
                        base: vec![CircInterval::full(n), c2.base[1], c2.base[2]],
                        dirs: Directions::Caps(dirs),
                    });
                }
            }
        }
        ModelKind::AffineGroup => unreachable!(),
    }
    Ok(ConeSet { model, cells }.normalized())
}

/// Smallest circle interval containing the intersection (which may have two pieces).
fn intersect_interval(a: &CircInterval, b: &CircInterval) -> CircInterval {
    let pts: Vec<usize> = a.iter().filter(|&k| b.contains(k)).collect();
    match pts.len() {
        0 => unreachable!("callers check intersection first"),
        l if l == a.modulus => CircInterval::full(a.modulus),
        _ => {
            // pts are sorted by offset from a.start, so the hull is contiguous within a
            let first = pts[0];
            let last = *pts.last().unwrap();
            let len = (last + a.modulus - first) % a.modulus + 1;
            CircInterval::new(first, len, a.modulus)
        }
    }
}

/// Fibonacci sampling of the unit sphere used for the 3-D cone products.
struct SphereSamples {
    step: f64,
    points: Vec<[f64; 3]>,
}

impl SphereSamples {
    fn new(step: f64) -> Self {
        let count = ((4.0 * PI) / (step * step)).ceil() as usize;
        Self { step, points: fibonacci_sphere(count) }
    }

    fn in_cap(&self, cap: &Cap) -> Vec<[f64; 3]> {
        let mut out = vec![cap.center];
        if cap.radius <= 0.0 {
            return out;
        }
        out.extend(self.points.iter().filter(|p| cap.contains(p)).copied());
        // boundary ring
        let c = cap.center;
        let helper = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = norm3(cross(c, helper)).expect("independent");
        let e2 = cross(c, e1);
        let ring = ((TAU * cap.radius.sin()) / self.step).ceil().max(4.0) as usize;
        for k in 0..ring {
            let t = k as f64 * TAU / ring as f64;
            let (cr, sr) = (cap.radius.cos(), cap.radius.sin());
            out.push([
                cr * c[0] + sr * (t.cos() * e1[0] + t.sin() * e2[0]),
                cr * c[1] + sr * (t.cos() * e1[1] + t.sin() * e2[1]),
                cr * c[2] + sr * (t.cos() * e1[2] + t.sin() * e2[2]),
            ]);
        }
        out
    }

    /// Samples of `caps ∩ {v[axis] = 0}` (dilated by one step), projected onto the plane.
    fn in_plane(&self, caps: &[Cap], axis: usize) -> Vec<[f64; 3]> {
        let steps = (TAU / self.step).ceil() as usize;
        let (i, j) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut out = Vec::new();
        for k in 0..steps {
            let t = k as f64 * TAU / steps as f64;
            let mut v = [0.0; 3];
            v[i] = t.cos();
            v[j] = t.sin();
            if caps.iter().any(|c| angle3(&c.center, &v) <= c.radius + self.step) {
                out.push(v);
            }
        }
        out
    }

    fn quantize(&self, dirs: Vec<[f64; 3]>) -> Vec<Cap> {
        // snap to the Fibonacci grid; the cap radius covers snapping plus one sampling step
        let spacing = (4.0 * PI / self.points.len() as f64).sqrt();
        let mut idx: Vec<usize> = dirs
            .iter()
            .map(|d| {
                let mut best = (f64::INFINITY, 0);
                for (i, p) in self.points.iter().enumerate() {
                    let a = angle3(p, d);
                    if a < best.0 {
                        best = (a, i);
                    }
                }
                best.1
            })
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx.into_iter()
            .map(|i| Cap { center: self.points[i], radius: spacing + self.step })
            .collect()
    }

    fn product_caps(&self, caps1: &[Cap], caps2: &[Cap]) -> Vec<Cap> {
        let s1: Vec<[f64; 3]> = caps1.iter().flat_map(|c| self.in_cap(c)).collect();
        let s2: Vec<[f64; 3]> = caps2.iter().flat_map(|c| self.in_cap(c)).collect();
        let mut res = Vec::new();
        let tol = self.step.sin();
        for d1 in &s1 {
            for d2 in &s2 {
                // u ξ2 = −t η1 with t, u > 0
                if d1[1] * d2[0] < 0.0 {
                    let (t, u) = (d2[0].abs(), d1[1].abs());
                    if let Some(v) = norm3([t * d1[0], u * d2[1], t * d1[2] + u * d2[2]]) {
                        res.push(v);
                    }
                } else if d1[1].abs() <= tol && d2[0].abs() <= tol {
                    // η1 = ξ2 = 0: t and u are independent
                    for k in 0..=8 {
                        let phi = k as f64 * FRAC_PI_2 / 8.0;
                        let (t, u) = (phi.cos(), phi.sin());
                        if let Some(v) = norm3([t * d1[0], u * d2[1], t * d1[2] + u * d2[2]]) {
                            res.push(v);
                        }
                    }
                }
            }
        }
        // the exact η1 = ξ2 = 0 family from plane samples
        let p1 = self.in_plane(caps1, 1);
        let p2 = self.in_plane(caps2, 0);
        for d1 in &p1 {
            for d2 in &p2 {
                for k in 0..=8 {
                    let phi = k as f64 * FRAC_PI_2 / 8.0;
                    let (t, u) = (phi.cos(), phi.sin());
                    if let Some(v) = norm3([t * d1[0], u * d2[1], t * d1[2] + u * d2[2]]) {
                        res.push(v);
                    }
                }
            }
        }
        self.quantize(res)
    }

    fn plane_caps(&self, caps: &[Cap], axis: usize, proj: impl Fn(&[f64; 3]) -> [f64; 3]) -> Vec<Cap> {
        let pts: Vec<[f64; 3]> =
            self.in_plane(caps, axis).iter().filter_map(|v| norm3(proj(v))).collect();
        self.quantize(pts)
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

// ---- anchor images ----

/// Image of a cone under s_Γ or r_Γ: unit boxes with the signs of the covector class
/// (dimension-1 fibers of A*G on the pair models). Zero classes are kept as `zero`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AnchorCell {
    pub base: Vec<CircInterval>,
    pub plus: bool,
    pub minus: bool,
    pub zero: bool,
}

/// Image of a pair-model cone under s_Γ (`source = true`) or r_Γ.
pub fn anchor_image(w: &ConeSet, source: bool) -> Result<Vec<AnchorCell>> {
    if w.model.kind != ModelKind::PairCircle {
        return Err(GrpdError::Unsupported("anchor images are computed on PAIR_CIRCLE".into()));
    }
    // class −η for s_Γ, ξ for r_Γ; it vanishes at the two angles in `zeros`
    let class = |a: f64| if source { -a.sin() } else { a.cos() };
    let zeros = if source { [0.0, PI] } else { [FRAC_PI_2, 3.0 * FRAC_PI_2] };
    let mut out = Vec::new();
    for c in &w.cells {
        let mut cell = AnchorCell {
            base: vec![if source { c.base[1] } else { c.base[0] }],
            plus: false,
            minus: false,
            zero: false,
        };
        let mark = |v: f64, cell: &mut AnchorCell| {
            if v.abs() <= 1e-12 {
                cell.zero = true;
            } else if v > 0.0 {
                cell.plus = true;
            } else {
                cell.minus = true;
            }
        };
        for arc in c.dirs.arcs() {
            let w = arc.width();
            if !arc.lo_open {
                mark(class(arc.lo), &mut cell);
            }
            if !arc.hi_open {
                mark(class(arc.hi), &mut cell);
            }
            if w > 0.0 {
                let d = (w / 4.0).min(1e-6);
                for a in [arc.lo + d, arc.mid(), arc.lo + w - d] {
                    mark(class(a), &mut cell);
                }
            }
            for z in zeros {
                if arc.contains_interior(z) {
                    cell.zero = true;
                    cell.plus = true;
                    cell.minus = true;
                } else if arc.contains(z) {
                    cell.zero = true;
                }
            }
        }
        out.push(cell);
    }
    out.sort();
    Ok(out)
}

// ---- random cells ----

/// A random cell of a grid model: small base box and one or two random arcs/caps.
pub fn random_cell<R: Rng + ?Sized>(model: GroupoidModel, rng: &mut R) -> ConeCell {
    let dims = model.grid_dims();
    let base = dims
        .iter()
        .map(|&d| {
            let len = if rng.gen_bool(0.1) { d } else { rng.gen_range(1..=(d / 4).max(1)) };
            CircInterval::new(rng.gen_range(0..d), len, d)
        })
        .collect();
    let dirs = match dims.len() {
        1 => loop {
            let (plus, minus) = (rng.gen_bool(0.6), rng.gen_bool(0.6));
            if plus || minus {
                break Directions::Signs { plus, minus };
            }
        },
        2 => {
            let k = rng.gen_range(1..=2);
            let arcs = (0..k)
                .map(|_| {
                    // favor arcs touching the axes, where the kernels live
                    let lo = if rng.gen_bool(0.3) {
                        (rng.gen_range(0..4) as f64) * FRAC_PI_2
                    } else {
                        rng.gen_range(0.0..TAU)
                    };
                    if rng.gen_bool(0.2) {
                        Arc::point(lo)
                    } else {
                        let w = rng.gen_range(0.01..FRAC_PI_2);
                        Arc::span_with(lo, w, rng.gen_bool(0.2), rng.gen_bool(0.2))
                    }
                })
                .collect();
            Directions::Arcs(arcs)
        }
        _ => {
            let k = rng.gen_range(1..=2);
            let caps = (0..k)
                .map(|_| {
                    let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    Cap::new(v, rng.gen_range(0.0..0.5)).unwrap_or_else(|_| Cap::full())
                })
                .collect();
            Directions::Caps(caps)
        }
    };
    ConeCell { base, dirs }
}

pub fn random_cone<R: Rng + ?Sized>(model: GroupoidModel, cells: usize, rng: &mut R) -> ConeSet {
    let cells = (0..cells).map(|_| random_cell(model, rng)).collect();
    ConeSet::new(model, cells).expect("random cells match the model")
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
struct CellJson {
    base_box: Vec<[f64; 2]>,
    arcs: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    open: Option<Vec<[bool; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caps: Option<Vec<[f64; 4]>>,
}

#[derive(Serialize, Deserialize)]
struct ConeSetJson {
    model: GroupoidModel,
    cells: Vec<CellJson>,
}

impl Serialize for ConeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cells = self
            .cells
            .iter()
            .map(|c| {
                let base_box = c.base.iter().map(|b| b.to_json()).collect();
                let mut open = None;
                let (arcs, caps) = match &c.dirs {
                    Directions::Signs { plus, minus } => {
                        let mut a = Vec::new();
                        if *plus {
                            a.push([0.0, 0.0]);
                        }
                        if *minus {
                            a.push([PI, PI]);
                        }
                        (a, None)
                    }
                    Directions::Arcs(a) => {
                        if a.iter().any(|x| x.lo_open || x.hi_open) {
                            open = Some(a.iter().map(|x| [x.lo_open, x.hi_open]).collect());
                        }
                        (a.iter().map(|x| [x.lo, x.hi]).collect(), None)
                    }
                    Directions::Caps(cs) => (
                        vec![],
                        Some(
                            cs.iter()
                                .map(|c| [c.center[0], c.center[1], c.center[2], c.radius])
                                .collect(),
                        ),
                    ),
                };
                CellJson { base_box, arcs, open, caps }
            })
            .collect();
        ConeSetJson { model: self.model, cells }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConeSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ConeSetJson::deserialize(d)?;
        from_json_parts(raw).map_err(serde::de::Error::custom)
    }
}

fn from_json_parts(raw: ConeSetJson) -> Result<ConeSet> {
    let model = raw.model;
    model.require_grid()?;
    let dims = model.grid_dims();
    let mut cells = Vec::with_capacity(raw.cells.len());
    for c in raw.cells {
        if c.base_box.len() != dims.len() {
            return Err(GrpdError::Format("base_box length does not match dim G".into()));
        }
        let base = c
            .base_box
            .iter()
            .zip(&dims)
            .map(|(b, &m)| CircInterval::from_json(*b, m))
            .collect::<Result<Vec<_>>>()?;
        let dirs = match dims.len() {
            1 => {
                let arcs = parse_arcs(&c.arcs, None)?;
                Directions::Signs {
                    plus: arcs.iter().any(|a| a.contains(0.0)),
                    minus: arcs.iter().any(|a| a.contains(PI)),
                }
            }
            2 => Directions::Arcs(parse_arcs(&c.arcs, c.open.as_deref())?),
            _ => Directions::Caps(
                c.caps
                    .unwrap_or_default()
                    .iter()
                    .map(|v| {
                        let cap = Cap { center: [v[0], v[1], v[2]], radius: v[3] };
                        if norm3(cap.center).is_none() || !(0.0..=PI).contains(&cap.radius) {
                            Err(GrpdError::Format("invalid cap".into()))
                        } else {
                            Ok(cap)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        cells.push(ConeCell { base, dirs });
    }
    Ok(ConeSet { model, cells })
}

fn parse_arcs(v: &[[f64; 2]], open: Option<&[[bool; 2]]>) -> Result<Vec<Arc>> {
    if let Some(o) = open {
        if o.len() != v.len() {
            return Err(GrpdError::Format("`open` must parallel `arcs`".into()));
        }
    }
    v.iter()
        .enumerate()
        .map(|(i, a)| {
            let [lo_open, hi_open] = open.map(|o| o[i]).unwrap_or([false, false]);
            if a[0] == 0.0 && a[1] == TAU {
                Ok(Arc::full())
            } else if (0.0..TAU).contains(&a[0]) && (0.0..TAU).contains(&a[1]) {
                Ok(Arc { lo: a[0], hi: a[1], lo_open, hi_open })
            } else {
                Err(GrpdError::Format(format!("arc bounds {a:?} outside [0, 2π)")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(n: usize) -> GroupoidModel {
        GroupoidModel::pair_circle(n).unwrap()
    }

    #[test]
    fn circle_interval_basics() {
        let a = CircInterval::new(6, 4, 8); // {6,7,0,1}
        assert!(a.contains(0) && a.contains(7) && !a.contains(2));
        assert!(a.intersects(&CircInterval::point(1, 8)));
        assert!(!a.intersects(&CircInterval::new(2, 4, 8)));
        assert_eq!(a.dilate(1), CircInterval::new(5, 6, 8));
        assert!(a.dilate(3).is_full());
        assert_eq!(a.negate(), CircInterval::new(7, 4, 8)); // {7,0,1,2}
        assert_eq!(CircInterval::new(1, 2, 8).minkowski_sum(&CircInterval::new(3, 3, 8)), CircInterval::new(4, 4, 8));
    }

    #[test]
    fn arc_merging() {
        let m = merge_arcs(&[Arc::span(6.0, 0.5), Arc::span(0.1, 0.3), Arc::span(0.35, 0.1)]);
        assert_eq!(m.len(), 1);
        assert!((m[0].lo - 6.0).abs() < 1e-12);
        assert!((m[0].width() - (TAU - 6.0 + 0.45)).abs() < 1e-12);
        let m = merge_arcs(&[Arc::span(0.0, 4.0), Arc::span(3.5, 3.0)]);
        assert_eq!(m, vec![Arc::full()]);
        let m = merge_arcs(&[Arc::point(1.0), Arc::point(2.0)]);
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn a_star_units_pair_example() {
        let w = a_star_units(pair(8)).unwrap();
        assert_eq!(w.cells.len(), 8);
        for (x, c) in w.cells.iter().enumerate() {
            assert_eq!(c.base, vec![CircInterval::point(x, 8), CircInterval::point(x, 8)]);
            let a = c.dirs.arcs();
            assert_eq!(a.len(), 2);
            assert!((a[0].lo - 3.0 * PI / 4.0).abs() < 1e-15 && a[0].width() == 0.0);
            assert!((a[1].lo - 7.0 * PI / 4.0).abs() < 1e-15 && a[1].width() == 0.0);
        }
        assert!(transversality(&w, Transversality::BiTransversal));
        let g = a_star_units(GroupoidModel::circle_group(8).unwrap()).unwrap();
        assert_eq!(g.cells[0].dirs, Directions::Signs { plus: true, minus: true });
        assert!(transversality(&g, Transversality::BiTransversal));
        assert!(a_star_units(GroupoidModel::affine_group()).is_err());
    }

    #[test]
    fn transversality_examples() {
        let full = point_cone(pair(8), &[0, 0]).unwrap();
        assert!(!transversality(&full, Transversality::RTransversal));
        assert!(!transversality(&full, Transversality::STransversal));
        let lam = rotation_conormal(pair(8), 3).unwrap();
        assert!(transversality(&lam, Transversality::BiTransversal));
    }

    #[test]
    fn conormal_products() {
        let m = pair(16);
        let p = cone_product(&rotation_conormal(m, 3).unwrap(), &rotation_conormal(m, 5).unwrap()).unwrap();
        assert_eq!(p, rotation_conormal(m, 8).unwrap());
        let a = a_star_units(m).unwrap();
        assert_eq!(cone_product(&a, &a).unwrap(), a);
        // bar adds nothing: conormal directions avoid both axes
        assert_eq!(cone_product_bar(&a, &rotation_conormal(m, 2).unwrap()).unwrap(), rotation_conormal(m, 2).unwrap());
    }

    #[test]
    fn disjoint_point_cones() {
        let m = pair(16);
        let w1 = point_cone(m, &[0, 0]).unwrap();
        let w2 = point_cone(m, &[8, 8]).unwrap();
        assert!(cone_product(&w1, &w2).unwrap().is_empty());
        assert!(hormander_gate(&w1, &w2).unwrap());
    }

    #[test]
    fn bar_with_smooth_factor() {
        let m = pair(16);
        let w1 = point_cone(m, &[0, 0]).unwrap();
        let p = cone_product_bar(&w1, &ConeSet::empty(m)).unwrap();
        assert_eq!(p.cells.len(), 1);
        assert_eq!(p.cells[0].base, vec![CircInterval::point(0, 16), CircInterval::full(16)]);
        assert_eq!(p.cells[0].dirs, Directions::Arcs(vec![Arc::point(0.0), Arc::point(PI)]));
        let e = ConeSet::empty(m);
        assert!(cone_product_bar(&e, &e).unwrap().is_empty());
        let lam = rotation_conormal(m, 3).unwrap();
        assert!(cone_product_bar(&lam, &e).unwrap().is_empty());
    }

    #[test]
    fn gate_examples() {
        let m = pair(16);
        // (0.1·, 0.4·) stand-ins on the 16 grid: y = 4
        let w1 = ConeSet::new(m, vec![ConeCell {
            base: vec![CircInterval::point(1, 16), CircInterval::point(4, 16)],
            dirs: Directions::Arcs(vec![Arc::point(FRAC_PI_2)]),
        }])
        .unwrap();
        let w2 = ConeSet::new(m, vec![ConeCell {
            base: vec![CircInterval::point(4, 16), CircInterval::point(7, 16)],
            dirs: Directions::Arcs(vec![Arc::point(PI)]),
        }])
        .unwrap();
        assert!(!hormander_gate(&w1, &w2).unwrap());
        // s-transversal first factor always passes
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lam = rotation_conormal(m, 2).unwrap();
        for _ in 0..50 {
            let w = random_cone(m, 3, &mut rng);
            assert!(hormander_gate(&lam, &w).unwrap());
        }
    }

    #[test]
    fn group_product_is_minkowski() {
        let g = GroupoidModel::circle_group(16).unwrap();
        let w1 = ConeSet::new(g, vec![ConeCell {
            base: vec![CircInterval::new(1, 2, 16)],
            dirs: Directions::Signs { plus: true, minus: true },
        }])
        .unwrap();
        let w2 = ConeSet::new(g, vec![ConeCell {
            base: vec![CircInterval::new(15, 3, 16)],
            dirs: Directions::Signs { plus: true, minus: false },
        }])
        .unwrap();
        let p = cone_product_bar(&w1, &w2).unwrap();
        assert_eq!(p.cells.len(), 1);
        assert_eq!(p.cells[0].base, vec![CircInterval::new(0, 4, 16)]);
        assert_eq!(p.cells[0].dirs, Directions::Signs { plus: true, minus: false });
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [pair(16), GroupoidModel::circle_group(16).unwrap(), GroupoidModel::pair_times_z(8, 4).unwrap()] {
            let w = random_cone(model, 5, &mut rng);
            let s = serde_json::to_string(&w).unwrap();
            let back: ConeSet = serde_json::from_str(&s).unwrap();
            assert_eq!(back, w);
            assert_eq!(serde_json::to_string(&back).unwrap(), s);
        }
    }

    #[test]
    fn ptz_products_contain_conormals() {
        let m = GroupoidModel::pair_times_z(8, 2).unwrap();
        let a = a_star_units(m).unwrap();
        let l = rotation_conormal(m, 3).unwrap();
        let p = cone_product(&a, &l).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for x in 0..8 {
            assert!(p.contains_point(&[x, (x + 5) % 8, 1], &[s, -s, 0.0]));
            assert!(p.contains_point(&[x, (x + 5) % 8, 0], &[-s, s, 0.0]));
        }
        assert!(transversality(&a, Transversality::BiTransversal));
        assert!(hormander_gate(&a, &l).unwrap());
        let full = point_cone(m, &[0, 0, 0]).unwrap();
        assert!(!hormander_gate(&full, &point_cone(m, &[0, 0, 0]).unwrap()).unwrap());
    }
}
