//! Wave-front estimation by windowed DFTs and directional decay fits.
//!
//! For each probe center the field is multiplied by the compact bump
//! `exp(1 − 1/(1 − (r/ρ)²))`, transformed, and for every direction the largest
//! modulus in each frequency shell is recorded. A least-squares slope of
//! `log max` against `log radius` above the threshold marks the direction as
//! singular at that center.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::dft2;
use crate::cone::{
    cone_product, hormander_gate, merge_arcs, Arc, CircInterval, ConeCell, ConeSet,
    Directions,
};
use crate::convolution::convolve_gated;
use crate::distribution::Distribution;
use crate::error::{GrpdError, Result};
use crate::grid::max_abs;
use crate::models::{GroupoidModel, ModelKind};
use crate::spectral::{freq, Spectral, C64};

/// Centers whose windowed field is below this fraction of the global maximum are skipped.
const NEGLIGIBLE: f64 = 1e-10;
/// Shell maxima are floored at this fraction of the center's spectral peak.
const FLOOR: f64 = 1e-12;
/// A direction whose outermost shell stays below this fraction of the peak counts as decayed.
const SIGNIFICANT: f64 = 1e-8;
/// Lattice-adaptive widening of the direction bins: half-angle ≥ this / shell radius.
const LATTICE_WIDTH: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfParams {
    pub window_radius: usize,
    pub n_directions: usize,
    pub cone_half_angle: f64,
    pub shell_range: [usize; 2],
    pub slope_threshold: f64,
    pub probe_stride: usize,
}

impl WfParams {
    /// Defaults used throughout: window `n/4`, stride `n/8`, 256 directions,
    /// shells `[max(4, n/16), n/4]`, threshold −0.75.
    pub fn for_grid(n: usize) -> Self {
        Self {
            window_radius: (n / 4).max(4),
            n_directions: 256,
            cone_half_angle: PI / 256.0,
            shell_range: [(n / 16).max(4), (n / 4).max(8)],
            slope_threshold: -0.75,
            probe_stride: (n / 8).max(1),
        }
    }

    /// The nominal textbook settings (window `n/8`, stride `n/16`, 64 directions,
    /// half-angle 10°, shells `[4, n/4]`, threshold −2.5). Kept for comparison runs.
    pub fn nominal(n: usize) -> Self {
        Self {
            window_radius: (n / 8).max(4),
            n_directions: 64,
            cone_half_angle: PI / 18.0,
            shell_range: [4, (n / 4).max(8)],
            slope_threshold: -2.5,
            probe_stride: (n / 16).max(1),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: &str| Err(GrpdError::Domain(format!("wf params: {m}")));
        if self.window_radius < 4 {
            return bad("window_radius must be ≥ 4");
        }
        if self.n_directions < 16 {
            return bad("n_directions must be ≥ 16");
        }
        if !(self.slope_threshold < 0.0) {
            return bad("slope_threshold must be negative");
        }
        if self.probe_stride == 0 || self.probe_stride > n {
            return bad("probe_stride out of range");
        }
        if self.shell_range[0] < 1 || self.shell_range[1] > n / 2 || self.shells().len() < 2 {
            return bad("shell_range must hold at least two shells below n/2");
        }
        // A narrower fit base flags band-limited fields as singular (seen at n = 32).
        if self.shell_range[1] < 4 * self.shell_range[0] {
            return bad("shell_range must span a factor of 4 or more");
        }
        if !(self.cone_half_angle > 0.0) {
            return bad("cone_half_angle must be positive");
        }
        Ok(())
    }

    /// Half-octave shell edges from `shell_range[0]` to `shell_range[1]`.
    pub fn shells(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = (self.shell_range[0] as f64, self.shell_range[1] as f64);
        let mut edges = vec![lo];
        while *edges.last().unwrap() * 2f64.sqrt() <= hi * (1.0 + 1e-12) {
            let e = edges.last().unwrap() * 2f64.sqrt();
            edges.push(e);
        }
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn direction_angle(&self, d: usize) -> f64 {
        TAU * d as f64 / self.n_directions as f64
    }

    pub fn angular_step(&self) -> f64 {
        TAU / self.n_directions as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeEntry {
    pub center: Vec<usize>,
    pub direction: usize,
    pub angle: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WfReport {
    pub estimated: ConeSet,
    pub slopes: Vec<SlopeEntry>,
    pub params: WfParams,
}

/// Density grid used for estimation. Layers are drawn at order zero,
/// `n·c(x)` on the graph: a fiber derivative of a layer has the same wave
/// front set, and a drawn derivative stencil only adds window leakage.
pub fn rasterize(u: &Distribution) -> Vec<C64> {
    let n = u.n();
    let nf = n as f64;
    let mut v = u.dense_part();
    for l in &u.layers {
        match u.model.kind {
            ModelKind::PairCircle => {
                for x in 0..n {
                    v[x * n + (x + n - l.section % n) % n] += l.coeffs[x] * nf;
                }
            }
            _ => v[l.section % n] += l.coeffs[0] * nf,
        }
    }
    v
}

fn bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn periodic_dist(a: usize, b: usize, n: usize) -> f64 {
    let d = (a as i64 - b as i64).rem_euclid(n as i64) as usize;
    d.min(n - d) as f64
}

fn ang_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Frequency bins of one `(direction, shell)` pair.
struct Bins {
    /// `lists[d][s]` are flat grid indices.
    lists: Vec<Vec<Vec<usize>>>,
    centers: Vec<f64>,
}

fn bins_for(n: usize, dim: usize, p: &WfParams, angles: &[f64]) -> Bins {
    let shells = p.shells();
    let centers: Vec<f64> = shells.iter().map(|(a, b)| (a * b).sqrt()).collect();
    let mut lists = vec![vec![Vec::new(); shells.len()]; angles.len()];
    let total = if dim == 2 { n * n } else { n };
    for idx in 0..total {
        let (k, l) = if dim == 2 { (freq(idx / n, n), freq(idx % n, n)) } else { (freq(idx, n), 0) };
        if k.unsigned_abs() as usize >= n / 2 || l.unsigned_abs() as usize >= n / 2 {
            continue;
        }
        let r = ((k * k + l * l) as f64).sqrt();
        let Some(s) = shells.iter().position(|(a, b)| r >= *a && r < *b) else { continue };
        let ang = (l as f64).atan2(k as f64).rem_euclid(TAU);
        let half = p.cone_half_angle.max(LATTICE_WIDTH / shells[s].0);
        for (d, &phi) in angles.iter().enumerate() {
            if ang_dist(ang, phi) <= half + 1e-12 {
                lists[d][s].push(idx);
            }
        }
    }
    Bins { lists, centers }
}

fn direction_angles(dim: usize, p: &WfParams) -> Vec<f64> {
    if dim == 1 {
        vec![0.0, PI]
    } else {
        (0..p.n_directions).map(|d| p.direction_angle(d)).collect()
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Windowed spectrum moduli at one center, or `None` when the window sees nothing.
fn windowed_spectrum(field: &[C64], n: usize, dim: usize, center: &[usize], rho: f64, global: f64) -> Option<Vec<f64>> {
    let mut g: Vec<C64> = if dim == 2 {
        (0..n * n)
            .map(|i| {
                let dx = periodic_dist(i / n, center[0], n);
                let dy = periodic_dist(i % n, center[1], n);
                field[i] * bump((dx * dx + dy * dy).sqrt() / rho)
            })
            .collect()
    } else {
        (0..n).map(|i| field[i] * bump(periodic_dist(i, center[0], n) / rho)).collect()
    };
    if max_abs(&g) <= NEGLIGIBLE * global {
        return None;
    }
    if dim == 2 {
        g = dft2(n, g);
    } else {
        Spectral::new(n).forward(&mut g);
    }
    Some(g.iter().map(|c| c.norm()).collect())
}

/// `(slope, outer shell maximum)` of one direction.
fn direction_slope(spec: &[f64], top: f64, bins: &[Vec<usize>], centers: &[f64]) -> (f64, f64) {
    let floor = FLOOR * top;
    let vals: Vec<f64> =
        bins.iter().map(|b| b.iter().fold(0.0f64, |m, &i| m.max(spec[i])).max(floor)).collect();
    let xs: Vec<f64> = centers.iter().map(|c| c.ln()).collect();
    let ys: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    (fit_slope(&xs, &ys), *vals.last().unwrap())
}

/// Per direction: fitted slope, and whether the direction counts as singular.
fn singular_directions(spec: &[f64], bins: &Bins, p: &WfParams) -> (Vec<f64>, Vec<bool>) {
    let top = spec.iter().fold(0.0f64, |m, v| m.max(*v));
    bins.lists
        .iter()
        .map(|b| {
            let (slope, outer) = direction_slope(spec, top, b, &bins.centers);
            (slope, outer >= SIGNIFICANT * top && slope > p.slope_threshold)
        })
        .unzip()
}

fn probe_centers(n: usize, dim: usize, stride: usize) -> Vec<Vec<usize>> {
    let ticks: Vec<usize> = (0..n).step_by(stride).collect();
    if dim == 2 {
        ticks.iter().flat_map(|&a| ticks.iter().map(move |&b| vec![a, b])).collect()
    } else {
        ticks.into_iter().map(|a| vec![a]).collect()
    }
}

fn require_estimable(model: &GroupoidModel) -> Result<usize> {
    match model.kind {
        ModelKind::PairCircle => Ok(2),
        ModelKind::CircleGroup => Ok(1),
        ModelKind::AffineGroup => Err(GrpdError::Unsupported("wave-front estimation on a continuous model".into())),
        ModelKind::PairTimesZ => Err(GrpdError::Unsupported("wave-front estimation on PAIR_TIMES_Z".into())),
    }
}

#[cfg(feature = "parallel")]
fn map_centers<T: Send, F: Fn(&Vec<usize>) -> T + Sync + Send>(cs: &[Vec<usize>], f: F) -> Vec<T> {
    use rayon::prelude::*;
    cs.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_centers<T, F: Fn(&Vec<usize>) -> T>(cs: &[Vec<usize>], f: F) -> Vec<T> {
    cs.iter().map(f).collect()
}

pub fn estimate_wavefront(u: &Distribution, p: &WfParams) -> Result<WfReport> {
    let dim = require_estimable(&u.model)?;
    let n = u.n();
    p.validate(n)?;
    let field = rasterize(u);
    let global = max_abs(&field);
    let angles = direction_angles(dim, p);
    let bins = bins_for(n, dim, p, &angles);
    let step = p.angular_step();
    let centers = probe_centers(n, dim, p.probe_stride);
    let per_center = map_centers(&centers, |c| {
        let mut rows = Vec::new();
        let mut hits = Vec::new();
        if global == 0.0 {
            return (rows, hits);
        }
        let rho = p.window_radius as f64;
        let Some(spec) = windowed_spectrum(&field, n, dim, c, rho, global) else {
            return (rows, hits);
        };
        let (slopes, outer) = singular_directions(&spec, &bins, p);
        // the half window confirms that the singularity sits near the center
        let inner = windowed_spectrum(&field, n, dim, c, (rho / 2.0).max(4.0), global)
            .map(|s| singular_directions(&s, &bins, p).1);
        for (d, &slope) in slopes.iter().enumerate() {
            rows.push(SlopeEntry { center: c.clone(), direction: d, angle: angles[d], slope });
            if outer[d] && inner.as_ref().is_some_and(|i| i[d]) {
                hits.push(d);
            }
        }
        (rows, hits)
    });
    let mut slopes = Vec::new();
    let mut cells = Vec::new();
    for (c, (rows, hits)) in centers.iter().zip(per_center) {
        slopes.extend(rows);
        if hits.is_empty() {
            continue;
        }
        let base: Vec<CircInterval> = c.iter().map(|&i| CircInterval::point(i, n)).collect();
        let dirs = if dim == 1 {
            Directions::Signs { plus: hits.contains(&0), minus: hits.contains(&1) }
        } else {
            let arcs: Vec<Arc> = hits.iter().map(|&d| Arc::span(angles[d] - step, 2.0 * step)).collect();
            Directions::Arcs(merge_arcs(&arcs))
        };
        cells.push(ConeCell { base, dirs });
    }
    Ok(WfReport { estimated: ConeSet::new(u.model, cells)?, slopes, params: p.clone() })
}

/// Fitted slope at one center along the covector `direction`.
pub fn decay_slope(u: &Distribution, center: &[usize], direction: &[f64], p: &WfParams) -> Result<f64> {
    let dim = require_estimable(&u.model)?;
    let n = u.n();
    p.validate(n)?;
    if center.len() != dim || direction.len() != dim || center.iter().any(|&c| c >= n) {
        return Err(GrpdError::Shape("center/direction do not match the model".into()));
    }
    let field = rasterize(u);
    let global = max_abs(&field);
    let phi = if dim == 1 {
        if direction[0] >= 0.0 {
            0.0
        } else {
            PI
        }
    } else {
        direction[1].atan2(direction[0]).rem_euclid(TAU)
    };
    let bins = bins_for(n, dim, p, &[phi]);
    let spec = if global == 0.0 { None } else { windowed_spectrum(&field, n, dim, center, p.window_radius as f64, global) };
    let Some(spec) = spec else { return Ok(f64::NEG_INFINITY) };
    let top = spec.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(direction_slope(&spec, top, &bins.lists[0], &bins.centers).0)
}

/// Every cell of `a` lies in `b` grown by `angular_tol` radians and `base_tol`
/// grid points per coordinate.
pub fn cone_contains(a: &ConeSet, b: &ConeSet, angular_tol: f64, base_tol: usize) -> Result<bool> {
    a.model.require_same(&b.model)?;
    let grown: Vec<(Vec<CircInterval>, &Directions)> = b
        .cells
        .iter()
        .map(|c| (c.base.iter().map(|iv| iv.dilate(base_tol)).collect(), &c.dirs))
        .collect();
    for cell in &a.cells {
        if cell.dirs.is_empty() {
            continue;
        }
        let axes: Vec<Vec<usize>> = cell.base.iter().map(|iv| iv.iter().collect()).collect();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let point: Vec<usize> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
            let over: Vec<&Directions> = grown
                .iter()
                .filter(|(base, _)| base.iter().zip(&point).all(|(iv, &k)| iv.contains(k)))
                .map(|(_, d)| *d)
                .collect();
            if !dirs_covered(&cell.dirs, &over, angular_tol) {
                return Ok(false);
            }
            // odometer over the box
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    Ok(true)
}

fn dirs_covered(d: &Directions, over: &[&Directions], tol: f64) -> bool {
    match d {
        Directions::Signs { plus, minus } => {
            let (bp, bm) = over.iter().fold((false, false), |(p, m), o| match o {
                Directions::Signs { plus, minus } => (p || *plus, m || *minus),
                _ => (p, m),
            });
            (!plus || bp) && (!minus || bm)
        }
        Directions::Arcs(arcs) => {
            let pool: Vec<Arc> = over
                .iter()
                .flat_map(|o| o.arcs().iter().map(|a| if tol > 0.0 { a.dilate(tol) } else { *a }))
                .collect();
            let merged = merge_arcs(&pool);
            arcs.iter().all(|a| merged.iter().any(|m| m.contains_arc(a)))
        }
        Directions::Caps(caps) => caps.iter().all(|c| {
            over.iter().any(|o| {
                o.caps().iter().any(|b| {
                    let dot: f64 = (0..3).map(|i| c.center[i] * b.center[i]).sum();
                    dot.clamp(-1.0, 1.0).acos() + c.radius <= b.radius + tol + 1e-12
                })
            })
        }),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductBoundReport {
    pub pass: bool,
    /// Largest modulus of the density grid of `u1 * u2`.
    pub product_max: f64,
    pub estimated: ConeSet,
    /// `W1 ∗̄ W2`, the bound being checked.
    pub predicted: ConeSet,
    /// `W1 * W2` without the zero-section terms.
    pub product: ConeSet,
    pub angular_tol: f64,
    pub base_tol: usize,
}

/// Estimates `WF(u1 * u2)` and checks it against `W1 ∗̄ W2` at 10° and two probe cells.
pub fn verify_product_bound(
    u1: &Distribution,
    u2: &Distribution,
    w1: &ConeSet,
    w2: &ConeSet,
    p: &WfParams,
) -> Result<ProductBoundReport> {
    if !hormander_gate(w1, w2)? {
        return Err(GrpdError::ConeCondition("W1 × W2 meets ker m_Γ".into()));
    }
    let (w, predicted) = convolve_gated(u1, u2, w1, w2)?;
    let estimated = estimate_wavefront(&w, p)?.estimated;
    let angular_tol = PI / 18.0;
    let base_tol = 2 * p.probe_stride;
    let pass = cone_contains(&estimated, &predicted, angular_tol, base_tol)?;
    Ok(ProductBoundReport {
        pass,
        product_max: max_abs(&w.materialize()),
        estimated,
        product: cone_product(w1, w2)?,
        predicted,
        angular_tol,
        base_tol,
    })
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    params: WfParams,
    estimated: ConeSet,
    slopes: String,
}

impl WfReport {
    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("center,direction,angle,slope\n");
        for e in &self.slopes {
            let c: Vec<String> = e.center.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{},{},{},{}\n", c.join(" "), e.direction, e.angle, e.slope));
        }
        s
    }

    pub fn parse_slopes_csv(text: &str) -> Result<Vec<SlopeEntry>> {
        let bad = |l: &str| GrpdError::Format(format!("slope csv line {l:?}"));
        let mut out = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            let center = f[0]
                .split(' ')
                .map(|v| v.parse::<usize>().map_err(|_| bad(line)))
                .collect::<Result<Vec<_>>>()?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            out.push(SlopeEntry {
                center,
                direction: f[1].parse().map_err(|_| bad(line))?,
                angle: num(f[2])?,
                slope: num(f[3])?,
            });
        }
        Ok(out)
    }

    /// Writes `<stem>.json` and the slope table `<stem>.csv`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let file = ReportFile {
            params: self.params.clone(),
            estimated: self.estimated.clone(),
            slopes: format!("{stem}.csv"),
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&file)? + "\n")?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.slopes_csv())?;
        Ok(())
    }

    pub fn read(json_path: &Path) -> Result<Self> {
        let file: ReportFile = serde_json::from_str(&std::fs::read_to_string(json_path)?)?;
        let dir = json_path.parent().unwrap_or_else(|| Path::new("."));
        let slopes = Self::parse_slopes_csv(&std::fs::read_to_string(dir.join(&file.slopes))?)?;
        Ok(Self { estimated: file.estimated, slopes, params: file.params })
    }
}
