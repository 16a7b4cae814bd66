//! Periodic derivatives on the circle grid `{k/n}`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex64;

/// Signed frequency of FFT bin `k` on an `n`-grid.
pub fn freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Multiplier of `d^k/dx^k` on bin `idx`; the Nyquist bin is dropped for `k ≥ 1`
/// so that real inputs stay real and `D` stays antisymmetric.
pub fn multiplier(idx: usize, n: usize, k: usize) -> C64 {
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    if n % 2 == 0 && idx == n / 2 {
        return C64::new(0.0, 0.0);
    }
    C64::new(0.0, TAU * freq(idx, n) as f64).powu(k as u32)
}

/// Cached forward/inverse FFT plans for one length.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spectral({})", self.n)
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, v: &mut [C64]) {
        self.fwd.process(v);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&self, v: &mut [C64]) {
        self.inv.process(v);
    }

    /// In-place `k`-th derivative of a grid function on the unit circle.
    pub fn deriv(&self, v: &mut [C64], k: usize) {
        if k == 0 {
            return;
        }
        debug_assert_eq!(v.len(), self.n);
        self.fwd.process(v);
        let scale = 1.0 / self.n as f64;
        for (i, c) in v.iter_mut().enumerate() {
            *c *= multiplier(i, self.n, k) * scale;
        }
        self.inv.process(v);
    }

    pub fn deriv_of(&self, v: &[C64], k: usize) -> Vec<C64> {
        let mut w = v.to_vec();
        self.deriv(&mut w, k);
        w
    }

    /// Convolution stencil `d_k` with `(D^k v)(x) = Σ_m d_k(m) v(x − m)`.
    pub fn deriv_stencil(&self, k: usize) -> Vec<C64> {
        let mut e = vec![C64::new(0.0, 0.0); self.n];
        e[0] = C64::new(1.0, 0.0);
        self.deriv(&mut e, k);
        e
    }
}

/// Stencils `d_0, …, d_max` for one grid size.
pub fn stencil_table(n: usize, max: usize) -> Vec<Vec<C64>> {
    let sp = Spectral::new(n);
    (0..=max).map(|k| sp.deriv_stencil(k)).collect()
}

/// `(D^k v)(x) = Σ_m d(m) v(x − m)` by direct summation, in a fixed order so
/// that index shifts commute with it bit for bit.
pub fn circulant_apply(stencil: &[C64], v: &[C64]) -> Vec<C64> {
    let n = v.len();
    (0..n)
        .map(|x| {
            let mut acc = C64::new(0.0, 0.0);
            for (m, d) in stencil.iter().enumerate() {
                acc += d * v[(x + n - m) % n];
            }
            acc
        })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
