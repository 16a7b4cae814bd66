//! Named constructors used by the tests, the CLI scenarios and the demo.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::distribution::{make_layer, Distribution};
use crate::error::{GrpdError, Result};
use crate::models::{GroupoidModel, ModelKind};
use crate::spectral::{freq, Spectral, C64};

fn circle_bump(t: f64, c: f64, width: f64) -> f64 {
    (((TAU * (t - c)).cos() - 1.0) / (TAU * TAU * width * width)).exp()
}

/// Periodic bump `Π exp((cos 2π(x_i − c_i) − 1)/(2πw)²)`, close to a Gaussian of
/// width `w` but smooth on the torus.
pub fn gaussian_bump(model: GroupoidModel, center: &[f64], width: f64) -> Result<Distribution> {
    let n = model.n;
    let nf = n as f64;
    let values: Vec<C64> = match model.kind {
        ModelKind::PairCircle => (0..n * n)
            .map(|i| {
                let (x, y) = ((i / n) as f64 / nf, (i % n) as f64 / nf);
                C64::new(circle_bump(x, center[0], width) * circle_bump(y, center[1], width), 0.0)
            })
            .collect(),
        ModelKind::CircleGroup => {
            (0..n).map(|i| C64::new(circle_bump(i as f64 / nf, center[0], width), 0.0)).collect()
        }
        k => return Err(GrpdError::Unsupported(format!("bump on {k:?}"))),
    };
    Distribution::smooth(model, values, "gaussian_bump")
}

/// `f ⊗ g` on the pair model.
pub fn rank_one(model: GroupoidModel, f: &[C64], g: &[C64]) -> Result<Distribution> {
    let n = model.n;
    if model.kind != ModelKind::PairCircle || f.len() != n || g.len() != n {
        return Err(GrpdError::Shape("rank_one needs two length-n vectors on PAIR_CIRCLE".into()));
    }
    Distribution::smooth(model, (0..n * n).map(|i| f[i / n] * g[i % n]).collect(), "rank_one")
}

/// Real trigonometric polynomial with frequencies `|k_i| ≤ band` and
/// uniformly random coefficients.
pub fn random_band_limited<R: Rng + ?Sized>(
    model: GroupoidModel,
    band: usize,
    rng: &mut R,
) -> Result<Distribution> {
    let n = model.n;
    let b = band as i64;
    let nf = n as f64;
    let values: Vec<C64> = match model.kind {
        ModelKind::PairCircle => {
            let mut v = vec![0.0; n * n];
            for k in -b..=b {
                for l in 0..=b {
                    if l == 0 && k < 0 {
                        continue;
                    }
                    let (a, s) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    for (i, out) in v.iter_mut().enumerate() {
                        let ph = TAU * (k as f64 * (i / n) as f64 + l as f64 * (i % n) as f64) / nf;
                        *out += a * ph.cos() + s * ph.sin();
                    }
                }
            }
            v.into_iter().map(|x| C64::new(x, 0.0)).collect()
        }
        ModelKind::CircleGroup => {
            let mut v = vec![0.0; n];
            for k in 0..=b {
                let (a, s) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                for (i, out) in v.iter_mut().enumerate() {
                    let ph = TAU * (k * i as i64) as f64 / nf;
                    *out += a * ph.cos() + s * ph.sin();
                }
            }
            v.into_iter().map(|x| C64::new(x, 0.0)).collect()
        }
        k => return Err(GrpdError::Unsupported(format!("band-limited field on {k:?}"))),
    };
    Distribution::smooth(model, values, "random_band_limited")
}

/// Smooth positive coefficient profile `1 + a·cos(2π(x − φ))` on the section.
pub fn smooth_coeffs(n: usize, a: f64, phase: f64) -> Vec<C64> {
    (0..n).map(|i| C64::new(1.0 + a * (TAU * (i as f64 / n as f64 - phase)).cos(), 0.0)).collect()
}

/// `Λ_θ` with constant coefficient 1.
pub fn rotation_layer(model: GroupoidModel, theta: usize, order: usize) -> Result<Distribution> {
    let len = if model.kind == ModelKind::PairCircle { model.n } else { 1 };
    make_layer(model, theta, vec![C64::new(1.0, 0.0); len], order)
}

/// Smooth step, 0 on `(−∞, 1/2]`, 1 on `[1, ∞)`.
pub fn cutoff(t: f64) -> f64 {
    let u = (t - 0.5) * 2.0;
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| (-1.0 / s).exp();
    f(u) / (f(u) + f(1.0 - u))
}

/// Inverse DFT of `û(ξ, η) = χ(|ξ|) exp(−η²/(2ξ²))`, `ξ` dual to the first
/// coordinate, on the frequencies `|ξ|, |η| < n/2`. The result is real, its
/// sums over `x` vanish, and it is transversal to `s` while its wave front set
/// at the origin contains `(±1, 0)`.
pub fn counterexample_distribution(n: usize) -> Result<Distribution> {
    if n < 64 {
        return Err(GrpdError::Domain(format!("counterexample needs n ≥ 64, got {n}")));
    }
    let model = GroupoidModel::pair_circle(n)?;
    let half = (n / 2) as i64;
    let mut hat = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let xi = freq(i, n);
        if xi.abs() >= half {
            continue;
        }
        let chi = cutoff(xi.abs() as f64);
        if chi == 0.0 {
            continue;
        }
        for j in 0..n {
            let eta = freq(j, n);
            if eta.abs() >= half {
                continue;
            }
            let r = eta as f64 / xi as f64;
            hat[i * n + j] = C64::new(chi * (-0.5 * r * r).exp(), 0.0);
        }
    }
    let u = inverse_dft2(n, hat);
    Ok(Distribution::smooth(model, u, "counterexample")?.with_label(format!("counterexample(n={n})")))
}

/// `(1/n²) Σ_{k,l} ĥ(k,l) e^{2πi(kx + ly)/n}` with real part kept exactly
/// (imaginary rounding dropped for Hermitian input).
pub fn inverse_dft2(n: usize, mut hat: Vec<C64>) -> Vec<C64> {
    let sp = Spectral::new(n);
    for row in hat.chunks_mut(n) {
        sp.inverse(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = hat[i * n + j];
        }
        sp.inverse(&mut col);
        for i in 0..n {
            hat[i * n + j] = col[i];
        }
    }
    let s = 1.0 / (n * n) as f64;
    hat.into_iter().map(|c| C64::new(c.re * s, 0.0)).collect()
}

/// Forward 2-D DFT, unnormalized.
pub fn dft2(n: usize, mut v: Vec<C64>) -> Vec<C64> {
    let sp = Spectral::new(n);
    for row in v.chunks_mut(n) {
        sp.forward(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = v[i * n + j];
        }
        sp.forward(&mut col);
        for i in 0..n {
            v[i * n + j] = col[i];
        }
    }
    v
}

pub fn angle_of(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]).rem_euclid(TAU)
}

/// Degrees to radians.
pub fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{pushforward_base, Anchor, TestFunction};
    use crate::grid::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cutoff_is_a_smooth_step() {
        assert_eq!(cutoff(0.0), 0.0);
        assert_eq!(cutoff(0.5), 0.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert!((cutoff(0.75) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn counterexample_is_real_with_vanishing_column_sums() {
        let n = 64;
        let u = counterexample_distribution(n).unwrap();
        let s = u.smooth.as_ref().unwrap();
        let top = max_abs(s);
        for y in 0..n {
            let col: C64 = (0..n).map(|x| s[x * n + y]).sum();
            assert!(col.norm() < 1e-10 * top.max(1.0), "column {y}: {col}");
        }
        assert!(counterexample_distribution(32).is_err());
    }

    #[test]
    fn counterexample_s_pushforward_is_smooth() {
        let n = 128;
        let u = counterexample_distribution(n).unwrap();
        let f = TestFunction::from_fn(u.model, |p| {
            C64::new((TAU * p[0]).cos().exp() * (1.0 + 0.5 * (TAU * p[1]).sin()), 0.0)
        })
        .unwrap();
        let mut pf = pushforward_base(&u, &f, Anchor::AlongS).unwrap();
        Spectral::new(n).forward(&mut pf);
        let scale = 1.0 / n as f64;
        let tail = (0..n).filter(|&k| freq(k, n).unsigned_abs() as usize > n / 4).fold(0.0f64, |m, k| m.max(pf[k].norm() * scale));
        assert!(tail < 1e-8, "tail {tail}");
    }

    #[test]
    fn band_limited_fields_are_real() {
        let m = GroupoidModel::pair_circle(32).unwrap();
        let u = random_band_limited(m, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(u.smooth.unwrap().iter().all(|c| c.im == 0.0));
        let b = gaussian_bump(m, &[0.5, 0.5], 0.08).unwrap();
        assert!((b.smooth.unwrap()[16 * 32 + 16].re - 1.0).abs() < 1e-15);
    }
}
