//! The cotangent groupoid T*G ⇉ A*G of each model.
//!
//! Covectors are written in the global coordinate frame of G. For the pair
//! models a unit covector class is the single number `c` standing for the
//! conormal covector `(x, x, c, −c)` (with `σ = 0` on the Z factor).

use rand::Rng;

use crate::error::{GrpdError, Result};
use crate::models::{self, Element, GroupoidModel, ModelKind, Unit};

/// Covector matching tolerance for composability in T*G.
pub const COVECTOR_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    pub base: Element,
    pub covector: Vec<f64>,
}

/// A point of A*G: a unit together with its covector class.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentUnit {
    pub unit: Unit,
    pub class: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    KerSGamma,
    KerRGamma,
}

impl CotangentPoint {
    pub fn new(base: Element, covector: Vec<f64>) -> Result<Self> {
        if covector.len() != base.model().dim() {
            return Err(GrpdError::Domain(format!(
                "covector length {} does not match dim {}",
                covector.len(),
                base.model().dim()
            )));
        }
        if covector.iter().any(|c| !c.is_finite()) {
            return Err(GrpdError::Domain("non-finite covector".into()));
        }
        Ok(Self { base, covector })
    }

    pub fn model(&self) -> &GroupoidModel {
        self.base.model()
    }
}

impl CotangentUnit {
    /// The unit embedded as a point of T*G.
    pub fn embed(&self) -> Result<CotangentPoint> {
        let base = models::unit_embed(&self.unit)?;
        let cov = match self.unit.model().kind {
            ModelKind::PairCircle => vec![self.class[0], -self.class[0]],
            ModelKind::PairTimesZ => vec![self.class[0], -self.class[0], 0.0],
            ModelKind::CircleGroup | ModelKind::AffineGroup => self.class.clone(),
        };
        CotangentPoint::new(base, cov)
    }

    fn close_to(&self, other: &CotangentUnit) -> bool {
        self.unit == other.unit
            && self.class.len() == other.class.len()
            && self.class.iter().zip(&other.class).all(|(a, b)| (a - b).abs() <= COVECTOR_TOL)
    }
}

// Affine group Jacobians in (a, b) coordinates; all are constant along G.
pub(crate) type M2 = [[f64; 2]; 2];

pub(crate) fn jac_left(a: f64, _b: f64) -> M2 {
    [[a, 0.0], [0.0, a]]
}

pub(crate) fn jac_right(a: f64, b: f64) -> M2 {
    [[a, 0.0], [b, 1.0]]
}

fn jac_inverse(a: f64, b: f64) -> M2 {
    [[-1.0 / (a * a), 0.0], [b / (a * a), -1.0 / a]]
}

pub(crate) fn mat_t_vec(m: &M2, v: &[f64]) -> Vec<f64> {
    vec![m[0][0] * v[0] + m[1][0] * v[1], m[0][1] * v[0] + m[1][1] * v[1]]
}

/// Solves `mᵀ w = v`.
pub(crate) fn solve_t(m: &M2, v: &[f64]) -> Vec<f64> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    // inverse of the transpose
    let it = [[m[1][1] / det, -m[1][0] / det], [-m[0][1] / det, m[0][0] / det]];
    vec![it[0][0] * v[0] + it[0][1] * v[1], it[1][0] * v[0] + it[1][1] * v[1]]
}

/// `(s_Γ(δ), r_Γ(δ))`.
pub fn ct_anchor_maps(d: &CotangentPoint) -> Result<(CotangentUnit, CotangentUnit)> {
    let (s, r) = models::anchor_maps(&d.base)?;
    let c = &d.covector;
    let (cs, cr) = match d.model().kind {
        ModelKind::PairCircle | ModelKind::PairTimesZ => (vec![-c[1]], vec![c[0]]),
        ModelKind::CircleGroup => (vec![c[0]], vec![c[0]]),
        ModelKind::AffineGroup => {
            let (a, b) = d.base.affine_parts().expect("affine base");
            (mat_t_vec(&jac_left(a, b), c), mat_t_vec(&jac_right(a, b), c))
        }
    };
    Ok((CotangentUnit { unit: s, class: cs }, CotangentUnit { unit: r, class: cr }))
}

pub fn ct_is_composable(d1: &CotangentPoint, d2: &CotangentPoint) -> Result<bool> {
    if !models::is_composable(&d1.base, &d2.base)? {
        return Ok(false);
    }
    let s1 = ct_anchor_maps(d1)?.0;
    let r2 = ct_anchor_maps(d2)?.1;
    Ok(s1.close_to(&r2))
}

pub fn ct_multiply(d1: &CotangentPoint, d2: &CotangentPoint) -> Result<CotangentPoint> {
    if !ct_is_composable(d1, d2)? {
        return Err(GrpdError::Composability(format!(
            "cotangent points {:?}/{:?} and {:?}/{:?}",
            d1.base.coords(),
            d1.covector,
            d2.base.coords(),
            d2.covector
        )));
    }
    let base = models::multiply(&d1.base, &d2.base)?;
    let (c1, c2) = (&d1.covector, &d2.covector);
    let cov = match d1.model().kind {
        ModelKind::PairCircle => vec![c1[0], c2[1]],
        ModelKind::PairTimesZ => vec![c1[0], c2[1], c1[2] + c2[2]],
        ModelKind::CircleGroup => vec![c1[0]],
        ModelKind::AffineGroup => {
            // ᵗdm(ξ) = (ξ1, ξ2) with ∂m/∂g1 = J_R(g2)
            let (a2, b2) = d2.base.affine_parts().expect("affine base");
            solve_t(&jac_right(a2, b2), c1)
        }
    };
    CotangentPoint::new(base, cov)
}

pub fn ct_invert(d: &CotangentPoint) -> Result<CotangentPoint> {
    let base = models::invert(&d.base)?;
    let c = &d.covector;
    let cov = match d.model().kind {
        ModelKind::PairCircle => vec![-c[1], -c[0]],
        ModelKind::PairTimesZ => vec![-c[1], -c[0], -c[2]],
        ModelKind::CircleGroup => vec![c[0]],
        ModelKind::AffineGroup => {
            let (a, b) = d.base.affine_parts().expect("affine base");
            solve_t(&jac_inverse(a, b), c).into_iter().map(|v| -v).collect()
        }
    };
    CotangentPoint::new(base, cov)
}

/// Membership in ker s_Γ or ker r_Γ.
pub fn in_kernel(d: &CotangentPoint, which: KernelKind) -> Result<bool> {
    let (s, r) = ct_anchor_maps(d)?;
    let class = match which {
        KernelKind::KerSGamma => s.class,
        KernelKind::KerRGamma => r.class,
    };
    Ok(class.iter().all(|&v| v == 0.0))
}

/// Membership of a composable pair in ker m_Γ, i.e. the conormal space N*G^(2).
pub fn in_kernel_m(d1: &CotangentPoint, d2: &CotangentPoint) -> Result<bool> {
    if !ct_is_composable(d1, d2)? {
        return Err(GrpdError::Composability("ker m_Γ is defined on composable pairs".into()));
    }
    Ok(ct_multiply(d1, d2)?.covector.iter().all(|&v| v == 0.0))
}

/// Φ(g, ξ) = (g, R_g^* ξ).
pub fn transformation_iso_phi(d: &CotangentPoint) -> Result<(Element, Vec<f64>)> {
    match d.model().kind {
        ModelKind::CircleGroup => Ok((d.base.clone(), d.covector.clone())),
        ModelKind::AffineGroup => {
            let (a, b) = d.base.affine_parts().expect("affine base");
            Ok((d.base.clone(), mat_t_vec(&jac_right(a, b), &d.covector)))
        }
        _ => Err(GrpdError::Unsupported("Φ is defined for group models only".into())),
    }
}

/// Coadjoint action Ad*_g η = L_g^* R_{g⁻¹}^* η.
pub fn coadjoint(g: &Element, eta: &[f64]) -> Result<Vec<f64>> {
    match g.model().kind {
        ModelKind::CircleGroup => Ok(eta.to_vec()),
        ModelKind::AffineGroup => {
            let (a, b) = g.affine_parts().expect("affine base");
            let gi = models::invert(g)?;
            let (ai, bi) = gi.affine_parts().expect("affine base");
            Ok(mat_t_vec(&jac_left(a, b), &mat_t_vec(&jac_right(ai, bi), eta)))
        }
        _ => Err(GrpdError::Unsupported("coadjoint action needs a group model".into())),
    }
}

/// Product of the transformation groupoid G ⋉ 𝔤*: `(g1, η1)(g2, Ad*_{g1} η1) = (g1 g2, η1)`.
pub fn transformation_multiply(
    p1: &(Element, Vec<f64>),
    p2: &(Element, Vec<f64>),
) -> Result<(Element, Vec<f64>)> {
    let expect = coadjoint(&p1.0, &p1.1)?;
    if expect.iter().zip(&p2.1).any(|(a, b)| (a - b).abs() > COVECTOR_TOL * (1.0 + a.abs())) {
        return Err(GrpdError::Composability("η2 ≠ Ad*_{g1} η1".into()));
    }
    Ok((models::multiply(&p1.0, &p2.0)?, p1.1.clone()))
}

/// Residual of the conormal condition for Gr(m) at `(δ1δ2, δ1, δ2)` on the affine group:
/// `max |−ξ·dm(t1,t2) + ξ1·t1 + ξ2·t2|` over a coordinate basis of `(t1, t2)`,
/// with `dm` from central finite differences.
pub fn lagrangian_residual(d1: &CotangentPoint, d2: &CotangentPoint) -> Result<f64> {
    if d1.model().kind != ModelKind::AffineGroup {
        return Err(GrpdError::Unsupported("finite differences need the continuous model".into()));
    }
    let d = ct_multiply(d1, d2)?;
    let (a1, b1) = d1.base.affine_parts().expect("affine");
    let (a2, b2) = d2.base.affine_parts().expect("affine");
    let m = |p: [f64; 4]| [p[0] * p[2], p[0] * p[3] + p[1]];
    let h = 1e-5;
    let p0 = [a1, b1, a2, b2];
    let mut worst = 0.0f64;
    for j in 0..4 {
        let mut pp = p0;
        let mut pm = p0;
        pp[j] += h;
        pm[j] -= h;
        let (mp, mm) = (m(pp), m(pm));
        let dm = [(mp[0] - mm[0]) / (2.0 * h), (mp[1] - mm[1]) / (2.0 * h)];
        let mut t = [0.0; 4];
        t[j] = 1.0;
        let res = -(d.covector[0] * dm[0] + d.covector[1] * dm[1])
            + d1.covector[0] * t[0]
            + d1.covector[1] * t[1]
            + d2.covector[0] * t[2]
            + d2.covector[1] * t[3];
        worst = worst.max(res.abs());
    }
    Ok(worst)
}

fn random_covector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect()
}

/// A cotangent point whose target is the given unit covector.
fn sample_with_ct_target<R: Rng + ?Sized>(
    t: &CotangentUnit,
    rng: &mut R,
) -> Result<CotangentPoint> {
    let model = *t.unit.model();
    let base = models::sample_with_target(&t.unit, rng);
    let cov = match model.kind {
        ModelKind::PairCircle => vec![t.class[0], rng.gen_range(-4.0..4.0)],
        ModelKind::PairTimesZ => {
            vec![t.class[0], rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]
        }
        ModelKind::CircleGroup => t.class.clone(),
        ModelKind::AffineGroup => {
            let (a, b) = base.affine_parts().expect("affine");
            solve_t(&jac_right(a, b), &t.class)
        }
    };
    CotangentPoint::new(base, cov)
}

pub fn sample_cotangent_point<R: Rng + ?Sized>(model: GroupoidModel, rng: &mut R) -> CotangentPoint {
    let base = models::sample_element(model, rng);
    CotangentPoint::new(base, random_covector(model.dim(), rng)).expect("valid sample")
}

/// A composable pair `(δ1, δ2)` of cotangent points.
pub fn sample_composable_ct_pair<R: Rng + ?Sized>(
    model: GroupoidModel,
    rng: &mut R,
) -> (CotangentPoint, CotangentPoint) {
    let d1 = sample_cotangent_point(model, rng);
    let s1 = ct_anchor_maps(&d1).expect("valid").0;
    let d2 = sample_with_ct_target(&s1, rng).expect("valid");
    (d1, d2)
}

pub fn sample_composable_ct_triple<R: Rng + ?Sized>(
    model: GroupoidModel,
    rng: &mut R,
) -> (CotangentPoint, CotangentPoint, CotangentPoint) {
    let (d1, d2) = sample_composable_ct_pair(model, rng);
    let s2 = ct_anchor_maps(&d2).expect("valid").0;
    let d3 = sample_with_ct_target(&s2, rng).expect("valid");
    (d1, d2, d3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(coords: [f64; 4]) -> CotangentPoint {
        let m = GroupoidModel::pair_circle(16).unwrap();
        // 0.1, 0.4, 0.7 are off any dyadic grid: indices 1, 4, 7 stand in for them
        let b = Element::grid(m, &[(coords[0] * 10.0) as usize, (coords[1] * 10.0) as usize]).unwrap();
        CotangentPoint::new(b, vec![coords[2], coords[3]]).unwrap()
    }

    #[test]
    fn pair_anchor_example() {
        let d = pair([0.1, 0.4, 3.0, -2.0]);
        let (s, r) = ct_anchor_maps(&d).unwrap();
        assert_eq!(s.unit.indices(), &[4]);
        assert_eq!(s.class, vec![2.0]);
        assert_eq!(s.embed().unwrap().covector, vec![2.0, -2.0]);
        assert_eq!(r.unit.indices(), &[1]);
        assert_eq!(r.embed().unwrap().covector, vec![3.0, -3.0]);
    }

    #[test]
    fn pair_product_and_inverse() {
        let d1 = pair([0.1, 0.4, 3.0, -2.0]);
        let d2 = pair([0.4, 0.7, 2.0, 5.0]);
        let d = ct_multiply(&d1, &d2).unwrap();
        assert_eq!(d.base.indices().unwrap(), &[1, 7]);
        assert_eq!(d.covector, vec![3.0, 5.0]);

        let inv = ct_invert(&d1).unwrap();
        assert_eq!(inv.base.indices().unwrap(), &[4, 1]);
        assert_eq!(inv.covector, vec![2.0, -3.0]);
        let u = ct_multiply(&d1, &inv).unwrap();
        assert_eq!(u, ct_anchor_maps(&d1).unwrap().1.embed().unwrap());

        let bad = pair([0.4, 0.7, 1.0, 5.0]);
        assert!(matches!(ct_multiply(&d1, &bad), Err(GrpdError::Composability(_))));
    }

    #[test]
    fn ptz_product() {
        let m = GroupoidModel::pair_times_z(16, 8).unwrap();
        let d1 = CotangentPoint::new(Element::grid(m, &[1, 4, 2]).unwrap(), vec![3.0, -2.0, 1.0]).unwrap();
        let d2 = CotangentPoint::new(Element::grid(m, &[4, 7, 2]).unwrap(), vec![2.0, 5.0, 2.0]).unwrap();
        let d = ct_multiply(&d1, &d2).unwrap();
        assert_eq!(d.base.indices().unwrap(), &[1, 7, 2]);
        assert_eq!(d.covector, vec![3.0, 5.0, 3.0]);
        let (s, _) = ct_anchor_maps(&d1).unwrap();
        assert_eq!(s.embed().unwrap().covector, vec![2.0, -2.0, 0.0]);
    }

    #[test]
    fn circle_group_examples() {
        let m = GroupoidModel::circle_group(20usize.next_power_of_two()).unwrap();
        let d1 = CotangentPoint::new(Element::from_coords(m, &[0.25]).unwrap(), vec![4.0]).unwrap();
        let d2 = CotangentPoint::new(Element::from_coords(m, &[0.5]).unwrap(), vec![4.0]).unwrap();
        let d = ct_multiply(&d1, &d2).unwrap();
        assert_eq!(d.base.coords(), vec![0.75]);
        assert_eq!(d.covector, vec![4.0]);

        let m10 = GroupoidModel::circle_group(16).unwrap();
        let p = CotangentPoint::new(Element::grid(m10, &[3]).unwrap(), vec![5.0]).unwrap();
        let (s, r) = ct_anchor_maps(&p).unwrap();
        assert_eq!((s.class[0], r.class[0]), (5.0, 5.0));
        let inv = ct_invert(&p).unwrap();
        assert_eq!(inv.base.indices().unwrap(), &[13]);
        assert_eq!(inv.covector, vec![5.0]);
        assert_eq!(transformation_iso_phi(&p).unwrap().1, vec![5.0]);
    }

    #[test]
    fn affine_anchor_and_phi() {
        let g = Element::affine(2.0, 1.0).unwrap();
        let d = CotangentPoint::new(g.clone(), vec![1.0, 1.0]).unwrap();
        let (s, r) = ct_anchor_maps(&d).unwrap();
        assert_eq!(s.class, vec![2.0, 2.0]);
        assert_eq!(r.class, vec![3.0, 1.0]);
        assert_eq!(transformation_iso_phi(&d).unwrap().1, vec![3.0, 1.0]);
    }

    // dL and dR checked against the product law by central differences.
    #[test]
    fn affine_jacobians_match_finite_differences() {
        let (a, b) = (1.7, -0.6);
        let h = 1e-6;
        let mul = |p: (f64, f64), q: (f64, f64)| (p.0 * q.0, p.0 * q.1 + p.1);
        for (j, e) in [(1.0 + h, 0.0), (1.0, h)].iter().enumerate() {
            let em = if j == 0 { (1.0 - h, 0.0) } else { (1.0, -h) };
            let l = (mul((a, b), *e), mul((a, b), em));
            let r = (mul(*e, (a, b)), mul(em, (a, b)));
            let dl = [(l.0 .0 - l.1 .0) / (2.0 * h), (l.0 .1 - l.1 .1) / (2.0 * h)];
            let dr = [(r.0 .0 - r.1 .0) / (2.0 * h), (r.0 .1 - r.1 .1) / (2.0 * h)];
            let jl = jac_left(a, b);
            let jr = jac_right(a, b);
            for i in 0..2 {
                assert!((dl[i] - jl[i][j]).abs() < 1e-8);
                assert!((dr[i] - jr[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let d = pair([0.1, 0.4, 3.0, 0.0]);
        assert!(in_kernel(&d, KernelKind::KerSGamma).unwrap());
        let d = pair([0.1, 0.4, 3.0, -2.0]);
        assert!(!in_kernel(&d, KernelKind::KerRGamma).unwrap());
        let d1 = pair([0.1, 0.4, 0.0, 2.0]);
        let d2 = pair([0.4, 0.7, -2.0, 0.0]);
        assert!(in_kernel_m(&d1, &d2).unwrap());
        let d2b = pair([0.4, 0.7, -2.0, 1.0]);
        assert!(!in_kernel_m(&d1, &d2b).unwrap());
    }

    #[test]
    fn unit_points_are_self_inverse() {
        let m = GroupoidModel::pair_circle(8).unwrap();
        let u = CotangentUnit { unit: Unit::grid(m, &[3]).unwrap(), class: vec![1.5] };
        let p = u.embed().unwrap();
        assert_eq!(ct_invert(&p).unwrap(), p);
    }

    #[test]
    fn affine_lagrangian_and_transformation_product() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = GroupoidModel::affine_group();
        for _ in 0..50 {
            let (d1, d2) = sample_composable_ct_pair(m, &mut rng);
            assert!(lagrangian_residual(&d1, &d2).unwrap() < 1e-6);
            let lhs = transformation_iso_phi(&ct_multiply(&d1, &d2).unwrap()).unwrap();
            let rhs = transformation_multiply(
                &transformation_iso_phi(&d1).unwrap(),
                &transformation_iso_phi(&d2).unwrap(),
            )
            .unwrap();
            assert_eq!(lhs.0.coords(), rhs.0.coords());
            for (a, b) in lhs.1.iter().zip(&rhs.1) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
