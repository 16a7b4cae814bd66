//! The four concrete groupoid models and their structural maps.
//!
//! Grid models store elements as integer indices so that composability and the
//! groupoid axioms are decided exactly. Circle coordinates are `k/n` in `[0, 1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GrpdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    PairCircle,
    CircleGroup,
    PairTimesZ,
    AffineGroup,
}

#[derive(Deserialize)]
struct RawModel {
    kind: ModelKind,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    m_z: Option<usize>,
}

/// Descriptor of one concrete groupoid. Serializes as `{"kind": "PAIR_CIRCLE", "n": 128}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct GroupoidModel {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "is_zero")]
    pub n: usize,
    #[serde(skip_serializing_if = "is_zero")]
    pub m_z: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl TryFrom<RawModel> for GroupoidModel {
    type Error = GrpdError;
    fn try_from(raw: RawModel) -> Result<Self> {
        match raw.kind {
            ModelKind::AffineGroup => Ok(GroupoidModel::affine_group()),
            ModelKind::PairCircle => GroupoidModel::pair_circle(req_n(raw.n)?),
            ModelKind::CircleGroup => GroupoidModel::circle_group(req_n(raw.n)?),
            ModelKind::PairTimesZ => GroupoidModel::pair_times_z(
                req_n(raw.n)?,
                raw.m_z
                    .ok_or_else(|| GrpdError::Domain("PAIR_TIMES_Z needs m_z".into()))?,
            ),
        }
    }
}

fn req_n(n: Option<usize>) -> Result<usize> {
    n.ok_or_else(|| GrpdError::Domain("grid model needs n".into()))
}

fn check_resolution(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min || !n.is_power_of_two() {
        return Err(GrpdError::Domain(format!(
            "{what} = {n} must be a power of two >= {min}"
        )));
    }
    Ok(())
}

impl GroupoidModel {
    pub fn pair_circle(n: usize) -> Result<Self> {
        check_resolution(n, 8, "n")?;
        Ok(Self { kind: ModelKind::PairCircle, n, m_z: 0 })
    }

    pub fn circle_group(n: usize) -> Result<Self> {
        check_resolution(n, 8, "n")?;
        Ok(Self { kind: ModelKind::CircleGroup, n, m_z: 0 })
    }

    pub fn pair_times_z(n: usize, m_z: usize) -> Result<Self> {
        check_resolution(n, 8, "n")?;
        check_resolution(m_z, 1, "m_z")?;
        Ok(Self { kind: ModelKind::PairTimesZ, n, m_z })
    }

    pub fn affine_group() -> Self {
        Self { kind: ModelKind::AffineGroup, n: 0, m_z: 0 }
    }

    pub fn continuous(&self) -> bool {
        self.kind == ModelKind::AffineGroup
    }

    /// Dimension of G.
    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::CircleGroup => 1,
            ModelKind::PairCircle | ModelKind::AffineGroup => 2,
            ModelKind::PairTimesZ => 3,
        }
    }

    /// Grid shape of G, row-major. Empty for the continuous model.
    pub fn grid_dims(&self) -> Vec<usize> {
        match self.kind {
            ModelKind::PairCircle => vec![self.n, self.n],
            ModelKind::CircleGroup => vec![self.n],
            ModelKind::PairTimesZ => vec![self.n, self.n, self.m_z],
            ModelKind::AffineGroup => vec![],
        }
    }

    /// Grid shape of the unit space. The group has a single unit.
    pub fn unit_dims(&self) -> Vec<usize> {
        match self.kind {
            ModelKind::PairCircle => vec![self.n],
            ModelKind::CircleGroup | ModelKind::AffineGroup => vec![],
            ModelKind::PairTimesZ => vec![self.n, self.m_z],
        }
    }

    /// Resolution of each coordinate axis (circle factors use `n`, the Z factor `m_z`).
    pub fn axis_len(&self, axis: usize) -> usize {
        if self.kind == ModelKind::PairTimesZ && axis == 2 {
            self.m_z
        } else {
            self.n
        }
    }

    pub fn require_grid(&self) -> Result<()> {
        if self.continuous() {
            Err(GrpdError::Unsupported("AFFINE_GROUP carries no grid".into()))
        } else {
            Ok(())
        }
    }

    pub fn require_same(&self, other: &GroupoidModel) -> Result<()> {
        if self != other {
            return Err(GrpdError::ModelMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Grid(Vec<usize>),
    Affine(f64, f64),
}

/// A point of G.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    model: GroupoidModel,
    repr: Repr,
}

/// A point of the unit space G^(0).
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    model: GroupoidModel,
    idx: Vec<usize>,
}

fn index_of(x: f64, len: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&x) {
        return Err(GrpdError::Domain(format!("circle coordinate {x} outside [0,1)")));
    }
    let k = x * len as f64;
    let r = k.round();
    if (k - r).abs() > 1e-9 {
        return Err(GrpdError::Domain(format!("coordinate {x} is off the 1/{len} grid")));
    }
    Ok(r as usize % len)
}

impl Element {
    /// Element from grid indices.
    pub fn grid(model: GroupoidModel, idx: &[usize]) -> Result<Self> {
        model.require_grid()?;
        if idx.len() != model.dim() {
            return Err(GrpdError::Domain(format!(
                "expected {} indices, got {}",
                model.dim(),
                idx.len()
            )));
        }
        for (axis, &k) in idx.iter().enumerate() {
            if k >= model.axis_len(axis) {
                return Err(GrpdError::Domain(format!("index {k} out of range on axis {axis}")));
            }
        }
        Ok(Self { model, repr: Repr::Grid(idx.to_vec()) })
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(GrpdError::Domain(format!("affine element needs a > 0, got ({a}, {b})")));
        }
        Ok(Self { model: GroupoidModel::affine_group(), repr: Repr::Affine(a, b) })
    }

    /// Element from real coordinates; grid models require on-grid values in `[0, 1)`.
    pub fn from_coords(model: GroupoidModel, coords: &[f64]) -> Result<Self> {
        if model.continuous() {
            if coords.len() != 2 {
                return Err(GrpdError::Domain("affine element needs 2 coordinates".into()));
            }
            return Self::affine(coords[0], coords[1]);
        }
        if coords.len() != model.dim() {
            return Err(GrpdError::Domain(format!(
                "expected {} coordinates, got {}",
                model.dim(),
                coords.len()
            )));
        }
        let idx = coords
            .iter()
            .enumerate()
            .map(|(axis, &x)| index_of(x, model.axis_len(axis)))
            .collect::<Result<Vec<_>>>()?;
        Self::grid(model, &idx)
    }

    pub fn model(&self) -> &GroupoidModel {
        &self.model
    }

    /// Grid indices; `None` for the affine group.
    pub fn indices(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Grid(v) => Some(v),
            Repr::Affine(..) => None,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Grid(v) => v
                .iter()
                .enumerate()
                .map(|(axis, &k)| k as f64 / self.model.axis_len(axis) as f64)
                .collect(),
            Repr::Affine(a, b) => vec![*a, *b],
        }
    }

    pub(crate) fn affine_parts(&self) -> Option<(f64, f64)> {
        match self.repr {
            Repr::Affine(a, b) => Some((a, b)),
            Repr::Grid(_) => None,
        }
    }
}

impl Unit {
    pub fn grid(model: GroupoidModel, idx: &[usize]) -> Result<Self> {
        let dims = model.unit_dims();
        if idx.len() != dims.len() {
            return Err(GrpdError::Domain(format!(
                "unit needs {} indices, got {}",
                dims.len(),
                idx.len()
            )));
        }
        if idx.iter().zip(&dims).any(|(&k, &d)| k >= d) {
            return Err(GrpdError::Domain("unit index out of range".into()));
        }
        Ok(Self { model, idx: idx.to_vec() })
    }

    /// The unique unit of a group model.
    pub fn identity(model: GroupoidModel) -> Result<Self> {
        match model.kind {
            ModelKind::CircleGroup | ModelKind::AffineGroup => Ok(Self { model, idx: vec![] }),
            _ => Err(GrpdError::Domain("pair models have no distinguished unit".into())),
        }
    }

    pub fn from_coords(model: GroupoidModel, coords: &[f64]) -> Result<Self> {
        match model.kind {
            ModelKind::AffineGroup => {
                if coords != [1.0, 0.0] {
                    return Err(GrpdError::Domain("the affine unit is (1, 0)".into()));
                }
                Self::identity(model)
            }
            ModelKind::CircleGroup => Self::identity(model),
            ModelKind::PairCircle => Self::grid(model, &[index_of(*coord(coords, 0)?, model.n)?]),
            ModelKind::PairTimesZ => Self::grid(
                model,
                &[
                    index_of(*coord(coords, 0)?, model.n)?,
                    index_of(*coord(coords, 1)?, model.m_z)?,
                ],
            ),
        }
    }

    pub fn model(&self) -> &GroupoidModel {
        &self.model
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn coords(&self) -> Vec<f64> {
        match self.model.kind {
            ModelKind::AffineGroup => vec![1.0, 0.0],
            ModelKind::CircleGroup => vec![0.0],
            ModelKind::PairCircle => vec![self.idx[0] as f64 / self.model.n as f64],
            ModelKind::PairTimesZ => vec![
                self.idx[0] as f64 / self.model.n as f64,
                self.idx[1] as f64 / self.model.m_z as f64,
            ],
        }
    }
}

fn coord(c: &[f64], i: usize) -> Result<&f64> {
    c.get(i).ok_or_else(|| GrpdError::Domain("missing unit coordinate".into()))
}

/// `(s(γ), r(γ))`.
pub fn anchor_maps(g: &Element) -> Result<(Unit, Unit)> {
    let m = g.model;
    match &g.repr {
        Repr::Affine(..) => Ok((Unit::identity(m)?, Unit::identity(m)?)),
        Repr::Grid(v) => match m.kind {
            ModelKind::PairCircle => Ok((Unit::grid(m, &[v[1]])?, Unit::grid(m, &[v[0]])?)),
            ModelKind::PairTimesZ => {
                Ok((Unit::grid(m, &[v[1], v[2]])?, Unit::grid(m, &[v[0], v[2]])?))
            }
            ModelKind::CircleGroup => Ok((Unit::identity(m)?, Unit::identity(m)?)),
            ModelKind::AffineGroup => unreachable!(),
        },
    }
}

pub fn source(g: &Element) -> Result<Unit> {
    Ok(anchor_maps(g)?.0)
}

pub fn target(g: &Element) -> Result<Unit> {
    Ok(anchor_maps(g)?.1)
}

pub fn is_composable(g1: &Element, g2: &Element) -> Result<bool> {
    g1.model.require_same(&g2.model)?;
    Ok(source(g1)? == target(g2)?)
}

pub fn multiply(g1: &Element, g2: &Element) -> Result<Element> {
    if !is_composable(g1, g2)? {
        return Err(GrpdError::Composability(format!("{:?} · {:?}", g1.coords(), g2.coords())));
    }
    let m = g1.model;
    match (&g1.repr, &g2.repr) {
        (Repr::Affine(a1, b1), Repr::Affine(a2, b2)) => Element::affine(a1 * a2, a1 * b2 + b1),
        (Repr::Grid(u), Repr::Grid(v)) => match m.kind {
            ModelKind::PairCircle => Element::grid(m, &[u[0], v[1]]),
            ModelKind::PairTimesZ => Element::grid(m, &[u[0], v[1], u[2]]),
            ModelKind::CircleGroup => Element::grid(m, &[(u[0] + v[0]) % m.n]),
            ModelKind::AffineGroup => unreachable!(),
        },
        _ => unreachable!("representation follows the model"),
    }
}

pub fn invert(g: &Element) -> Result<Element> {
    let m = g.model;
    match &g.repr {
        Repr::Affine(a, b) => Element::affine(1.0 / a, -b / a),
        Repr::Grid(v) => match m.kind {
            ModelKind::PairCircle => Element::grid(m, &[v[1], v[0]]),
            ModelKind::PairTimesZ => Element::grid(m, &[v[1], v[0], v[2]]),
            ModelKind::CircleGroup => Element::grid(m, &[(m.n - v[0]) % m.n]),
            ModelKind::AffineGroup => unreachable!(),
        },
    }
}

pub fn unit_embed(x: &Unit) -> Result<Element> {
    let m = x.model;
    match m.kind {
        ModelKind::PairCircle => Element::grid(m, &[x.idx[0], x.idx[0]]),
        ModelKind::PairTimesZ => Element::grid(m, &[x.idx[0], x.idx[0], x.idx[1]]),
        ModelKind::CircleGroup => Element::grid(m, &[0]),
        ModelKind::AffineGroup => Element::affine(1.0, 0.0),
    }
}

/// Uniform element of a grid model; log-uniform `a` and bounded `b` for the affine group.
pub fn sample_element<R: Rng + ?Sized>(model: GroupoidModel, rng: &mut R) -> Element {
    if model.continuous() {
        let a = (rng.gen_range(-1.5f64..1.5)).exp();
        let b = rng.gen_range(-2.0..2.0);
        return Element::affine(a, b).expect("sampled affine element is valid");
    }
    let idx: Vec<usize> = (0..model.dim()).map(|ax| rng.gen_range(0..model.axis_len(ax))).collect();
    Element::grid(model, &idx).expect("sampled indices are in range")
}

/// An element whose target is the given unit.
pub fn sample_with_target<R: Rng + ?Sized>(x: &Unit, rng: &mut R) -> Element {
    let m = x.model;
    match m.kind {
        ModelKind::PairCircle => Element::grid(m, &[x.idx[0], rng.gen_range(0..m.n)]),
        ModelKind::PairTimesZ => Element::grid(m, &[x.idx[0], rng.gen_range(0..m.n), x.idx[1]]),
        _ => Ok(sample_element(m, rng)),
    }
    .expect("sampled indices are in range")
}

/// A composable triple `(γ1, γ2, γ3)`.
pub fn sample_composable_triple<R: Rng + ?Sized>(
    model: GroupoidModel,
    rng: &mut R,
) -> (Element, Element, Element) {
    let g1 = sample_element(model, rng);
    let g2 = sample_with_target(&source(&g1).expect("valid"), rng);
    let g3 = sample_with_target(&source(&g2).expect("valid"), rng);
    (g1, g2, g3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair8() -> GroupoidModel {
        GroupoidModel::pair_circle(8).unwrap()
    }

    #[test]
    fn anchor_examples() {
        let g = Element::from_coords(pair8(), &[0.25, 0.5]).unwrap();
        let (s, r) = anchor_maps(&g).unwrap();
        assert_eq!(s.coords(), vec![0.5]);
        assert_eq!(r.coords(), vec![0.25]);

        let m = GroupoidModel::pair_times_z(8, 8).unwrap();
        let g = Element::from_coords(m, &[0.25, 0.5, 0.125]).unwrap();
        let (s, r) = anchor_maps(&g).unwrap();
        assert_eq!(s.coords(), vec![0.5, 0.125]);
        assert_eq!(r.coords(), vec![0.25, 0.125]);

        let g = Element::affine(2.0, 1.0).unwrap();
        let (s, r) = anchor_maps(&g).unwrap();
        assert_eq!(s.coords(), vec![1.0, 0.0]);
        assert_eq!(r.coords(), vec![1.0, 0.0]);
    }

    #[test]
    fn multiply_examples() {
        let a = Element::from_coords(pair8(), &[0.25, 0.5]).unwrap();
        let b = Element::from_coords(pair8(), &[0.5, 0.75]).unwrap();
        assert_eq!(multiply(&a, &b).unwrap().coords(), vec![0.25, 0.75]);

        let c = Element::from_coords(pair8(), &[0.25, 0.75]).unwrap();
        assert!(!is_composable(&a, &c).unwrap());
        assert!(matches!(multiply(&a, &c), Err(GrpdError::Composability(_))));

        let grp = GroupoidModel::circle_group(8).unwrap();
        let x = Element::from_coords(grp, &[0.75]).unwrap();
        let y = Element::from_coords(grp, &[0.5]).unwrap();
        assert!(is_composable(&x, &y).unwrap());
        assert_eq!(multiply(&x, &y).unwrap().coords(), vec![0.25]);

        let p = Element::affine(2.0, 1.0).unwrap();
        let q = Element::affine(3.0, 4.0).unwrap();
        assert_eq!(multiply(&p, &q).unwrap().coords(), vec![6.0, 9.0]);
    }

    #[test]
    fn invert_examples() {
        let a = Element::from_coords(pair8(), &[0.25, 0.5]).unwrap();
        assert_eq!(invert(&a).unwrap().coords(), vec![0.5, 0.25]);
        let grp = GroupoidModel::circle_group(8).unwrap();
        let x = Element::from_coords(grp, &[0.75]).unwrap();
        assert_eq!(invert(&x).unwrap().coords(), vec![0.25]);
        // hand solve of (2,1)·(a,b) = (1,0): a = 1/2, b = -1/2
        let g = Element::affine(2.0, 1.0).unwrap();
        assert_eq!(invert(&g).unwrap().coords(), vec![0.5, -0.5]);
    }

    #[test]
    fn unit_embed_examples() {
        let x = Unit::from_coords(pair8(), &[0.5]).unwrap();
        assert_eq!(unit_embed(&x).unwrap().coords(), vec![0.5, 0.5]);
        let m = GroupoidModel::pair_times_z(8, 4).unwrap();
        let x = Unit::from_coords(m, &[0.5, 0.25]).unwrap();
        assert_eq!(unit_embed(&x).unwrap().coords(), vec![0.5, 0.5, 0.25]);
        let e = Unit::from_coords(GroupoidModel::affine_group(), &[1.0, 0.0]).unwrap();
        assert_eq!(unit_embed(&e).unwrap().coords(), vec![1.0, 0.0]);
    }

    #[test]
    fn domain_errors() {
        assert!(Element::from_coords(pair8(), &[0.3, 0.5]).is_err());
        assert!(Element::from_coords(pair8(), &[1.0, 0.5]).is_err());
        assert!(Element::affine(0.0, 1.0).is_err());
        assert!(GroupoidModel::pair_circle(12).is_err());
        assert!(GroupoidModel::pair_circle(4).is_err());
        let grp = GroupoidModel::circle_group(8).unwrap();
        let x = Element::grid(grp, &[1]).unwrap();
        let y = Element::grid(pair8(), &[1, 1]).unwrap();
        assert!(matches!(is_composable(&x, &y), Err(GrpdError::ModelMismatch(_))));
    }

    #[test]
    fn json_descriptor() {
        let m: GroupoidModel =
            serde_json::from_str(r#"{"kind":"PAIR_TIMES_Z","n":128,"m_z":16}"#).unwrap();
        assert_eq!(m, GroupoidModel::pair_times_z(128, 16).unwrap());
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"PAIR_TIMES_Z","n":128,"m_z":16}"#);
        let p: GroupoidModel = serde_json::from_str(r#"{"kind":"PAIR_CIRCLE","n":128,"m_z":16}"#).unwrap();
        assert_eq!(p, GroupoidModel::pair_circle(128).unwrap());
        assert!(serde_json::from_str::<GroupoidModel>(r#"{"kind":"PAIR_CIRCLE","n":100}"#).is_err());
        let a: GroupoidModel = serde_json::from_str(r#"{"kind":"AFFINE_GROUP"}"#).unwrap();
        assert!(a.continuous());
    }
}
