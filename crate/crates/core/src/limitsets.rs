//! Closed-form Kulkarni and dual limit sets of the canonical cyclic groups,
//! with distance and invariance evaluation against descriptors.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{canonical_form, ElementClass, Fine};
use crate::dynamics::{point_rng, random_point, random_quaternion, Direction, Subspace};
use crate::error::{Error, Result};
use crate::hmat::{HMat3, HVec3};
use crate::projective::{
    apply, basis_line, chordal_dist, complex_line_residual, complex_span_basis, line_through, point_line_dist,
    subspace_dist, ProjLine, ProjPoint,
};
use crate::quat::Quaternion;
use crate::spectra::{fixed_points, FixedComponent, FixedSet, RANK_TOL};

/// Symbolic subset of ℙ²_ℍ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Repr", try_from = "Repr")]
pub enum LimitSetDescriptor {
    Empty,
    FinitePoints(Vec<ProjPoint>),
    Lines(Vec<ProjLine>),
    /// Complex projective line through two basis points (indices 0..3).
    ComplexLine([usize; 2]),
    FixedPointSet(FixedSet),
    WholeSpace,
    /// ℙ²_ℂ embedded through ℂ = span{1, i}.
    ComplexPlaneP2C,
    Union(Vec<LimitSetDescriptor>),
}

impl LimitSetDescriptor {
    pub fn points(ps: Vec<ProjPoint>) -> Self {
        LimitSetDescriptor::FinitePoints(ps)
    }

    /// Basis points `e_{i+1}` by index.
    pub fn basis_points(idx: &[usize]) -> Self {
        LimitSetDescriptor::FinitePoints(idx.iter().map(|&i| ProjPoint::basis(i)).collect())
    }

    /// Union of basis lines `𝕃{e_{i+1}, e_{j+1}}`.
    pub fn basis_lines(pairs: &[(usize, usize)]) -> Self {
        LimitSetDescriptor::Lines(pairs.iter().map(|&(i, j)| basis_line(i, j)).collect())
    }

    /// Union dropping empty members and collapsing a single member.
    pub fn union(members: Vec<LimitSetDescriptor>) -> Self {
        let mut ms: Vec<_> = members.into_iter().filter(|m| !m.is_empty()).collect();
        match ms.len() {
            0 => LimitSetDescriptor::Empty,
            1 => ms.pop().expect("one member"),
            _ => LimitSetDescriptor::Union(ms),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            LimitSetDescriptor::Empty => true,
            LimitSetDescriptor::FinitePoints(v) => v.is_empty(),
            LimitSetDescriptor::Lines(v) => v.is_empty(),
            LimitSetDescriptor::FixedPointSet(f) => f.components.is_empty(),
            LimitSetDescriptor::Union(v) => v.iter().all(|m| m.is_empty()),
            _ => false,
        }
    }

    /// Empty or the whole space; such sets are invariant under every map.
    pub fn is_trivial(&self) -> bool {
        self.is_empty() || flatten(self).iter().any(|a| matches!(a, Atom::Whole))
    }
}

/// Elementary pieces of a descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    Point(ProjPoint),
    Line(ProjLine),
    /// Projective points of the right-ℂ span of the given vectors.
    ComplexSpan(Vec<HVec3>),
    Whole,
}

/// Flattens unions, point lists and fixed-point sets into atoms.
pub fn flatten(d: &LimitSetDescriptor) -> Vec<Atom> {
    match d {
        LimitSetDescriptor::Empty => vec![],
        LimitSetDescriptor::FinitePoints(ps) => ps.iter().map(|p| Atom::Point(*p)).collect(),
        LimitSetDescriptor::Lines(ls) => ls.iter().map(|l| Atom::Line(*l)).collect(),
        LimitSetDescriptor::ComplexLine([i, j]) => vec![Atom::ComplexSpan(vec![HVec3::basis(*i), HVec3::basis(*j)])],
        LimitSetDescriptor::FixedPointSet(f) => f
            .components
            .iter()
            .map(|c| match c {
                FixedComponent::Point(p) => Atom::Point(*p),
                FixedComponent::Line(l) => Atom::Line(*l),
                FixedComponent::ComplexLine(b) => Atom::ComplexSpan(b.to_vec()),
                FixedComponent::ComplexPlane(b) => Atom::ComplexSpan(b.to_vec()),
                FixedComponent::Whole => Atom::Whole,
            })
            .collect(),
        LimitSetDescriptor::WholeSpace => vec![Atom::Whole],
        LimitSetDescriptor::ComplexPlaneP2C => {
            vec![Atom::ComplexSpan((0..3).map(HVec3::basis).collect())]
        }
        LimitSetDescriptor::Union(ms) => ms.iter().flat_map(flatten).collect(),
    }
}

fn fixed_component_dist(p: &ProjPoint, c: &FixedComponent) -> f64 {
    match c {
        FixedComponent::Point(q) => chordal_dist(p, q),
        FixedComponent::Line(l) => point_line_dist(p, l),
        FixedComponent::ComplexLine(b) => subspace_dist(p, &complex_span_basis(b)),
        FixedComponent::ComplexPlane(b) => subspace_dist(p, &complex_span_basis(b)),
        FixedComponent::Whole => 0.0,
    }
}

/// Infimum of chordal distances from `p` to the set (∞ for the empty set).
pub fn descriptor_dist(p: &ProjPoint, d: &LimitSetDescriptor) -> f64 {
    let min = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    match d {
        LimitSetDescriptor::Empty => f64::INFINITY,
        LimitSetDescriptor::FinitePoints(ps) => min(&mut ps.iter().map(|q| chordal_dist(p, q))),
        LimitSetDescriptor::Lines(ls) => min(&mut ls.iter().map(|l| point_line_dist(p, l))),
        LimitSetDescriptor::ComplexLine([i, j]) => {
            point_line_dist(p, &basis_line(*i, *j)).max(complex_line_residual(p, *i, *j))
        }
        LimitSetDescriptor::FixedPointSet(f) => min(&mut f.components.iter().map(|c| fixed_component_dist(p, c))),
        LimitSetDescriptor::WholeSpace => 0.0,
        LimitSetDescriptor::ComplexPlaneP2C => {
            let v = p.rep();
            (0..3).map(|i| v[i].jk_norm()).fold(0.0, f64::max)
        }
        LimitSetDescriptor::Union(ms) => min(&mut ms.iter().map(|m| descriptor_dist(p, m))),
    }
}

fn random_complex<R: Rng>(rng: &mut R) -> Quaternion {
    let q = random_quaternion(rng);
    Quaternion::from_complex(Complex64::new(q.w, q.x))
}

/// Up to `count` points of an atom (a point atom yields itself once).
pub fn sample_atom<R: Rng>(atom: &Atom, count: usize, rng: &mut R) -> Vec<ProjPoint> {
    let mut out = Vec::with_capacity(count);
    match atom {
        Atom::Point(p) => out.push(*p),
        Atom::Line(l) => {
            let [u, v] = l.orthonormal_span();
            while out.len() < count {
                let w = u.scale_right(random_quaternion(rng)).add(v.scale_right(random_quaternion(rng)));
                if let Ok(p) = ProjPoint::new(w) {
                    out.push(p);
                }
            }
        }
        Atom::ComplexSpan(b) => {
            while out.len() < count {
                let w = b
                    .iter()
                    .fold(HVec3::real(0.0, 0.0, 0.0), |acc, v| acc.add(v.scale_right(random_complex(rng))));
                if let Ok(p) = ProjPoint::new(w) {
                    out.push(p);
                }
            }
        }
        Atom::Whole => {
            while out.len() < count {
                out.push(random_point(rng));
            }
        }
    }
    out
}

/// `a ⊆ b` checked on sampled points of every atom of `a`.
pub fn descriptor_subset(a: &LimitSetDescriptor, b: &LimitSetDescriptor, samples: usize, tol: f64) -> bool {
    let mut rng = point_rng(0x5eed, 0);
    flatten(a)
        .iter()
        .all(|atom| sample_atom(atom, samples, &mut rng).iter().all(|p| descriptor_dist(p, b) <= tol))
}

/// Set equality by two-sided sampled containment.
pub fn descriptor_set_eq(a: &LimitSetDescriptor, b: &LimitSetDescriptor) -> bool {
    descriptor_subset(a, b, 32, 1e-9) && descriptor_subset(b, a, 32, 1e-9)
}

/// Largest `descriptor_dist(g(p), d)` over points sampled on `d` (`samples`
/// per non-point atom). A value above `tol` is reported as a consistency
/// error naming the worst offender.
pub fn descriptor_invariance_check(
    g: &HMat3,
    d: &LimitSetDescriptor,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<f64> {
    if d.is_trivial() {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    let mut offender = None;
    for (k, atom) in flatten(d).iter().enumerate() {
        let mut rng = point_rng(seed, k as u64);
        for p in sample_atom(atom, samples, &mut rng) {
            let dist = descriptor_dist(&apply(g, &p)?, d);
            if dist > worst {
                worst = dist;
                offender = Some(p);
            }
        }
    }
    if worst > tol {
        return Err(Error::Consistency(format!(
            "image of {:?} lies {worst:.3e} from the descriptor (tol {tol:.1e})",
            offender.map(|p| p.rep().to_arrays())
        )));
    }
    Ok(worst)
}

/// Subset of the dual plane (lines of ℙ²_ℍ, each encoded by its polar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DualDescriptor {
    Empty,
    FiniteLines {
        #[serde(with = "named_points")]
        polars: Vec<ProjPoint>,
    },
    WholeDual,
}

impl DualDescriptor {
    pub fn polars(&self) -> &[ProjPoint] {
        match self {
            DualDescriptor::FiniteLines { polars } => polars,
            _ => &[],
        }
    }

    /// Distance from a dual point to the set (∞ for the empty set).
    pub fn dist(&self, q: &ProjPoint) -> f64 {
        match self {
            DualDescriptor::Empty => f64::INFINITY,
            DualDescriptor::WholeDual => 0.0,
            DualDescriptor::FiniteLines { polars } => polars.iter().map(|p| chordal_dist(p, q)).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Kulkarni sets `L₀, L₁, L₂` and `Λ = L₀ ∪ L₁ ∪ L₂`; `Ω` is the complement of `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KulkarniPrediction {
    pub l0: LimitSetDescriptor,
    pub l1: LimitSetDescriptor,
    pub l2: LimitSetDescriptor,
    pub lambda: LimitSetDescriptor,
    pub omega: String,
}

const OMEGA: &str = "complement_of_lambda";

fn fixed_set(class: &ElementClass) -> Result<LimitSetDescriptor> {
    Ok(LimitSetDescriptor::FixedPointSet(fixed_points(&canonical_form(class)?, RANK_TOL)?))
}

/// Kulkarni sets of each subclass, with basis points and lines instantiated.
pub fn predict_kulkarni(class: &ElementClass) -> Result<KulkarniPrediction> {
    use LimitSetDescriptor as D;
    let pts = D::basis_points;
    let lines = D::basis_lines;
    let line_and_e3 = || D::union(vec![lines(&[(0, 1)]), pts(&[2])]);
    let (l0, l1, l2, lambda) = match class.fine {
        Fine::RationalElliptic => (D::Empty, D::Empty, D::Empty, D::Empty),
        Fine::SimpleIrrationalElliptic => (D::ComplexPlaneP2C, D::WholeSpace, D::Empty, D::WholeSpace),
        Fine::CompoundIrrationalElliptic(_) => (fixed_set(class)?, D::WholeSpace, D::Empty, D::WholeSpace),
        Fine::RegularLoxodromic => (pts(&[0, 1, 2]), pts(&[0, 1, 2]), lines(&[(0, 1), (1, 2)]), lines(&[(0, 1), (1, 2)])),
        Fine::Screw => (pts(&[0, 1, 2]), line_and_e3(), line_and_e3(), line_and_e3()),
        Fine::Homothety(_) => (fixed_set(class)?, line_and_e3(), line_and_e3(), line_and_e3()),
        Fine::LoxoParabolic => (pts(&[0, 2]), pts(&[0, 2]), lines(&[(0, 1), (0, 2)]), lines(&[(0, 1), (0, 2)])),
        Fine::VerticalTranslation | Fine::RationalElliptoParabolic => {
            (lines(&[(0, 2)]), pts(&[0]), pts(&[0]), lines(&[(0, 2)]))
        }
        Fine::NonVerticalTranslation | Fine::ElliptoTranslation => {
            (pts(&[0]), pts(&[0]), lines(&[(0, 1)]), lines(&[(0, 1)]))
        }
        Fine::IrrationalElliptoParabolic => (pts(&[0, 2]), lines(&[(0, 2)]), pts(&[0]), lines(&[(0, 2)])),
    };
    Ok(KulkarniPrediction { l0, l1, l2, lambda, omega: OMEGA.into() })
}

/// Dual limit set as single dual points, one per open chart that converges.
pub fn predict_conze_guivarch(class: &ElementClass) -> DualDescriptor {
    let e = ProjPoint::basis;
    let lines = |v: Vec<ProjPoint>| DualDescriptor::FiniteLines { polars: v };
    match class.fine {
        Fine::RationalElliptic => DualDescriptor::Empty,
        Fine::SimpleIrrationalElliptic | Fine::CompoundIrrationalElliptic(_) => DualDescriptor::WholeDual,
        Fine::VerticalTranslation | Fine::RationalElliptoParabolic | Fine::IrrationalElliptoParabolic => {
            lines(vec![e(1)])
        }
        Fine::NonVerticalTranslation | Fine::ElliptoTranslation => lines(vec![e(2)]),
        Fine::RegularLoxodromic => lines(vec![e(2), e(0)]),
        Fine::Screw | Fine::Homothety(_) => lines(vec![e(2)]),
        Fine::LoxoParabolic => lines(vec![e(2), e(1)]),
    }
}

/// Dual points attract the chart `U_{chart+1} = {z_{chart+1} ≠ 0}` under
/// iteration of the dual action in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualAttractor {
    pub direction: Direction,
    pub chart: usize,
    pub target: ProjPoint,
}

fn lambda_expands(class: &ElementClass) -> bool {
    class.params.lambda.as_ref().map_or(true, |l| l.modulus > 1.0)
}

/// Convergence statements behind [`predict_conze_guivarch`]; empty for elliptic classes.
pub fn dual_attractors(class: &ElementClass) -> Vec<DualAttractor> {
    use Direction::{Backward, Forward};
    let at = |direction, chart, i| DualAttractor { direction, chart, target: ProjPoint::basis(i) };
    let flip = |d: Direction| if lambda_expands(class) { d } else { d.reverse() };
    match class.fine {
        Fine::RationalElliptic | Fine::SimpleIrrationalElliptic | Fine::CompoundIrrationalElliptic(_) => vec![],
        Fine::VerticalTranslation | Fine::RationalElliptoParabolic | Fine::IrrationalElliptoParabolic => {
            vec![at(Forward, 0, 1)]
        }
        Fine::NonVerticalTranslation | Fine::ElliptoTranslation => vec![at(Forward, 0, 2)],
        Fine::RegularLoxodromic => vec![at(Forward, 0, 0), at(Backward, 2, 2)],
        Fine::Screw | Fine::Homothety(_) => vec![at(flip(Forward), 2, 2)],
        Fine::LoxoParabolic => vec![at(flip(Forward), 2, 2), at(flip(Backward), 0, 1)],
    }
}

/// Kernel and image of a renormalized power limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitMap {
    pub kernel: Subspace,
    pub image: Subspace,
}

/// Forward and backward limits of `gⁿ/‖gⁿ‖`; `None` for elliptic classes.
pub fn power_limits(class: &ElementClass) -> Option<(LimitMap, LimitMap)> {
    let pt = |i| Subspace::point(ProjPoint::basis(i));
    let ln = |i, j| Subspace::line(basis_line(i, j));
    let d1 = LimitMap { kernel: ln(0, 1), image: pt(2) };
    let d2 = LimitMap { kernel: ln(1, 2), image: pt(0) };
    let d3 = LimitMap { kernel: pt(2), image: ln(0, 1) };
    let d4 = LimitMap { kernel: ln(0, 2), image: pt(0) };
    let d5 = LimitMap { kernel: ln(0, 1), image: pt(0) };
    let ordered = |f, b| if lambda_expands(class) { (f, b) } else { (b, f) };
    Some(match class.fine {
        Fine::RationalElliptic | Fine::SimpleIrrationalElliptic | Fine::CompoundIrrationalElliptic(_) => return None,
        Fine::RegularLoxodromic => (d1, d2),
        Fine::Screw | Fine::Homothety(_) => ordered(d3, d1),
        Fine::LoxoParabolic => ordered(d4, d1),
        Fine::VerticalTranslation | Fine::RationalElliptoParabolic | Fine::IrrationalElliptoParabolic => (d4, d4),
        Fine::NonVerticalTranslation | Fine::ElliptoTranslation => (d5, d5),
    })
}

/// The predicted L₂ lines along which witness sequences exist.
pub fn witness_lines(class: &ElementClass) -> Vec<ProjLine> {
    match class.fine {
        Fine::RegularLoxodromic => vec![basis_line(0, 1), basis_line(1, 2)],
        Fine::LoxoParabolic => vec![basis_line(0, 1), basis_line(0, 2)],
        Fine::NonVerticalTranslation | Fine::ElliptoTranslation => vec![basis_line(0, 1)],
        _ => vec![],
    }
}

/// Serialization of point lists with `"e1"`, `"e2"`, `"e3"` shorthand.
mod named_points {
    use super::PointRef;
    use crate::projective::ProjPoint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ps: &[ProjPoint], s: S) -> Result<S::Ok, S::Error> {
        ps.iter().map(|p| PointRef(*p)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ProjPoint>, D::Error> {
        Ok(Vec::<PointRef>::deserialize(d)?.into_iter().map(|p| p.0).collect())
    }
}

#[derive(Debug, Clone, Copy)]
struct PointRef(ProjPoint);

fn basis_index(p: &ProjPoint) -> Option<usize> {
    (0..3).find(|&i| *p == ProjPoint::basis(i))
}

impl Serialize for PointRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match basis_index(&self.0) {
            Some(i) => s.serialize_str(&format!("e{}", i + 1)),
            None => self.0.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PointRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Coords(ProjPoint),
        }
        match Raw::deserialize(d)? {
            Raw::Coords(p) => Ok(PointRef(p)),
            Raw::Name(n) => match n.as_str() {
                "e1" => Ok(PointRef(ProjPoint::e1())),
                "e2" => Ok(PointRef(ProjPoint::e2())),
                "e3" => Ok(PointRef(ProjPoint::e3())),
                _ => Err(serde::de::Error::custom(format!("unknown point name `{n}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    span: Option<[PointRef; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polar: Option<PointRef>,
}

impl From<&ProjLine> for LineRepr {
    fn from(l: &ProjLine) -> Self {
        let named = (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .find(|&(i, j)| *l == basis_line(i, j));
        match named {
            Some(_) => LineRepr { span: Some([PointRef(l.span[0]), PointRef(l.span[1])]), polar: None },
            None => LineRepr { span: Some([PointRef(l.span[0]), PointRef(l.span[1])]), polar: Some(PointRef(l.polar)) },
        }
    }
}

impl TryFrom<LineRepr> for ProjLine {
    type Error = Error;

    fn try_from(r: LineRepr) -> Result<Self> {
        match (r.span, r.polar) {
            (Some([a, b]), None) => line_through(&a.0, &b.0),
            (None, Some(n)) => Ok(ProjLine::from_polar(n.0)),
            (Some([a, b]), Some(n)) => {
                let l = ProjLine { polar: n.0, span: [a.0, b.0] };
                if point_line_dist(&a.0, &l).max(point_line_dist(&b.0, &l)) > 1e-9 {
                    return Err(Error::Validation("line span does not lie on its polar line".into()));
                }
                Ok(l)
            }
            (None, None) => Err(Error::Validation("line needs `span` or `polar`".into())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ComponentRepr {
    Point { point: PointRef },
    Line(LineRepr),
    ComplexLine { basis: [HVec3; 2] },
    ComplexPlane { basis: [HVec3; 3] },
    Whole,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Repr {
    Empty,
    Points { points: Vec<PointRef> },
    Line(LineRepr),
    Lines { lines: Vec<LineRepr> },
    ComplexLine { span: [PointRef; 2] },
    FixedPoints { components: Vec<ComponentRepr> },
    WholeSpace,
    ComplexPlane,
    Union { members: Vec<Repr> },
}

impl From<LimitSetDescriptor> for Repr {
    fn from(d: LimitSetDescriptor) -> Self {
        match d {
            LimitSetDescriptor::Empty => Repr::Empty,
            LimitSetDescriptor::FinitePoints(ps) => Repr::Points { points: ps.into_iter().map(PointRef).collect() },
            LimitSetDescriptor::Lines(ls) if ls.len() == 1 => Repr::Line(LineRepr::from(&ls[0])),
            LimitSetDescriptor::Lines(ls) => Repr::Lines { lines: ls.iter().map(LineRepr::from).collect() },
            LimitSetDescriptor::ComplexLine([i, j]) => {
                Repr::ComplexLine { span: [PointRef(ProjPoint::basis(i)), PointRef(ProjPoint::basis(j))] }
            }
            LimitSetDescriptor::FixedPointSet(f) => Repr::FixedPoints {
                components: f
                    .components
                    .iter()
                    .map(|c| match c {
                        FixedComponent::Point(p) => ComponentRepr::Point { point: PointRef(*p) },
                        FixedComponent::Line(l) => ComponentRepr::Line(LineRepr::from(l)),
                        FixedComponent::ComplexLine(b) => ComponentRepr::ComplexLine { basis: *b },
                        FixedComponent::ComplexPlane(b) => ComponentRepr::ComplexPlane { basis: *b },
                        FixedComponent::Whole => ComponentRepr::Whole,
                    })
                    .collect(),
            },
            LimitSetDescriptor::WholeSpace => Repr::WholeSpace,
            LimitSetDescriptor::ComplexPlaneP2C => Repr::ComplexPlane,
            LimitSetDescriptor::Union(ms) => Repr::Union { members: ms.into_iter().map(Repr::from).collect() },
        }
    }
}

impl TryFrom<Repr> for LimitSetDescriptor {
    type Error = Error;

    fn try_from(r: Repr) -> Result<Self> {
        Ok(match r {
            Repr::Empty => LimitSetDescriptor::Empty,
            Repr::Points { points } => {
                let ps: Vec<ProjPoint> = points.into_iter().map(|p| p.0).collect();
                for (k, p) in ps.iter().enumerate() {
                    if ps[..k].iter().any(|q| q == p) {
                        return Err(Error::Validation("repeated point in point list".into()));
                    }
                }
                LimitSetDescriptor::FinitePoints(ps)
            }
            Repr::Line(l) => LimitSetDescriptor::Lines(vec![ProjLine::try_from(l)?]),
            Repr::Lines { lines } => {
                LimitSetDescriptor::Lines(lines.into_iter().map(ProjLine::try_from).collect::<Result<_>>()?)
            }
            Repr::ComplexLine { span: [a, b] } => match (basis_index(&a.0), basis_index(&b.0)) {
                (Some(i), Some(j)) if i != j => LimitSetDescriptor::ComplexLine([i, j]),
                _ => return Err(Error::Validation("complex line must join two distinct basis points".into())),
            },
            Repr::FixedPoints { components } => LimitSetDescriptor::FixedPointSet(FixedSet {
                components: components
                    .into_iter()
                    .map(|c| {
                        Ok(match c {
                            ComponentRepr::Point { point } => FixedComponent::Point(point.0),
                            ComponentRepr::Line(l) => FixedComponent::Line(ProjLine::try_from(l)?),
                            ComponentRepr::ComplexLine { basis } => FixedComponent::ComplexLine(basis),
                            ComponentRepr::ComplexPlane { basis } => FixedComponent::ComplexPlane(basis),
                            ComponentRepr::Whole => FixedComponent::Whole,
                        })
                    })
                    .collect::<Result<_>>()?,
            }),
            Repr::WholeSpace => LimitSetDescriptor::WholeSpace,
            Repr::ComplexPlane => LimitSetDescriptor::ComplexPlaneP2C,
            Repr::Union { members } => {
                let ms = members.into_iter().map(LimitSetDescriptor::try_from).collect::<Result<Vec<_>>>()?;
                if ms.iter().any(|m| m.is_empty()) {
                    return Err(Error::Validation("union members must be non-empty".into()));
                }
                LimitSetDescriptor::Union(ms)
            }
        })
    }
}
