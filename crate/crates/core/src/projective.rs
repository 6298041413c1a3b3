//! Points and lines of the quaternionic projective plane, the chordal metric,
//! and the projective and dual actions of `HMat3`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmat::{HMat3, HVec3};
use crate::quat::Quaternion;

/// Coordinates below this fraction of the largest are treated as zero when
/// choosing the normalizing coordinate.
const LEAD_TOL: f64 = 1e-12;

/// A point of ℙ²_ℍ stored by its canonical representative: unit norm, first
/// non-negligible coordinate real positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProjPoint(HVec3);

impl<'de> Deserialize<'de> for ProjPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = HVec3::deserialize(d)?;
        ProjPoint::new(v).map_err(serde::de::Error::custom)
    }
}

impl ProjPoint {
    /// Canonicalizes `v`; fails on zero or non-finite input.
    pub fn new(v: HVec3) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::Domain("non-finite homogeneous coordinates".into()));
        }
        let m = v.max_abs();
        if m == 0.0 {
            return Err(Error::Domain("zero vector has no projective point".into()));
        }
        if Self::is_canonical(&v, m) {
            return Ok(ProjPoint(v));
        }
        // rescale by a real first so tiny or huge vectors normalize cleanly
        let v = v.scale_real(1.0 / m);
        let lead = (0..3).find(|&i| v[i].norm() > LEAD_TOL).expect("max coordinate is 1");
        let c = v[lead];
        let w = v.scale_right(c.conj() * (1.0 / c.norm()));
        let mut w = w.scale_real(1.0 / w.norm());
        // remove the rounding residue so the lead coordinate is exactly real
        w[lead] = Quaternion::real(w[lead].w);
        Ok(ProjPoint(w))
    }

    fn is_canonical(v: &HVec3, m: f64) -> bool {
        let lead = (0..3).find(|&i| v[i].norm() > LEAD_TOL * m).expect("nonzero");
        let c = v[lead];
        c.x == 0.0 && c.y == 0.0 && c.z == 0.0 && c.w > 0.0 && (v.norm() - 1.0).abs() <= 4.0 * f64::EPSILON
    }

    pub fn from_real(a: f64, b: f64, c: f64) -> Result<Self> {
        ProjPoint::new(HVec3::real(a, b, c))
    }

    /// Standard basis point `e_{i+1}`.
    pub fn basis(i: usize) -> Self {
        ProjPoint(HVec3::basis(i))
    }

    pub fn e1() -> Self {
        ProjPoint::basis(0)
    }

    pub fn e2() -> Self {
        ProjPoint::basis(1)
    }

    pub fn e3() -> Self {
        ProjPoint::basis(2)
    }

    /// Unit-norm canonical representative.
    pub fn rep(&self) -> HVec3 {
        self.0
    }

    pub fn canonical(&self) -> ProjPoint {
        ProjPoint::new(self.0).expect("canonical points are nonzero")
    }

    fn lex_cmp(&self, other: &ProjPoint) -> Ordering {
        let (a, b) = (self.0.to_arrays(), other.0.to_arrays());
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }
}

/// `√(1 − |⟨p,q⟩|²)` evaluated as the residual of `q` after projecting onto `p·ℍ`.
pub fn chordal_dist(p: &ProjPoint, q: &ProjPoint) -> f64 {
    // fixed argument order makes the result exactly symmetric
    if p == q {
        return 0.0;
    }
    let (p, q) = if p.lex_cmp(q) == Ordering::Greater { (q, p) } else { (p, q) };
    let (pv, qv) = (p.rep(), q.rep());
    let r = qv.sub(pv.scale_right(pv.inner(qv)));
    r.norm().clamp(0.0, 1.0)
}

/// A quaternionic line `{x : ⟨polar, x⟩ = 0}` together with two points spanning it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjLine {
    pub polar: ProjPoint,
    pub span: [ProjPoint; 2],
}

impl<'de> Deserialize<'de> for ProjLine {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            polar: ProjPoint,
        }
        let raw = Raw::deserialize(d)?;
        Ok(ProjLine::from_polar(raw.polar))
    }
}

/// Right-module Gram–Schmidt step: `v` minus its projection on orthonormal `basis`.
pub fn orth_residual(v: HVec3, basis: &[HVec3]) -> HVec3 {
    basis.iter().fold(v, |acc, u| acc.sub(u.scale_right(u.inner(acc))))
}

impl ProjLine {
    /// The line with the given polar point.
    pub fn from_polar(polar: ProjPoint) -> Self {
        let n = polar.rep();
        let mut basis: Vec<HVec3> = vec![n];
        let mut order: Vec<usize> = (0..3).collect();
        // start from the basis vectors least aligned with n
        order.sort_by(|&a, &b| n[a].norm().total_cmp(&n[b].norm()));
        for i in order {
            if basis.len() == 3 {
                break;
            }
            let r = orth_residual(HVec3::basis(i), &basis);
            if r.norm() > 1e-6 {
                basis.push(r.scale_real(1.0 / r.norm()));
            }
        }
        let span = [
            ProjPoint::new(basis[1]).expect("nonzero"),
            ProjPoint::new(basis[2]).expect("nonzero"),
        ];
        ProjLine { polar, span }
    }

    /// Orthonormal representatives of the two span directions.
    pub fn orthonormal_span(&self) -> [HVec3; 2] {
        let u1 = self.span[0].rep();
        let r = orth_residual(self.span[1].rep(), &[u1]);
        [u1, r.scale_real(1.0 / r.norm())]
    }

    pub fn contains(&self, p: &ProjPoint, tol: f64) -> bool {
        point_line_dist(p, self) <= tol
    }
}

/// The line through two distinct points.
pub fn line_through(p: &ProjPoint, q: &ProjPoint) -> Result<ProjLine> {
    let u1 = p.rep();
    let r = orth_residual(q.rep(), &[u1]);
    if r.norm() <= 1e-12 {
        return Err(Error::Domain("line through coincident points".into()));
    }
    let u2 = r.scale_real(1.0 / r.norm());
    let k = (0..3)
        .max_by(|&a, &b| {
            let ra = orth_residual(HVec3::basis(a), &[u1, u2]).norm();
            let rb = orth_residual(HVec3::basis(b), &[u1, u2]).norm();
            ra.total_cmp(&rb)
        })
        .expect("three candidates");
    let n = orth_residual(HVec3::basis(k), &[u1, u2]);
    Ok(ProjLine { polar: ProjPoint::new(n)?, span: [*p, *q] })
}

/// Line `𝕃{e_{i+1}, e_{j+1}}`.
pub fn basis_line(i: usize, j: usize) -> ProjLine {
    line_through(&ProjPoint::basis(i), &ProjPoint::basis(j)).expect("distinct basis points")
}

/// `|⟨n̂, r̂⟩|`, equal to `√(1 − ‖P_W r‖²)` for the span `W`.
pub fn point_line_dist(r: &ProjPoint, l: &ProjLine) -> f64 {
    l.polar.rep().inner(r.rep()).norm().clamp(0.0, 1.0)
}

/// Residual of `r` against the complex line joining `e_{i+1}` and `e_{j+1}`:
/// the larger of the off-pair coordinate and the `j,k` part of the ratio of
/// the pair coordinates after right-normalizing the larger one to 1.
pub fn complex_line_residual(r: &ProjPoint, i: usize, j: usize) -> f64 {
    let v = r.rep();
    let other = 3 - i - j;
    let (big, small) = if v[i].norm() >= v[j].norm() { (v[i], v[j]) } else { (v[j], v[i]) };
    let ratio = small * big.inverse().unwrap_or(Quaternion::ZERO);
    v[other].norm().max(ratio.jk_norm())
}

pub fn in_complex_line(r: &ProjPoint, i: usize, j: usize, tol: f64) -> bool {
    complex_line_residual(r, i, j) <= tol
}

/// `[g·v]`; fails when `v` lies (numerically) in the kernel of `g`.
pub fn apply(g: &HMat3, p: &ProjPoint) -> Result<ProjPoint> {
    let w = g.mat_vec(&p.rep());
    if w.norm() <= 1e-14 * g.sup_norm() {
        return Err(Error::Domain("point lies in the kernel".into()));
    }
    ProjPoint::new(w)
}

/// Dual action `polar ↦ (g⁻¹)ᵀ·polar` (plain transpose).
pub fn dual_apply(g: &HMat3, l: &ProjLine) -> Result<ProjLine> {
    let m = g.inverse()?.transpose();
    dual_apply_with(&m, l)
}

/// Dual action with a precomputed `(g⁻¹)ᵀ`.
pub fn dual_apply_with(inv_t: &HMat3, l: &ProjLine) -> Result<ProjLine> {
    let n = inv_t.mat_vec(&l.polar.rep());
    Ok(ProjLine::from_polar(ProjPoint::new(n)?))
}

/// Applies the dual action to a polar point directly.
pub fn dual_apply_point(inv_t: &HMat3, q: &ProjPoint) -> Result<ProjPoint> {
    ProjPoint::new(inv_t.mat_vec(&q.rep()))
}

/// Orthonormal basis (6×k complex) of `ψ(span_ℂ vs)`.
pub fn complex_span_basis(vs: &[HVec3]) -> DMatrix<Complex64> {
    let cols: Vec<_> = vs.iter().map(|v| v.psi()).collect();
    orthonormalize(&cols)
}

/// Orthonormal basis of `ψ(span_ℍ vs)`, using `v` and `v·j` for each vector.
pub fn quaternionic_span_basis(vs: &[HVec3]) -> DMatrix<Complex64> {
    let cols: Vec<_> = vs
        .iter()
        .flat_map(|v| [v.psi(), v.scale_right(Quaternion::J).psi()])
        .collect();
    orthonormalize(&cols)
}

fn orthonormalize(cols: &[nalgebra::Vector6<Complex64>]) -> DMatrix<Complex64> {
    let mut out: Vec<nalgebra::Vector6<Complex64>> = Vec::new();
    for c in cols {
        let mut r = *c;
        // two passes keep orthogonality at machine precision
        for _ in 0..2 {
            for u in &out {
                let coef = u.dotc(&r);
                r -= u * coef;
            }
        }
        let n = r.norm();
        if n > 1e-10 * c.norm().max(1e-300) {
            out.push(r / Complex64::new(n, 0.0));
        }
    }
    DMatrix::from_fn(6, out.len(), |i, j| out[j][i])
}

/// Chordal distance from `[r]` to the set of projective points of a complex
/// subspace with orthonormal basis `q_w` in ℂ⁶, via the largest principal cosine.
pub fn subspace_dist(r: &ProjPoint, q_w: &DMatrix<Complex64>) -> f64 {
    if q_w.ncols() == 0 {
        return f64::INFINITY;
    }
    let q_r = quaternionic_span_basis(&[r.rep()]);
    // sine of the smallest principal angle, from the residual of projecting onto q_w
    let resid = &q_r - q_w * (q_w.adjoint() * &q_r);
    SVD::new(resid, false, false).singular_values.min().min(1.0)
}
