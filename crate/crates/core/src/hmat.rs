//! 3×3 quaternionic matrices acting on the right module ℍ³, and the complex
//! adjoint embedding into 6×6 complex matrices.

use std::ops::{Index, IndexMut, Mul};

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

pub type CMat6 = Matrix6<Complex64>;
pub type CVec6 = Vector6<Complex64>;

/// Singularity threshold on `det_h` used by [`HMat3::inverse`].
pub const SINGULAR_DET: f64 = 1e-200;

/// Column vector of ℍ³; scalars act from the right.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HVec3(pub [Quaternion; 3]);

impl HVec3 {
    pub const fn new(a: Quaternion, b: Quaternion, c: Quaternion) -> Self {
        HVec3([a, b, c])
    }

    pub fn real(a: f64, b: f64, c: f64) -> Self {
        HVec3::new(Quaternion::real(a), Quaternion::real(b), Quaternion::real(c))
    }

    /// Standard basis vector `e_{i+1}`.
    pub fn basis(i: usize) -> Self {
        let mut v = HVec3::default();
        v.0[i] = Quaternion::ONE;
        v
    }

    /// `v·α`.
    pub fn scale_right(self, alpha: Quaternion) -> Self {
        HVec3(self.0.map(|c| c * alpha))
    }

    pub fn scale_real(self, r: f64) -> Self {
        HVec3(self.0.map(|c| c * r))
    }

    pub fn norm(self) -> f64 {
        self.0[0].norm().hypot(self.0[1].norm()).hypot(self.0[2].norm())
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// Hermitian product `Σ conj(aᵢ)·bᵢ`, conjugate-linear on the left.
    pub fn inner(self, other: HVec3) -> Quaternion {
        (0..3).map(|i| self.0[i].conj() * other.0[i]).sum()
    }

    pub fn add(self, o: HVec3) -> HVec3 {
        HVec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }

    pub fn sub(self, o: HVec3) -> HVec3 {
        HVec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|q| q.is_finite())
    }

    pub fn max_abs_diff(self, o: HVec3) -> f64 {
        (0..3).map(|i| self.0[i].max_abs_diff(o.0[i])).fold(0.0, f64::max)
    }

    /// Image in ℂ⁶ under `v1 + v2·j ↦ (v1; −conj v2)`, compatible with [`HMat3::phi`].
    pub fn psi(self) -> CVec6 {
        let mut out = CVec6::zeros();
        for i in 0..3 {
            let (c1, c2) = self.0[i].complex_split();
            out[i] = c1;
            out[i + 3] = -c2.conj();
        }
        out
    }

    /// Inverse of [`HVec3::psi`].
    pub fn from_psi(u: &CVec6) -> Self {
        let mut v = HVec3::default();
        for i in 0..3 {
            v.0[i] = Quaternion::from_complex_split(u[i], -u[i + 3].conj());
        }
        v
    }

    pub fn to_arrays(self) -> [[f64; 4]; 3] {
        self.0.map(|q| q.to_array())
    }
}

impl Index<usize> for HVec3 {
    type Output = Quaternion;
    fn index(&self, i: usize) -> &Quaternion {
        &self.0[i]
    }
}

impl IndexMut<usize> for HVec3 {
    fn index_mut(&mut self, i: usize) -> &mut Quaternion {
        &mut self.0[i]
    }
}

/// Row-major 3×3 quaternionic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HMat3(pub [[Quaternion; 3]; 3]);

impl HMat3 {
    pub fn zero() -> Self {
        HMat3::default()
    }

    pub fn identity() -> Self {
        HMat3::diag(Quaternion::ONE, Quaternion::ONE, Quaternion::ONE)
    }

    pub fn diag(a: Quaternion, b: Quaternion, c: Quaternion) -> Self {
        let mut m = HMat3::zero();
        m.0[0][0] = a;
        m.0[1][1] = b;
        m.0[2][2] = c;
        m
    }

    pub fn diag_real(a: f64, b: f64, c: f64) -> Self {
        HMat3::diag(Quaternion::real(a), Quaternion::real(b), Quaternion::real(c))
    }

    pub fn from_real(rows: [[f64; 3]; 3]) -> Self {
        HMat3(rows.map(|r| r.map(Quaternion::real)))
    }

    pub fn from_complex(rows: [[Complex64; 3]; 3]) -> Self {
        HMat3(rows.map(|r| r.map(Quaternion::from_complex)))
    }

    pub fn mat_mul(&self, b: &HMat3) -> HMat3 {
        let mut out = HMat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|k| self.0[i][k] * b.0[k][j]).sum();
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &HVec3) -> HVec3 {
        let mut out = HVec3::default();
        for i in 0..3 {
            out.0[i] = (0..3).map(|k| self.0[i][k] * v.0[k]).sum();
        }
        out
    }

    pub fn add(&self, b: &HMat3) -> HMat3 {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += b.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, b: &HMat3) -> HMat3 {
        self.add(&b.scale_real(-1.0))
    }

    pub fn transpose(&self) -> HMat3 {
        let mut out = HMat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[j][i] = self.0[i][j];
            }
        }
        out
    }

    pub fn conj_transpose(&self) -> HMat3 {
        let mut out = self.transpose();
        for row in out.0.iter_mut() {
            for q in row.iter_mut() {
                *q = q.conj();
            }
        }
        out
    }

    /// Largest entry modulus.
    pub fn sup_norm(&self) -> f64 {
        self.0.iter().flatten().map(|q| q.norm()).fold(0.0, f64::max)
    }

    pub fn scale_real(&self, r: f64) -> HMat3 {
        HMat3(self.0.map(|row| row.map(|q| q * r)))
    }

    /// `self / sup_norm(self)`; the zero matrix is returned unchanged.
    pub fn sup_normalized(&self) -> HMat3 {
        let s = self.sup_norm();
        if s == 0.0 {
            *self
        } else {
            self.scale_real(1.0 / s)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|q| q.is_finite())
    }

    pub fn max_abs_diff(&self, b: &HMat3) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max(self.0[i][j].max_abs_diff(b.0[i][j]));
            }
        }
        m
    }

    /// `[[A₁, A₂], [−conj A₂, conj A₁]]` with `A = A₁ + A₂·j` entrywise.
    pub fn phi(&self) -> CMat6 {
        let mut m = CMat6::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let (a1, a2) = self.0[i][j].complex_split();
                m[(i, j)] = a1;
                m[(i, j + 3)] = a2;
                m[(i + 3, j)] = -a2.conj();
                m[(i + 3, j + 3)] = a1.conj();
            }
        }
        m
    }

    /// Reads `A₁, A₂` back from the top block row of a matrix in the image of Φ.
    pub fn from_phi(m: &CMat6) -> HMat3 {
        let mut out = HMat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = Quaternion::from_complex_split(m[(i, j)], m[(i, j + 3)]);
            }
        }
        out
    }

    /// `det Φ(A)`, real and nonnegative.
    pub fn det_h(&self) -> Result<f64> {
        let d = self.phi().determinant();
        let scale = d.norm().max(self.sup_norm().powi(6) * 1e-6);
        if d.im.abs() > 1e-9 * scale || d.re < -1e-9 * scale {
            return Err(Error::Consistency(format!(
                "det of the complex adjoint is not a nonnegative real: {d}"
            )));
        }
        Ok(d.re.max(0.0))
    }

    pub fn inverse(&self) -> Result<HMat3> {
        let det = self.det_h()?;
        let scale = self.sup_norm().powi(6);
        if det <= SINGULAR_DET || det <= 1e-14 * scale {
            return Err(Error::Singular { det });
        }
        let inv = self.phi().try_inverse().ok_or(Error::Singular { det })?;
        Ok(HMat3::from_phi(&inv))
    }

    /// Positive real multiple with `det_h = 1`.
    pub fn normalize_to_sl(&self) -> Result<HMat3> {
        let det = self.det_h()?;
        if det <= SINGULAR_DET {
            return Err(Error::Singular { det });
        }
        // scale first so det_h stays in range for large entries
        let s = self.sup_norm();
        let unit = self.scale_real(1.0 / s);
        let d = unit.det_h()?;
        Ok(unit.scale_real(d.powf(-1.0 / 6.0)))
    }

    /// `Aⁿ` by repeated squaring (no renormalization).
    pub fn pow(&self, mut n: u64) -> HMat3 {
        let mut base = *self;
        let mut acc = HMat3::identity();
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mat_mul(&base);
            }
            base = base.mat_mul(&base);
            n >>= 1;
        }
        acc
    }

    /// `Aⁿ` for any integer `n`, inverting first when negative.
    pub fn pow_signed(&self, n: i64) -> Result<HMat3> {
        if n >= 0 {
            Ok(self.pow(n as u64))
        } else {
            Ok(self.inverse()?.pow(n.unsigned_abs()))
        }
    }

    pub fn row(&self, i: usize) -> [Quaternion; 3] {
        self.0[i]
    }

    pub fn col(&self, j: usize) -> HVec3 {
        HVec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn from_cols(c: [HVec3; 3]) -> HMat3 {
        let mut m = HMat3::zero();
        for (j, v) in c.iter().enumerate() {
            for i in 0..3 {
                m.0[i][j] = v.0[i];
            }
        }
        m
    }
}

impl Mul for HMat3 {
    type Output = HMat3;
    fn mul(self, b: HMat3) -> HMat3 {
        self.mat_mul(&b)
    }
}

impl Mul<HVec3> for HMat3 {
    type Output = HVec3;
    fn mul(self, v: HVec3) -> HVec3 {
        self.mat_vec(&v)
    }
}

impl Index<(usize, usize)> for HMat3 {
    type Output = Quaternion;
    fn index(&self, (i, j): (usize, usize)) -> &Quaternion {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for HMat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Quaternion {
        &mut self.0[i][j]
    }
}
