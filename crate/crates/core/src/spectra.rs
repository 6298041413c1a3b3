//! Right-eigenvalue classes, Jordan block structure, projective fixed sets,
//! proximality and attracting fixed points, all read off the complex adjoint.

use nalgebra::{DMatrix, Schur, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmat::{CMat6, HMat3, HVec3};
use crate::projective::{orth_residual, ProjLine, ProjPoint};

/// Default singular-value ratio below which a direction counts as null.
pub const RANK_TOL: f64 = 1e-8;
/// Default tolerance for conjugate pairing and class merging.
pub const PAIR_TOL: f64 = 1e-9;
/// Merge tolerance for matrices that may be conjugated defective forms,
/// whose eigenvalues split by roughly `ε^{1/m}`.
pub const CLUSTER_TOL: f64 = 1e-4;
/// Width of the ambiguous band above the rank threshold, as a factor.
const AMBIGUITY_DECADES: f64 = 10.0;

/// Similarity class of right eigenvalues, represented by its complex member with `Im ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenClass {
    pub representative: Complex64,
    pub modulus: f64,
    /// `arg(representative)` in `[0, π]`.
    pub argument: f64,
    pub algebraic_multiplicity: usize,
}

impl EigenClass {
    fn new(rep: Complex64, mult: usize) -> Self {
        EigenClass {
            representative: rep,
            modulus: rep.norm(),
            argument: rep.arg().max(0.0),
            algebraic_multiplicity: mult,
        }
    }

    /// Real classes have a two-dimensional eigen-space image per quaternionic dimension.
    pub fn is_real(&self, tol: f64) -> bool {
        self.representative.im.abs() <= tol * self.modulus.max(1.0)
    }
}

/// Multiset of Jordan blocks `(representative, size)`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanStructure {
    pub blocks: Vec<(Complex64, usize)>,
}

impl JordanStructure {
    /// Block sizes in descending order.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.blocks.iter().map(|b| b.1).collect();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    pub fn is_semisimple(&self) -> bool {
        self.blocks.iter().all(|b| b.1 == 1)
    }

    /// Order-free comparison within `tol` on representatives.
    pub fn same_as(&self, other: &JordanStructure, tol: f64) -> bool {
        if self.blocks.len() != other.blocks.len() {
            return false;
        }
        let mut used = vec![false; other.blocks.len()];
        self.blocks.iter().all(|(l, s)| {
            let hit = other
                .blocks
                .iter()
                .enumerate()
                .find(|(i, (m, t))| !used[*i] && t == s && (l - m).norm() <= tol);
            match hit {
                Some((i, _)) => {
                    used[i] = true;
                    true
                }
                None => false,
            }
        })
    }
}

/// One component of a projective fixed-point set.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedComponent {
    Point(ProjPoint),
    Line(ProjLine),
    /// Points `[u·a + v·b]` with `a, b ∈ ℂ`.
    ComplexLine([HVec3; 2]),
    /// Points `[u·a + v·b + w·c]` with `a, b, c ∈ ℂ`.
    ComplexPlane([HVec3; 3]),
    Whole,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedSet {
    pub components: Vec<FixedComponent>,
}

/// Serialized form `{classes: [{re, im, multiplicity}], blocks: [[re, im, size]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub classes: Vec<ClassRecord>,
    pub blocks: Vec<(f64, f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
}

impl SpectralData {
    pub fn new(classes: &[EigenClass], jordan: &JordanStructure) -> Self {
        SpectralData {
            classes: classes
                .iter()
                .map(|c| ClassRecord {
                    re: c.representative.re,
                    im: c.representative.im,
                    multiplicity: c.algebraic_multiplicity,
                })
                .collect(),
            blocks: jordan.blocks.iter().map(|(l, s)| (l.re, l.im, *s)).collect(),
        }
    }
}

/// The six eigenvalues of `Φ(A)` from a complex Schur decomposition.
pub fn phi_eigenvalues(a: &HMat3) -> Result<[Complex64; 6]> {
    let m = a.phi();
    let schur = Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Consistency("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(std::array::from_fn(|i| t[(i, i)]))
}

/// Eigenvalue classes with conjugate-pairing tolerance [`PAIR_TOL`].
pub fn eigen_classes(a: &HMat3) -> Result<Vec<EigenClass>> {
    eigen_classes_tol(a, PAIR_TOL)
}

/// Eigenvalue classes with pairing and merge tolerance `tol`, relative to
/// `max(1, largest modulus)`. Defective conjugated inputs need a loose `tol`
/// since their eigenvalues split by roughly `ε^{1/m}`.
pub fn eigen_classes_tol(a: &HMat3, tol: f64) -> Result<Vec<EigenClass>> {
    let ev = phi_eigenvalues(a)?;
    let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let abs_tol = tol * scale;

    // greedy conjugate pairing, most-imaginary first so real pairs meet last
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&i, &j| ev[j].im.abs().total_cmp(&ev[i].im.abs()).then(i.cmp(&j)));
    let mut used = [false; 6];
    let mut reps: Vec<Complex64> = Vec::with_capacity(3);
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = ev[i].conj();
        let partner = (0..6)
            .filter(|&k| !used[k])
            .min_by(|&k, &l| (ev[k] - target).norm().total_cmp(&(ev[l] - target).norm()))
            .ok_or_else(|| Error::Consistency("odd number of eigenvalues".into()))?;
        let miss = (ev[partner] - target).norm();
        if miss > abs_tol {
            return Err(Error::Consistency(format!(
                "eigenvalue {} has no conjugate partner within {abs_tol:e} (closest miss {miss:e})",
                ev[i]
            )));
        }
        used[partner] = true;
        let mut rep = (ev[i] + ev[partner].conj()) * 0.5;
        if rep.im < 0.0 {
            rep = rep.conj();
        }
        if rep.im.abs() <= tol.max(1e-12) * scale {
            rep.im = 0.0;
        }
        reps.push(rep);
    }

    // merge representatives that agree within tolerance, using cluster means
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for r in reps {
        match clusters.iter_mut().find(|(c, m)| (*c / *m as f64 - r).norm() <= abs_tol) {
            Some((sum, m)) => {
                *sum += r;
                *m += 1;
            }
            None => clusters.push((r, 1)),
        }
    }
    let mut out: Vec<EigenClass> =
        clusters.into_iter().map(|(s, m)| EigenClass::new(s / m as f64, m)).collect();
    out.sort_by(|a, b| a.modulus.total_cmp(&b.modulus).then(a.argument.total_cmp(&b.argument)));
    Ok(out)
}

fn shifted(a: &CMat6, lambda: Complex64) -> CMat6 {
    a - CMat6::identity() * lambda
}

/// Orthonormal basis of `ker(P·M)`, where `P` projects away from the columns
/// of `prev`; with `prev = ker M^{k−1}` this is `ker M^k`. Working with
/// the projected first power keeps nearby eigenvalues at singular values of
/// order `|Δλ|` rather than `|Δλ|^k`. Errors when a singular value falls in
/// the ambiguous band `(tol, 10·tol)·‖M‖`.
fn next_kernel(
    m: &CMat6,
    prev: &[nalgebra::Vector6<Complex64>],
    rank_tol: f64,
    lambda: Complex64,
    k: usize,
) -> Result<Vec<nalgebra::Vector6<Complex64>>> {
    let mut proj = CMat6::identity();
    for q in prev {
        proj -= q * q.adjoint();
    }
    let pm = proj * m;
    let smax = SVD::new(*m, false, false).singular_values.max();
    let svd = SVD::new(pm, false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut out = Vec::new();
    for i in 0..6 {
        let v = svd.singular_values[i];
        if v <= rank_tol * smax {
            out.push(v_t.row(i).adjoint().fixed_rows::<6>(0).into_owned());
        } else if v < AMBIGUITY_DECADES * rank_tol * smax {
            return Err(Error::AmbiguousRank { re: lambda.re, im: lambda.im, k, ratio: v / smax });
        }
    }
    Ok(out)
}

/// Jordan blocks from the nullities of `(Φ(A) − λ)^k`. A real class's blocks
/// occur twice in Φ, a non-real class's once.
pub fn jordan_structure(a: &HMat3, rank_tol: f64) -> Result<JordanStructure> {
    jordan_structure_with(a, rank_tol, PAIR_TOL)
}

/// As [`jordan_structure`] with an explicit class-merging tolerance.
pub fn jordan_structure_with(a: &HMat3, rank_tol: f64, class_tol: f64) -> Result<JordanStructure> {
    if rank_tol <= 0.0 {
        return Err(Error::Precondition("rank_tol must be positive".into()));
    }
    let classes = eigen_classes_tol(a, class_tol)?;
    let phi = a.phi();
    let mut blocks = Vec::new();
    for c in &classes {
        let lambda = c.representative;
        let factor = if lambda.im == 0.0 { 2 } else { 1 };
        let m = shifted(&phi, lambda);
        let mut kernel = Vec::new();
        let mut prev = 0usize;
        let mut at_least: Vec<usize> = Vec::new();
        for k in 1..=c.algebraic_multiplicity {
            kernel = next_kernel(&m, &kernel, rank_tol, lambda, k)?;
            let n = kernel.len();
            if n % factor != 0 {
                return Err(Error::Consistency(format!(
                    "odd nullity {n} for real eigenvalue {lambda} at power {k}"
                )));
            }
            let d = n / factor;
            at_least.push(d.saturating_sub(prev));
            prev = d;
            if d >= c.algebraic_multiplicity {
                break;
            }
        }
        if prev != c.algebraic_multiplicity {
            return Err(Error::Consistency(format!(
                "generalized eigenspace of {lambda} has dimension {prev}, expected {}",
                c.algebraic_multiplicity
            )));
        }
        // at_least[k-1] = number of blocks of size ≥ k
        for k in 0..at_least.len() {
            let next = at_least.get(k + 1).copied().unwrap_or(0);
            for _ in 0..at_least[k].saturating_sub(next) {
                blocks.push((lambda, k + 1));
            }
        }
    }
    blocks.sort_by(|a, b| {
        a.0.norm()
            .total_cmp(&b.0.norm())
            .then(a.0.arg().total_cmp(&b.0.arg()))
            .then(b.1.cmp(&a.1))
    });
    Ok(JordanStructure { blocks })
}

/// Orthonormal null vectors of `m` (columns of V for negligible singular values).
fn null_vectors(m: &CMat6, rank_tol: f64) -> Vec<nalgebra::Vector6<Complex64>> {
    let svd = SVD::new(*m, false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    (0..6)
        .filter(|&i| svd.singular_values[i] <= rank_tol * smax)
        .map(|i| v_t.row(i).adjoint().fixed_rows::<6>(0).into_owned())
        .collect()
}

/// Quaternionic eigenvectors `v` with `Av = vλ`, reduced to an ℍ-independent
/// set for real `λ` and a ℂ-independent set otherwise.
pub fn eigenvectors(a: &HMat3, lambda: Complex64, rank_tol: f64) -> Vec<HVec3> {
    let phi = a.phi();
    let vs: Vec<HVec3> = null_vectors(&shifted(&phi, lambda), rank_tol)
        .iter()
        .map(HVec3::from_psi)
        .collect();
    if lambda.im != 0.0 {
        return vs;
    }
    let mut basis: Vec<HVec3> = Vec::new();
    let mut pool = vs;
    while !pool.is_empty() {
        let (idx, r) = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, orth_residual(orth_residual(*v, &basis), &basis)))
            .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .expect("nonempty");
        pool.remove(idx);
        if r.norm() < 1e-6 {
            break;
        }
        basis.push(r.scale_real(1.0 / r.norm()));
    }
    basis
}

/// ℍ-orthonormal basis of the right kernel of `A`, using singular values of
/// `Φ(A)` below `rank_tol·σ_max`.
pub fn kernel_basis(a: &HMat3, rank_tol: f64) -> Vec<HVec3> {
    eigenvectors(a, Complex64::new(0.0, 0.0), rank_tol)
}

/// Components of the projective fixed-point set of `A`.
pub fn fixed_points(a: &HMat3, tol: f64) -> Result<FixedSet> {
    let classes = eigen_classes(a)?;
    let mut components = Vec::new();
    for c in &classes {
        let vs = eigenvectors(a, c.representative, tol);
        let real = c.representative.im == 0.0;
        let comp = match (real, vs.len()) {
            (_, 0) => continue,
            (_, 1) => FixedComponent::Point(ProjPoint::new(vs[0])?),
            (true, 2) => FixedComponent::Line(crate::projective::line_through(
                &ProjPoint::new(vs[0])?,
                &ProjPoint::new(vs[1])?,
            )?),
            (true, _) => FixedComponent::Whole,
            (false, 2) => FixedComponent::ComplexLine([vs[0], vs[1]]),
            (false, _) => FixedComponent::ComplexPlane([vs[0], vs[1], vs[2]]),
        };
        components.push(comp);
    }
    Ok(FixedSet { components })
}

fn same_modulus(a: f64, b: f64) -> bool {
    (a - b).abs() <= PAIR_TOL * a.max(b).max(1.0)
}

/// A unique eigenvalue class of strictly maximal modulus with multiplicity 1.
pub fn is_proximal(a: &HMat3) -> bool {
    let Ok(classes) = eigen_classes(a) else {
        return false;
    };
    let top = classes.last().expect("three eigenvalues");
    let ties = classes.iter().filter(|c| same_modulus(c.modulus, top.modulus)).count();
    ties == 1 && top.algebraic_multiplicity == 1
}

/// Projective point of the dominant eigenvector. Requires a unique class of
/// maximal modulus with a one-dimensional quaternionic eigenspace; this admits
/// every proximal element and also dominant Jordan blocks.
pub fn attracting_fixed_point(a: &HMat3) -> Result<ProjPoint> {
    let classes = eigen_classes(a)?;
    let top = *classes.last().expect("three eigenvalues");
    let ties = classes.iter().filter(|c| same_modulus(c.modulus, top.modulus)).count();
    if ties != 1 {
        return Err(Error::Precondition(format!(
            "{ties} eigenvalue classes share the maximal modulus {}",
            top.modulus
        )));
    }
    let vs = eigenvectors(a, top.representative, RANK_TOL);
    if vs.len() != 1 {
        return Err(Error::Precondition(format!(
            "dominant eigenspace has dimension {} (need 1)",
            vs.len()
        )));
    }
    ProjPoint::new(vs[0])
}

/// Complex 6×k matrix from a list of ℂ⁶ columns.
pub fn to_dmatrix(cols: &[nalgebra::Vector6<Complex64>]) -> DMatrix<Complex64> {
    DMatrix::from_fn(6, cols.len(), |i, j| cols[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projective::{chordal_dist, point_line_dist};
    use crate::quat::Quaternion;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vertical() -> HMat3 {
        HMat3::from_real([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    fn non_vertical() -> HMat3 {
        HMat3::from_real([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    }

    fn reps(cl: &[EigenClass]) -> Vec<(Complex64, usize)> {
        cl.iter().map(|c| (c.representative, c.algebraic_multiplicity)).collect()
    }

    #[test]
    fn phi_spectrum_oracle() {
        // Φ(diag(j,1,1)) has the 2×2 block [[0,1],[−1,0]] with eigenvalues ±i
        let ev = phi_eigenvalues(&HMat3::diag(Quaternion::J, Quaternion::ONE, Quaternion::ONE)).unwrap();
        let mut n_i = 0;
        let mut n_one = 0;
        for z in ev {
            if (z.im.abs() - 1.0).abs() < 1e-12 && z.re.abs() < 1e-12 {
                n_i += 1;
            }
            if (z - 1.0).norm() < 1e-12 {
                n_one += 1;
            }
        }
        assert_eq!((n_i, n_one), (2, 4));
    }

    #[test]
    fn class_examples() {
        let cl = eigen_classes(&HMat3::diag(Quaternion::J, Quaternion::ONE, Quaternion::ONE)).unwrap();
        assert_eq!(cl.len(), 2);
        let r = reps(&cl);
        assert!(r.iter().any(|(z, m)| (z - c(1.0, 0.0)).norm() < 1e-12 && *m == 2));
        assert!(r.iter().any(|(z, m)| (z - c(0.0, 1.0)).norm() < 1e-12 && *m == 1));

        let cl = eigen_classes(&HMat3::diag_real(0.5, 1.0, 2.0)).unwrap();
        let mods: Vec<f64> = cl.iter().map(|c| c.modulus).collect();
        assert_eq!(cl.len(), 3);
        for (m, e) in mods.iter().zip([0.5, 1.0, 2.0]) {
            assert!((m - e).abs() < 1e-12);
        }

        let cl = eigen_classes(&vertical()).unwrap();
        assert_eq!(cl.len(), 1);
        assert_eq!(cl[0].algebraic_multiplicity, 3);
        assert!((cl[0].representative - 1.0).norm() < 1e-12);
    }

    #[test]
    fn jordan_examples() {
        let j = jordan_structure(&vertical(), RANK_TOL).unwrap();
        assert_eq!(j.sizes(), vec![2, 1]);
        let j = jordan_structure(&non_vertical(), RANK_TOL).unwrap();
        assert_eq!(j.sizes(), vec![3]);
        let j = jordan_structure(&HMat3::diag_real(0.5, 1.0, 2.0), RANK_TOL).unwrap();
        assert_eq!(j.sizes(), vec![1, 1, 1]);
        assert!(j.is_semisimple());
        // non-real block: J(i, 2) ⊕ 1
        let mut m = HMat3::diag(Quaternion::I, Quaternion::I, Quaternion::ONE);
        m[(0, 1)] = Quaternion::ONE;
        let j = jordan_structure(&m, RANK_TOL).unwrap();
        assert_eq!(j.sizes(), vec![2, 1]);
    }

    #[test]
    fn fixed_point_examples() {
        let f = fixed_points(&HMat3::diag_real(0.5, 1.0, 2.0), RANK_TOL).unwrap();
        assert_eq!(f.components.len(), 3);
        for (i, comp) in f.components.iter().enumerate() {
            match comp {
                FixedComponent::Point(p) => assert!(chordal_dist(p, &ProjPoint::basis(i)) < 1e-12),
                other => panic!("unexpected {other:?}"),
            }
        }

        let f = fixed_points(&HMat3::diag_real(2.0, 2.0, 0.25), RANK_TOL).unwrap();
        assert_eq!(f.components.len(), 2);
        assert!(matches!(&f.components[0], FixedComponent::Point(p) if chordal_dist(p, &ProjPoint::e3()) < 1e-12));
        match &f.components[1] {
            FixedComponent::Line(l) => {
                assert!(point_line_dist(&ProjPoint::e1(), l) < 1e-12);
                assert!(point_line_dist(&ProjPoint::e2(), l) < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }

        let two_i = Quaternion::new(0.0, 2.0, 0.0, 0.0);
        let f = fixed_points(&HMat3::diag(two_i, two_i, Quaternion::real(0.25)), RANK_TOL).unwrap();
        assert_eq!(f.components.len(), 2);
        match &f.components[1] {
            FixedComponent::ComplexLine(vs) => {
                for v in vs {
                    assert!(v[2].norm() < 1e-12);
                    assert!(v[0].is_complex(1e-12) && v[1].is_complex(1e-12));
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn proximality_examples() {
        assert!(is_proximal(&HMat3::diag_real(0.5, 1.0, 2.0)));
        let rot = |t: f64| Quaternion::from_polar_turns(1.0, t);
        assert!(!is_proximal(&HMat3::diag(rot(1.0 / 3.0), rot(0.2), rot(-(1.0 / 3.0 + 0.2)))));
        let screw = HMat3::diag(Quaternion::new(0.0, 2.0, 0.0, 0.0), Quaternion::real(2.0), Quaternion::real(0.25));
        assert!(!is_proximal(&screw));
    }

    #[test]
    fn attracting_point_examples() {
        let p = attracting_fixed_point(&HMat3::diag_real(0.5, 1.0, 2.0)).unwrap();
        assert!(chordal_dist(&p, &ProjPoint::e3()) < 1e-12);
        let mut lp = HMat3::diag_real(2.0, 2.0, 0.25);
        lp[(0, 1)] = Quaternion::ONE;
        let p = attracting_fixed_point(&lp).unwrap();
        assert!(chordal_dist(&p, &ProjPoint::e1()) < 1e-12);
        let screw = HMat3::diag(Quaternion::new(0.0, 2.0, 0.0, 0.0), Quaternion::real(2.0), Quaternion::real(0.25));
        assert!(matches!(attracting_fixed_point(&screw), Err(Error::Precondition(_))));
    }

    #[test]
    fn attracting_point_is_covariant() {
        let s = HMat3([
            [Quaternion::new(1.0, 0.5, 0.0, 0.2), Quaternion::J, Quaternion::ZERO],
            [Quaternion::real(0.3), Quaternion::new(2.0, 0.0, 0.1, 0.0), Quaternion::K],
            [Quaternion::I, Quaternion::ZERO, Quaternion::new(1.5, -0.3, 0.0, 0.4)],
        ]);
        let g = s * HMat3::diag_real(0.5, 1.0, 2.0) * s.inverse().unwrap();
        let p = attracting_fixed_point(&g).unwrap();
        let expect = ProjPoint::new(s.col(2)).unwrap();
        assert!(chordal_dist(&p, &expect) < 1e-10);
    }

    #[test]
    fn spectral_record_shape() {
        let a = HMat3::diag_real(0.5, 1.0, 2.0);
        let data = SpectralData::new(&eigen_classes(&a).unwrap(), &jordan_structure(&a, RANK_TOL).unwrap());
        let js = serde_json::to_value(&data).unwrap();
        assert_eq!(js["classes"].as_array().unwrap().len(), 3);
        assert_eq!(js["blocks"][0].as_array().unwrap().len(), 3);
    }

    fn quat() -> impl Strategy<Value = Quaternion> {
        prop::array::uniform4(-1.0f64..1.0).prop_map(Quaternion::from_array)
    }

    fn hmat() -> impl Strategy<Value = HMat3> {
        prop::array::uniform3(prop::array::uniform3(quat())).prop_map(HMat3)
    }

    fn well_conditioned() -> impl Strategy<Value = HMat3> {
        hmat().prop_map(|a| a.add(&HMat3::identity().scale_real(4.0)))
    }

    proptest! {
        #[test]
        fn phi_spectrum_is_conjugation_closed(a in hmat()) {
            let ev = phi_eigenvalues(&a).unwrap();
            let mut used = [false; 6];
            for i in 0..6 {
                if used[i] { continue; }
                used[i] = true;
                let k = (0..6).filter(|&k| !used[k])
                    .min_by(|&k, &l| (ev[k] - ev[i].conj()).norm().total_cmp(&(ev[l] - ev[i].conj()).norm()))
                    .unwrap();
                prop_assert!((ev[k] - ev[i].conj()).norm() <= 1e-9);
                used[k] = true;
            }
        }

        #[test]
        fn classes_are_similarity_invariant(a in hmat(), s in well_conditioned()) {
            let b = s * a * s.inverse().unwrap();
            let ca = eigen_classes(&a);
            let cb = eigen_classes(&b);
            prop_assume!(ca.is_ok() && cb.is_ok());
            let (ca, cb) = (ca.unwrap(), cb.unwrap());
            prop_assume!(ca.len() == 3 && cb.len() == 3);
            // generic matrices have well separated classes
            prop_assume!(ca.windows(2).all(|w| (w[0].representative - w[1].representative).norm() > 1e-3));
            for x in &ca {
                let best = cb.iter().map(|y| (x.representative - y.representative).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(best <= 1e-8, "class {} moved by {best:e}", x.representative);
            }
        }

        #[test]
        fn diagonal_blocks_have_size_one(d in prop::array::uniform3(0.2f64..3.0)) {
            prop_assume!((d[0] - d[1]).abs() > 1e-3 && (d[1] - d[2]).abs() > 1e-3 && (d[0] - d[2]).abs() > 1e-3);
            let j = jordan_structure(&HMat3::diag_real(d[0], d[1], d[2]), RANK_TOL).unwrap();
            prop_assert_eq!(j.sizes(), vec![1, 1, 1]);
            prop_assert_eq!(j.blocks.iter().map(|b| b.1).sum::<usize>(), 3);
        }

        #[test]
        fn block_total_is_three(a in well_conditioned()) {
            if let Ok(j) = jordan_structure(&a, RANK_TOL) {
                prop_assert_eq!(j.blocks.iter().map(|b| b.1).sum::<usize>(), 3);
            }
        }
    }
}
