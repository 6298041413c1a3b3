//! Orbits, renormalized power limits, cluster detection, density checks and
//! the explicit compact-set witness sequences.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classify::{canonical_form, AngleSpec, ElementClass, Fine};
use crate::error::{Error, Result};
use crate::hmat::{HMat3, HVec3};
use crate::limitsets::{descriptor_dist, LimitSetDescriptor};
use crate::projective::{apply, chordal_dist, line_through, orth_residual, point_line_dist, ProjLine, ProjPoint};
use crate::quat::Quaternion;
use crate::spectra::kernel_basis;

/// Search cap for the density checks.
pub const DENSITY_CAP: u64 = 10_000_000;
/// Largest power reached by `limit_of_powers` with default settings.
pub const DEFAULT_POWER_HORIZON: u64 = 1 << 40;
/// Samples closer than this to the excluded set are redrawn.
pub const L0_EXCLUSION: f64 = 0.05;
const MAX_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// `g` or `g⁻¹`.
    pub fn generator(self, g: &HMat3) -> Result<HMat3> {
        match self {
            Direction::Forward => Ok(*g),
            Direction::Backward => g.inverse(),
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Projective subspace of dimension −1, 0, 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Subspace {
    Empty,
    Point { point: ProjPoint },
    Line { line: ProjLine },
    Whole,
}

impl Subspace {
    pub fn point(p: ProjPoint) -> Self {
        Subspace::Point { point: p }
    }

    pub fn line(l: ProjLine) -> Self {
        Subspace::Line { line: l }
    }

    /// Quaternionic dimension of the underlying right submodule.
    pub fn rank(&self) -> usize {
        match self {
            Subspace::Empty => 0,
            Subspace::Point { .. } => 1,
            Subspace::Line { .. } => 2,
            Subspace::Whole => 3,
        }
    }

    /// Same subspace up to `tol` in chordal distance of points or polars.
    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        match (self, other) {
            (Subspace::Empty, Subspace::Empty) | (Subspace::Whole, Subspace::Whole) => true,
            (Subspace::Point { point: a }, Subspace::Point { point: b }) => chordal_dist(a, b) <= tol,
            (Subspace::Line { line: a }, Subspace::Line { line: b }) => chordal_dist(&a.polar, &b.polar) <= tol,
            _ => false,
        }
    }

    /// Chordal distance from `p` to the subspace (∞ for the empty set).
    pub fn dist(&self, p: &ProjPoint) -> f64 {
        match self {
            Subspace::Empty => f64::INFINITY,
            Subspace::Point { point } => chordal_dist(point, p),
            Subspace::Line { line } => point_line_dist(p, line),
            Subspace::Whole => 0.0,
        }
    }

    fn from_basis(vs: &[HVec3]) -> Result<Self> {
        Ok(match vs.len() {
            0 => Subspace::Empty,
            1 => Subspace::point(ProjPoint::new(vs[0])?),
            2 => Subspace::line(line_through(&ProjPoint::new(vs[0])?, &ProjPoint::new(vs[1])?)?),
            _ => Subspace::Whole,
        })
    }

    /// Orthogonal complement of the span of an ℍ-orthonormal set.
    fn complement(vs: &[HVec3]) -> Result<Self> {
        Ok(match vs.len() {
            0 => Subspace::Whole,
            1 => Subspace::line(ProjLine::from_polar(ProjPoint::new(vs[0])?)),
            2 => {
                let r = (0..3)
                    .map(|i| orth_residual(orth_residual(HVec3::basis(i), vs), vs))
                    .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                    .expect("three candidates");
                Subspace::point(ProjPoint::new(r)?)
            }
            _ => Subspace::Empty,
        })
    }
}

/// Projective map of a nonzero, possibly singular matrix, defined off its kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoProjective {
    pub matrix: HMat3,
    pub kernel: Subspace,
    pub image: Subspace,
}

impl PseudoProjective {
    /// Determines kernel and image numerically with relative rank tolerance.
    pub fn new(matrix: HMat3, rank_tol: f64) -> Result<Self> {
        if !matrix.is_finite() || matrix.sup_norm() == 0.0 {
            return Err(Error::Domain("pseudo-projective map needs a nonzero finite matrix".into()));
        }
        let m = matrix.sup_normalized();
        let kernel = Subspace::from_basis(&kernel_basis(&m, rank_tol))?;
        let image = Subspace::complement(&kernel_basis(&m.conj_transpose(), rank_tol))?;
        Ok(PseudoProjective { matrix, kernel, image })
    }

    pub fn apply(&self, p: &ProjPoint) -> Result<ProjPoint> {
        apply(&self.matrix, p)
    }
}

/// `gⁿ(p)` for a range of exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub generator: HMat3,
    pub base: ProjPoint,
    pub samples: Vec<(i64, ProjPoint)>,
}

impl OrbitTrace {
    pub fn last(&self) -> Option<&ProjPoint> {
        self.samples.last().map(|(_, p)| p)
    }

    pub fn point_at(&self, n: i64) -> Option<&ProjPoint> {
        self.samples.iter().find(|(m, _)| *m == n).map(|(_, p)| p)
    }

    /// Whitespace-separated table: `n` then the twelve real components of
    /// the canonical representative.
    pub fn to_table(&self) -> String {
        let mut out = String::from("n");
        for c in ["x", "y", "z"] {
            for p in ["w", "x", "y", "z"] {
                out.push_str(&format!(" {c}.{p}"));
            }
        }
        out.push('\n');
        for (n, p) in &self.samples {
            out.push_str(&n.to_string());
            for v in p.rep().to_arrays().iter().flatten() {
                out.push_str(&format!(" {v:e}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the output of [`OrbitTrace::to_table`] back into samples.
    pub fn parse_table(text: &str) -> Result<Vec<(i64, ProjPoint)>> {
        let bad = |line: usize, msg: &str| Error::Validation(format!("trace line {line}: {msg}"));
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 13 {
                return Err(bad(i + 1, "expected 13 columns"));
            }
            let n: i64 = fields[0].parse().map_err(|_| bad(i + 1, "bad index"))?;
            let mut v = [0.0; 12];
            for (k, f) in fields[1..].iter().enumerate() {
                v[k] = f.parse().map_err(|_| bad(i + 1, "bad number"))?;
            }
            let q = |k: usize| Quaternion::from_array([v[4 * k], v[4 * k + 1], v[4 * k + 2], v[4 * k + 3]]);
            rows.push((n, ProjPoint::new(HVec3::new(q(0), q(1), q(2)))?));
        }
        Ok(rows)
    }
}

/// `gⁿ(p)` for `n_from ≤ n ≤ n_to`, each step applied to the previous canonical point.
/// Negative exponents iterate `g⁻¹` outward from `p`.
pub fn orbit(g: &HMat3, p: &ProjPoint, n_from: i64, n_to: i64) -> Result<OrbitTrace> {
    if n_from > n_to {
        return Err(Error::Domain(format!("empty exponent range {n_from}..={n_to}")));
    }
    let mut samples = Vec::with_capacity((n_to - n_from + 1) as usize);
    if n_from < 0 {
        let inv = g.inverse()?;
        let mut back = Vec::new();
        let mut q = *p;
        for n in 1..=(-n_from) {
            q = apply(&inv, &q)?;
            if n >= -n_to {
                back.push((-n, q));
            }
        }
        samples.extend(back.into_iter().rev());
    } else {
        // invertibility is still required for the forward-only case
        g.inverse()?;
    }
    if n_to >= 0 {
        let mut q = *p;
        if n_from <= 0 {
            samples.push((0, q));
        }
        for n in 1..=n_to {
            q = apply(g, &q)?;
            if n >= n_from {
                samples.push((n, q));
            }
        }
    }
    Ok(OrbitTrace { generator: *g, base: *p, samples })
}

/// `gⁿ / sup_norm` by binary powering, renormalizing after every product.
pub fn normalized_power(g: &HMat3, mut n: u64) -> HMat3 {
    let mut acc = HMat3::identity();
    let mut base = g.sup_normalized();
    while n > 0 {
        if n & 1 == 1 {
            acc = acc.mat_mul(&base).sup_normalized();
        }
        base = base.mat_mul(&base).sup_normalized();
        n >>= 1;
    }
    acc
}

/// `Bₙ = gⁿ/‖gⁿ‖` for `n = 1..=n_max`, computed incrementally.
pub fn normalized_powers(g: &HMat3, direction: Direction, n_max: usize) -> Result<Vec<HMat3>> {
    let step = direction.generator(g)?.sup_normalized();
    let mut out = Vec::with_capacity(n_max);
    let mut b = HMat3::identity();
    for _ in 0..n_max {
        b = b.mat_mul(&step).sup_normalized();
        out.push(b);
    }
    Ok(out)
}

/// Limits of `B_{2^k} = g^{±2^k}/‖g^{±2^k}‖` up to `2^k ≤ n_max`. The last
/// quarter of the squaring sequence is clustered (entrywise radius 1e-3) and
/// each cluster representative is returned as a pseudo-projective map. All
/// representatives must share the same kernel.
pub fn limit_of_powers(
    g: &HMat3,
    direction: Direction,
    n_max: u64,
    rank_tol: f64,
) -> Result<Vec<PseudoProjective>> {
    if n_max == 0 {
        return Err(Error::Domain("limit_of_powers needs n_max ≥ 1".into()));
    }
    let mut b = direction.generator(g)?.sup_normalized();
    let mut seq = vec![b];
    let mut k: u64 = 1;
    while k <= n_max / 2 {
        b = b.mat_mul(&b).sup_normalized();
        k *= 2;
        seq.push(b);
    }
    let tail = &seq[seq.len() - (seq.len() / 4).max(1)..];
    let mut reps: Vec<HMat3> = Vec::new();
    for m in tail {
        if !reps.iter().any(|r| r.max_abs_diff(m) <= 1e-3) {
            reps.push(*m);
        }
    }
    let maps = reps
        .into_iter()
        .map(|m| PseudoProjective::new(m, rank_tol))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = maps.first() {
        if let Some(bad) = maps.iter().find(|m| !m.kernel.same_as(&first.kernel, 1e-6)) {
            return Err(Error::Diagnostic(format!(
                "power-limit kernels disagree (ranks {} and {}); increase n_max or tighten rank_tol",
                first.kernel.rank(),
                bad.kernel.rank()
            )));
        }
    }
    Ok(maps)
}

/// Greedy metric clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub representatives: Vec<ProjPoint>,
    pub radius: f64,
}

impl ClusterSet {
    pub fn new(radius: f64) -> Self {
        ClusterSet { representatives: Vec::new(), radius }
    }

    /// Adds `p` unless it is within the radius of an existing representative.
    pub fn insert(&mut self, p: ProjPoint) {
        if !self.representatives.iter().any(|r| chordal_dist(r, &p) <= self.radius) {
            self.representatives.push(p);
        }
    }

    pub fn merge(&mut self, other: &ClusterSet) {
        for p in &other.representatives {
            self.insert(*p);
        }
    }

    /// Largest distance from a representative to `target`.
    pub fn max_dist(&self, target: impl Fn(&ProjPoint) -> f64) -> f64 {
        self.representatives.iter().map(target).fold(0.0, f64::max)
    }
}

/// Clusters the samples of `trace` from position `tail_start` on.
pub fn cluster_points(trace: &OrbitTrace, tail_start: usize, eps: f64) -> ClusterSet {
    let mut set = ClusterSet::new(eps);
    for (_, p) in trace.samples.iter().skip(tail_start) {
        set.insert(*p);
    }
    set
}

/// Independent random stream for sample `index` under `seed`.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn random_quaternion<R: Rng>(rng: &mut R) -> Quaternion {
    let mut c = [0.0; 4];
    for x in &mut c {
        *x = rng.sample(StandardNormal);
    }
    Quaternion::from_array(c)
}

/// Three standard normal quaternions, redrawn while the norm is below 1e-3.
pub fn random_point<R: Rng>(rng: &mut R) -> ProjPoint {
    loop {
        let v = HVec3::new(random_quaternion(rng), random_quaternion(rng), random_quaternion(rng));
        if v.norm() >= 1e-3 {
            return ProjPoint::new(v).expect("nonzero finite");
        }
    }
}

/// Maps `f` over `0..n`, in parallel when the feature is enabled; output order
/// is the index order either way.
pub fn par_map_indexed<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `count` seeded random points accepted by `keep`, one stream per index.
pub fn sample_points<F>(seed: u64, count: u64, keep: F) -> Result<Vec<ProjPoint>>
where
    F: Fn(&ProjPoint) -> bool + Sync + Send,
{
    par_map_indexed(count, |i| {
        let mut rng = point_rng(seed, i);
        (0..MAX_DRAWS)
            .map(|_| random_point(&mut rng))
            .find(|p| keep(p))
            .ok_or_else(|| Error::Diagnostic(format!("sample {i}: no acceptable point in {MAX_DRAWS} draws")))
    })
    .into_iter()
    .collect()
}

/// Cluster points of forward and backward orbits of the given points. Each
/// orbit runs `max_iter` steps and its last 20% is clustered with radius `eps`.
pub fn cluster_orbits(g: &HMat3, points: &[ProjPoint], max_iter: u64, eps: f64) -> Result<ClusterSet> {
    let n = max_iter as i64;
    let tail = (max_iter as usize * 4) / 5;
    let per_point = par_map_indexed(points.len() as u64, |i| -> Result<ClusterSet> {
        let p = &points[i as usize];
        let mut set = cluster_points(&orbit(g, p, 0, n)?, tail, eps);
        let back = orbit(g, p, -n, 0)?;
        // backward samples are stored in ascending n, so the tail is at the front
        let mut back_set = ClusterSet::new(eps);
        for (_, q) in back.samples.iter().take(back.samples.len() - tail) {
            back_set.insert(*q);
        }
        set.merge(&back_set);
        Ok(set)
    });
    let mut all = ClusterSet::new(eps);
    for s in per_point {
        all.merge(&s?);
    }
    Ok(all)
}

/// Settings shared by the sampling campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub samples: u64,
    pub seed: u64,
    pub max_iter: u64,
    pub eps: f64,
}

impl Default for Campaign {
    fn default() -> Self {
        Campaign { samples: 200, seed: 0, max_iter: 500, eps: 1e-3 }
    }
}

/// Estimate of L₁: cluster points of orbits of random points farther than
/// [`L0_EXCLUSION`] from the predicted L₀.
pub fn kulkarni_l1_estimate(g: &HMat3, l0: &LimitSetDescriptor, c: &Campaign) -> Result<ClusterSet> {
    let points = sample_points(c.seed, c.samples, |p| descriptor_dist(p, l0) > L0_EXCLUSION)?;
    cluster_orbits(g, &points, c.max_iter, c.eps)
}

/// Least `n ∈ [1, n_max]` with `chordal_dist(gⁿp, p) < eps`.
pub fn recurrence_check(g: &HMat3, p: &ProjPoint, eps: f64, n_max: u64) -> Result<u64> {
    let mut q = *p;
    let mut best = f64::INFINITY;
    for n in 1..=n_max {
        q = apply(g, &q)?;
        let d = chordal_dist(&q, p);
        if d < eps {
            return Ok(n);
        }
        best = best.min(d);
    }
    Err(Error::Diagnostic(format!("no return within {eps} up to n = {n_max} (closest {best:.3e})")))
}

fn frac(x: f64) -> f64 {
    x.rem_euclid(1.0)
}

const FIXED_ONE: f64 = 9_007_199_254_740_992.0; // 2^53

/// Least `N` such that `{e^{2πinα} : 0 ≤ n ≤ N}` has all angular gaps at most
/// `2·asin(eps/2)`. Orbit points within 1e-12 turns of an existing point are
/// treated as repeats.
pub fn density_check_s1(alpha: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain("density_check_s1 needs finite alpha and eps > 0".into()));
    }
    let limit = 2.0 * (eps / 2.0).min(1.0).asin() / std::f64::consts::TAU;
    let limit_fx = (limit * FIXED_ONE) as u64;
    let dup = (1e-12 * FIXED_ONE) as u64;
    let total = FIXED_ONE as u64;
    let mut pts: BTreeSet<u64> = BTreeSet::new();
    let mut gaps: BTreeMap<u64, u64> = BTreeMap::new();
    pts.insert(0);
    gaps.insert(total, 1);
    let gap_sub = |gaps: &mut BTreeMap<u64, u64>, g: u64| {
        let e = gaps.get_mut(&g).expect("gap present");
        *e -= 1;
        if *e == 0 {
            gaps.remove(&g);
        }
    };
    for n in 1..=DENSITY_CAP {
        let x = ((frac(n as f64 * alpha) * FIXED_ONE) as u64).min(total - 1);
        let prev = pts.range(..=x).next_back().copied().unwrap_or_else(|| *pts.iter().next_back().unwrap());
        let next = pts.range(x..).next().copied().unwrap_or_else(|| *pts.iter().next().unwrap());
        let circ = |a: u64, b: u64| if b > a { b - a } else { b + total - a };
        let near = |a: u64| {
            let d = a.abs_diff(x);
            d.min(total - d) <= dup
        };
        if !near(prev) && !near(next) {
            let old = if prev == next { total } else { circ(prev, next) };
            gap_sub(&mut gaps, old);
            *gaps.entry(circ(prev, x)).or_default() += 1;
            *gaps.entry(circ(x, next)).or_default() += 1;
            pts.insert(x);
        }
        let max_gap = *gaps.keys().next_back().expect("nonempty");
        if max_gap <= limit_fx {
            return Ok(n);
        }
    }
    let max_gap = *gaps.keys().next_back().expect("nonempty") as f64 / FIXED_ONE;
    Err(Error::CapReached { cap: DENSITY_CAP, achieved: 2.0 * (std::f64::consts::PI * max_gap).sin() })
}

/// Least `N` such that every cell of the `⌈1/eps⌉²` grid on the torus
/// (coordinates in turns) contains some `(nα, nβ)` with `n ≤ N`.
pub fn density_check_t2(alpha: f64, beta: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::Domain("density_check_t2 needs finite angles and eps > 0".into()));
    }
    let m = (1.0 / eps).ceil() as usize;
    let cells = m * m;
    let mut hit = vec![false; cells];
    let mut covered = 0usize;
    let cell = |t: f64| ((frac(t) * m as f64) as usize).min(m - 1);
    for n in 0..=DENSITY_CAP {
        let c = cell(n as f64 * alpha) * m + cell(n as f64 * beta);
        if !hit[c] {
            hit[c] = true;
            covered += 1;
            if covered == cells {
                return Ok(n);
            }
        }
    }
    Err(Error::CapReached { cap: DENSITY_CAP, achieved: covered as f64 / cells as f64 })
}

/// Extended-range quaternion `m·2^e`, used where witness coordinates leave
/// the double range.
#[derive(Debug, Clone, Copy)]
struct Ext {
    m: Quaternion,
    e: f64,
}

impl Ext {
    fn new(q: Quaternion, e: f64) -> Ext {
        let n = q.norm();
        if n == 0.0 || !n.is_finite() {
            return Ext { m: Quaternion::ZERO, e: f64::NEG_INFINITY };
        }
        let k = n.log2().floor();
        Ext { m: q * (-k).exp2(), e: e + k }
    }

    fn of(q: Quaternion) -> Ext {
        Ext::new(q, 0.0)
    }

    fn is_zero(&self) -> bool {
        self.e == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy)]
struct ExtVec([Ext; 3]);

impl ExtVec {
    fn apply(&self, g: &HMat3) -> ExtVec {
        let mut out = [Ext::of(Quaternion::ZERO); 3];
        for (i, o) in out.iter_mut().enumerate() {
            let terms: Vec<(Quaternion, f64)> = (0..3)
                .filter(|&j| !self.0[j].is_zero() && g[(i, j)] != Quaternion::ZERO)
                .map(|j| (g[(i, j)] * self.0[j].m, self.0[j].e))
                .collect();
            let Some(emax) = terms.iter().map(|t| t.1).reduce(f64::max) else {
                continue;
            };
            let s: Quaternion = terms.iter().map(|(q, e)| *q * (e - emax).exp2()).sum();
            *o = Ext::new(s, emax);
        }
        ExtVec(out)
    }

    fn to_point(self) -> Result<ProjPoint> {
        let emax = self.0.iter().map(|x| x.e).fold(f64::NEG_INFINITY, f64::max);
        if emax == f64::NEG_INFINITY {
            return Err(Error::Domain("witness image is the zero vector".into()));
        }
        let c = |x: Ext| if x.is_zero() { Quaternion::ZERO } else { x.m * (x.e - emax).exp2() };
        ProjPoint::new(HVec3::new(c(self.0[0]), c(self.0[1]), c(self.0[2])))
    }
}

/// One term `kₙ` of a compact-set witness sequence: `g^{±n}(kₙ)` approaches the target.
#[derive(Debug, Clone, Copy)]
pub struct Witness {
    pub n: u64,
    pub direction: Direction,
    k: ExtVec,
}

impl Witness {
    /// `kₙ` as a projective point when it is representable in double range.
    pub fn point(&self) -> Result<ProjPoint> {
        self.k.to_point()
    }

    /// `g^{±n}(kₙ)`, iterated in extended range.
    pub fn image(&self, g: &HMat3) -> Result<ProjPoint> {
        let step = self.direction.generator(g)?;
        let mut v = self.k;
        for _ in 0..self.n {
            v = v.apply(&step);
        }
        v.to_point()
    }
}

fn log_norm(q: Quaternion) -> f64 {
    q.norm().log2()
}

/// `x·y⁻¹` for a target `[.. x .. y ..]`, or a domain error when `y` vanishes.
fn ratio(x: Quaternion, y: Quaternion, what: &str) -> Result<Quaternion> {
    if y.norm() <= 1e-9 {
        return Err(Error::Domain(format!("target has no {what} coordinate to normalize by")));
    }
    Ok(x * y.inverse()?)
}

fn hypot_log(a: f64, b: f64) -> f64 {
    // log2 √(2^{2a} + 2^{2b})
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + 0.5 * (1.0 + (2.0 * (lo - hi)).exp2()).log2()
}

/// The witness term `kₙ` for `target` on a predicted L₂ line of the canonical form.
pub fn l2_witness(class: &ElementClass, target: &ProjPoint, n: u64) -> Result<Witness> {
    if n == 0 {
        return Err(Error::Domain("witness index must be positive".into()));
    }
    let g = canonical_form(class)?;
    let t = target.rep();
    let nf = n as f64;
    let on = |i: usize| t[i].norm() <= 1e-9;
    let plain = |a: Quaternion, b: Quaternion, c: Quaternion| ExtVec([Ext::of(a), Ext::of(b), Ext::of(c)]);
    let unsupported = || Error::Domain(format!("no witness for {} targeting this point", class.fine));
    let (direction, k) = match class.fine {
        Fine::RegularLoxodromic => {
            let (l, m, x) = (g[(0, 0)], g[(1, 1)], g[(2, 2)]);
            if on(0) {
                // target [0:y:z] on 𝕃{e₂,e₃}
                let (y, z) = (t[1], t[2]);
                let ey = nf * log_norm(x) + log_norm(y);
                let ez = nf * log_norm(m) + log_norm(z);
                let k = ExtVec([
                    Ext::new(Quaternion::ONE, hypot_log(ey, ez)),
                    Ext::new(y, nf * log_norm(x)),
                    Ext::new(z, nf * log_norm(m)),
                ]);
                (Direction::Forward, k)
            } else if on(2) {
                // target [x:y:0] on 𝕃{e₁,e₂}
                let (a, b) = (t[0], t[1]);
                let ea = -nf * log_norm(m) + log_norm(a);
                let eb = -nf * log_norm(l) + log_norm(b);
                let k = ExtVec([
                    Ext::new(a, -nf * log_norm(m)),
                    Ext::new(b, -nf * log_norm(l)),
                    Ext::new(Quaternion::ONE, hypot_log(ea, eb)),
                ]);
                (Direction::Backward, k)
            } else {
                return Err(unsupported());
            }
        }
        Fine::LoxoParabolic => {
            let l = g[(0, 0)];
            if l.norm() <= 1.0 {
                return Err(Error::Domain("loxo-parabolic witnesses are given for |λ| > 1".into()));
            }
            if on(1) && !on(2) {
                // target [w:0:1] on 𝕃{e₁,e₃}
                let w = ratio(t[0], t[2], "third")?;
                if w.norm() <= 1e-12 {
                    return Err(unsupported());
                }
                let k = ExtVec([
                    Ext::of(Quaternion::ONE),
                    Ext::of(Quaternion::ONE),
                    Ext::new(-(w.inverse()? * nf), -(3.0 * nf + 1.0) * log_norm(l)),
                ]);
                (Direction::Backward, k)
            } else if on(2) && !on(1) {
                // target [y:1:0] on 𝕃{e₁,e₂}
                let y = ratio(t[0], t[1], "second")?;
                let k = plain(-l.inverse()? + y * (1.0 / nf), Quaternion::real(1.0 / nf), Quaternion::real(1.0 / l.norm()));
                (Direction::Forward, k)
            } else {
                return Err(unsupported());
            }
        }
        Fine::NonVerticalTranslation | Fine::ElliptoTranslation => {
            if !on(2) {
                return Err(unsupported());
            }
            // target [x:1:0] on 𝕃{e₁,e₂}
            let x = ratio(t[0], t[1], "second")?;
            let c = g[(0, 0)].unit();
            let k = plain(x, Quaternion::real(-1.0 + 1.0 / nf), c * (2.0 / nf));
            (Direction::Forward, k)
        }
        _ => return Err(unsupported()),
    };
    Ok(Witness { n, direction, k })
}

/// Angles (in turns) of the eigenvalues of the class's canonical form.
fn class_angles(class: &ElementClass) -> Vec<f64> {
    [&class.params.lambda, &class.params.mu, &class.params.xi]
        .iter()
        .filter_map(|p| p.as_ref().map(|e| e.angle.turns()))
        .collect()
}

/// Exponent `n ∈ [n_max/2, n_max]` at which all eigenvalue phases of the
/// class are closest to 1, preferring larger `n` on ties. Witness sequences
/// converge along such subsequences when phases rotate.
pub fn aligned_exponent(class: &ElementClass, n_max: u64) -> u64 {
    let angles = class_angles(class);
    let off = |n: u64| {
        angles
            .iter()
            .map(|a| {
                let f = frac(n as f64 * a);
                f.min(1.0 - f)
            })
            .fold(0.0, f64::max)
    };
    let lo = (n_max / 2).max(1);
    (lo..=n_max.max(1)).rev().min_by(|a, b| off(*a).total_cmp(&off(*b))).unwrap_or(n_max)
}

/// Whether every angle of the class is rational.
pub fn all_rational(class: &ElementClass) -> bool {
    [&class.params.lambda, &class.params.mu, &class.params.xi]
        .iter()
        .filter_map(|p| p.as_ref())
        .all(|e| matches!(e.angle, AngleSpec::Rational { .. }))
}
