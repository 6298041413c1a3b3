//! Per-subclass verification campaigns and the versioned report format.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::{canonical_form, classify_spec, projective_order, Confidence, ElementClass, ElementSpec, Fine, ProjectiveOrder};
use crate::dynamics::{
    density_check_s1, l2_witness, limit_of_powers, normalized_power, orbit, par_map_indexed, point_rng,
    random_quaternion, recurrence_check, sample_points, aligned_exponent, Direction, DEFAULT_POWER_HORIZON,
    L0_EXCLUSION,
};
use crate::error::{Error, Result};
use crate::hmat::{HMat3, HVec3};
use crate::limitsets::{
    descriptor_dist, descriptor_invariance_check, dual_attractors, power_limits, predict_conze_guivarch,
    predict_kulkarni, sample_atom, witness_lines, Atom, DualDescriptor, KulkarniPrediction,
};
use crate::projective::{apply, chordal_dist, ProjPoint};
use crate::spectra::RANK_TOL;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Sample points closer than this to a power-limit kernel are redrawn.
pub const KERNEL_EXCLUSION: f64 = 0.2;

const DUAL_ENCODING: &str = "dual points are polars: the line {x : sum conj(q_i) x_i = 0} is stored as [q]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
    pub iterations: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn measured(name: &str, measured: f64, threshold: f64, iterations: u64, seed: u64) -> Self {
        let status = if measured <= threshold { Status::Pass } else { Status::Fail };
        Check { name: name.into(), status, measured, threshold, iterations, seed, note: None }
    }

    fn skipped(name: &str, why: &str, seed: u64) -> Self {
        Check {
            name: name.into(),
            status: Status::Skipped,
            measured: 0.0,
            threshold: 0.0,
            iterations: 0,
            seed,
            note: Some(why.into()),
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.note = Some(s.into());
        self
    }
}

/// Campaign settings; `None` fields take the per-class defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: u64,
    pub max_iter: Option<u64>,
    pub tol: Option<f64>,
    pub cluster_eps: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { samples: 200, max_iter: None, tol: None, cluster_eps: 1e-3, seed: 0 }
    }
}

/// Options with defaults filled in for a class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOptions {
    pub samples: u64,
    pub max_iter: u64,
    pub tol: f64,
    pub cluster_eps: f64,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn resolve(&self, fine: Fine) -> ResolvedOptions {
        let slow = fine.polynomial_rate();
        ResolvedOptions {
            samples: self.samples,
            max_iter: self.max_iter.unwrap_or(if slow { 10_000 } else { 500 }),
            tol: self.tol.unwrap_or(if slow { 1e-3 } else { 1e-6 }),
            cluster_eps: self.cluster_eps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub kulkarni: KulkarniPrediction,
    pub dual: DualDescriptor,
    pub dual_encoding: String,
}

pub fn predictions(class: &ElementClass) -> Result<Predictions> {
    Ok(Predictions {
        kulkarni: predict_kulkarni(class)?,
        dual: predict_conze_guivarch(class),
        dual_encoding: DUAL_ENCODING.into(),
    })
}

/// Deterministic part of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub spec: ElementSpec,
    pub classification: ElementClass,
    pub confidence: Confidence,
    pub predictions: Predictions,
    pub options: ResolvedOptions,
    /// Campaigns run on the canonical representative of the class.
    pub matrix: HMat3,
    pub checks: Vec<Check>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub body: ReportBody,
    pub timing: Vec<Timing>,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Parses a report, rejecting other schema versions.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Schema { path: ".".into(), message: e.to_string() })?;
        match v.get("schema_version").and_then(|x| x.as_u64()) {
            Some(n) if n == REPORT_SCHEMA_VERSION as u64 => {}
            other => {
                return Err(Error::Schema {
                    path: "schema_version".into(),
                    message: format!("expected {REPORT_SCHEMA_VERSION}, found {other:?}"),
                })
            }
        }
        serde_path_to_error::deserialize(v)
            .map_err(|e| Error::Schema { path: e.path().to_string(), message: e.into_inner().to_string() })
    }

    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("reports serialize")
    }
}

/// Overall status: pass iff every non-skipped check passes.
pub fn overall(checks: &[Check]) -> Status {
    if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    }
}

/// Orbit convergence through `gⁿ/‖gⁿ‖` for points away from both limit kernels.
pub fn orbit_convergence_check(class: &ElementClass, g: &HMat3, o: &ResolvedOptions) -> Result<Check> {
    let name = "orbit_convergence";
    let Some((fwd, bwd)) = power_limits(class) else {
        return Ok(Check::skipped(name, "elliptic: orbits do not converge", o.seed));
    };
    let points = sample_points(o.seed, o.samples, |p| {
        fwd.kernel.dist(p) > KERNEL_EXCLUSION && bwd.kernel.dist(p) > KERNEL_EXCLUSION
    })?;
    let f = normalized_power(g, o.max_iter);
    let b = normalized_power(&g.inverse()?, o.max_iter);
    let dists = par_map_indexed(points.len() as u64, |i| -> Result<f64> {
        let p = &points[i as usize];
        Ok(fwd.image.dist(&apply(&f, p)?).max(bwd.image.dist(&apply(&b, p)?)))
    });
    let worst = dists.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(Check::measured(name, worst, o.tol, o.max_iter, o.seed))
}

/// Power-limit kernels and images against the predicted maps; measured is the mismatch count.
pub fn power_limit_check(class: &ElementClass, g: &HMat3, o: &ResolvedOptions) -> Result<Check> {
    let name = "power_limit_kernels";
    let Some((fwd, bwd)) = power_limits(class) else {
        return Ok(Check::skipped(name, "elliptic: no renormalized limit", o.seed));
    };
    let mut misses = 0u32;
    for (dir, want) in [(Direction::Forward, fwd), (Direction::Backward, bwd)] {
        match limit_of_powers(g, dir, DEFAULT_POWER_HORIZON, RANK_TOL) {
            Ok(maps) => {
                for m in maps {
                    if !m.kernel.same_as(&want.kernel, 1e-6) || !m.image.same_as(&want.image, 1e-6) {
                        misses += 1;
                    }
                }
            }
            Err(Error::Diagnostic(_)) => misses += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(Check::measured(name, misses as f64, 0.0, DEFAULT_POWER_HORIZON, o.seed))
}

/// Witness sequences for targets sampled on each predicted L₂ line.
pub fn witness_check(class: &ElementClass, g: &HMat3, o: &ResolvedOptions, per_line: u64) -> Result<Check> {
    let name = "l2_witnesses";
    let lines = witness_lines(class);
    if lines.is_empty() {
        return Ok(Check::skipped(name, "no explicit witness sequence for this subclass", o.seed));
    }
    if class.fine == Fine::LoxoParabolic && class.params.lambda.as_ref().is_some_and(|l| l.modulus < 1.0) {
        return Ok(Check::skipped(name, "witnesses are given for |lambda| > 1", o.seed));
    }
    let n = if class.fine.polynomial_rate() { aligned_exponent(class, o.max_iter) } else { 80 };
    let mut worst = 0.0f64;
    for (k, line) in lines.iter().enumerate() {
        let mut rng = point_rng(o.seed, 1_000_000 + k as u64);
        let targets = sample_atom(&Atom::Line(*line), per_line as usize, &mut rng);
        let dists = par_map_indexed(targets.len() as u64, |i| -> Result<f64> {
            let t = &targets[i as usize];
            let w = l2_witness(class, t, n)?;
            Ok(chordal_dist(&w.image(g)?, t))
        });
        for d in dists {
            worst = worst.max(d?);
        }
    }
    let tol = if class.fine.polynomial_rate() { o.tol.max(1e-3) } else { o.tol.max(1e-5) };
    Ok(Check::measured(name, worst, tol, n, o.seed))
}

/// Periodicity for rational elliptic classes, recurrence and circle density otherwise.
pub fn recurrence_checks(class: &ElementClass, g: &HMat3, o: &ResolvedOptions) -> Result<Vec<Check>> {
    let points = sample_points(o.seed, o.samples, |_| true)?;
    match class.fine {
        Fine::RationalElliptic => {
            let ProjectiveOrder::Finite(n0) = projective_order(class) else {
                return Err(Error::Consistency("rational elliptic class without finite order".into()));
            };
            let gn = normalized_power(g, n0);
            let worst = points.iter().map(|p| apply(&gn, p).map(|q| chordal_dist(&q, p))).try_fold(0.0f64, |a, d| d.map(|d| a.max(d)))?;
            Ok(vec![Check::measured("periodicity", worst, 1e-10, n0, o.seed)])
        }
        Fine::SimpleIrrationalElliptic | Fine::CompoundIrrationalElliptic(_) => {
            // return times grow like eps^-d on a d-torus; widen eps beyond one irrational angle
            let irrational = [&class.params.lambda, &class.params.mu, &class.params.xi]
                .into_iter()
                .flatten()
                .filter(|e| !e.angle.is_rational())
                .count();
            let n_max = 100_000;
            let eps = if irrational <= 1 || class.fine == Fine::SimpleIrrationalElliptic { 1e-2 } else { 5e-2 };
            let found = par_map_indexed(points.len() as u64, |i| recurrence_check(g, &points[i as usize], eps, n_max));
            let mut misses = 0u32;
            let mut longest = 0;
            for r in found {
                match r {
                    Ok(n) => longest = longest.max(n),
                    Err(Error::Diagnostic(_)) => misses += 1,
                    Err(e) => return Err(e),
                }
            }
            let mut checks = vec![Check::measured("recurrence", misses as f64, 0.0, longest, o.seed)
                .note(format!("points without return within {eps} by n = {n_max}"))];
            for e in [&class.params.lambda, &class.params.mu, &class.params.xi].into_iter().flatten() {
                if e.angle.is_rational() {
                    continue;
                }
                let (measured, n) = match density_check_s1(e.angle.turns(), eps) {
                    Ok(n) => (0.0, n),
                    Err(Error::CapReached { cap, .. }) => (1.0, cap),
                    Err(err) => return Err(err),
                };
                checks.push(Check::measured("circle_density", measured, 0.0, n, o.seed).note(format!("angle {}", e.angle.turns())));
            }
            Ok(checks)
        }
        _ => Ok(vec![Check::skipped("recurrence", "not elliptic", o.seed)]),
    }
}

/// A dual point in chart `U_{i+1}`: coordinate `i` is 1, the others standard normal.
pub fn chart_point(seed: u64, index: u64, chart: usize) -> ProjPoint {
    let mut rng = point_rng(seed, index);
    let mut v = HVec3::default();
    for j in 0..3 {
        v.0[j] = if j == chart { crate::Quaternion::ONE } else { random_quaternion(&mut rng) };
    }
    ProjPoint::new(v).expect("chart coordinate is one")
}

/// Dual-orbit convergence in each predicted chart, with budget `max_iter`
/// (ten times that for polynomial classes).
pub fn dual_convergence_check(class: &ElementClass, g: &HMat3, o: &ResolvedOptions, count: u64) -> Result<Check> {
    let name = "dual_convergence";
    let attractors = dual_attractors(class);
    if attractors.is_empty() {
        return Ok(Check::skipped(name, "elliptic: no dual attractor", o.seed));
    }
    let budget = if class.fine.polynomial_rate() { 10 * o.max_iter } else { o.max_iter };
    let mut worst = 0.0f64;
    for (k, a) in attractors.iter().enumerate() {
        let step = a.direction.generator(g)?.inverse()?.transpose();
        let m = normalized_power(&step, budget);
        let dists = par_map_indexed(count, |i| -> Result<f64> {
            let q = chart_point(o.seed, 2_000_000 + 1000 * k as u64 + i, a.chart);
            Ok(chordal_dist(&apply(&m, &q)?, &a.target))
        });
        for d in dists {
            worst = worst.max(d?);
        }
    }
    let tol = if class.fine.polynomial_rate() { o.tol.max(1e-3) } else { o.tol.max(1e-5) };
    Ok(Check::measured(name, worst, tol, budget, o.seed))
}

/// Invariance of the predicted Λ under the generator.
pub fn lambda_invariance_check(pred: &KulkarniPrediction, g: &HMat3, o: &ResolvedOptions) -> Result<Check> {
    let name = "lambda_invariance";
    if pred.lambda.is_trivial() {
        return Ok(Check::skipped(name, "Lambda is empty or the whole space", o.seed));
    }
    let samples = o.samples.max(100) as usize;
    let tol = 1e-8;
    Ok(match descriptor_invariance_check(g, &pred.lambda, samples, tol, o.seed) {
        Ok(w) => Check::measured(name, w, tol, samples as u64, o.seed),
        Err(Error::Consistency(msg)) => Check::measured(name, f64::INFINITY, tol, samples as u64, o.seed).note(msg),
        Err(e) => return Err(e),
    })
}

/// Tails of orbits of points away from L₀ lie near the predicted L₁.
pub fn l1_containment_check(class: &ElementClass, pred: &KulkarniPrediction, g: &HMat3, o: &ResolvedOptions) -> Result<Check> {
    let name = "l1_containment";
    if class.fine.coarse() == crate::classify::Coarse::Elliptic {
        return Ok(Check::skipped(name, "elliptic: L1 is empty or the whole space", o.seed));
    }
    let points = sample_points(o.seed, o.samples, |p| descriptor_dist(p, &pred.l0) > L0_EXCLUSION)?;
    let n = o.max_iter as i64;
    let tail = (o.max_iter as usize * 4) / 5;
    let dists = par_map_indexed(points.len() as u64, |i| -> Result<f64> {
        let p = &points[i as usize];
        let fwd = orbit(g, p, 0, n)?;
        let bwd = orbit(g, p, -n, 0)?;
        let tails = fwd.samples.iter().skip(tail).chain(bwd.samples.iter().take(bwd.samples.len() - tail));
        Ok(tails.map(|(_, q)| descriptor_dist(q, &pred.l1)).fold(0.0, f64::max))
    });
    let worst = dists.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let tol = if class.fine.polynomial_rate() { 1e-2 } else { o.tol.max(o.cluster_eps) };
    Ok(Check::measured(name, worst, tol, o.max_iter, o.seed))
}

/// Runs the full check suite for a spec.
pub fn run_verification(spec: &ElementSpec, opts: &VerifyOptions) -> Result<VerificationReport> {
    let (class, confidence) = classify_spec(spec)?;
    let o = opts.resolve(class.fine);
    if o.samples == 0 || o.max_iter == 0 {
        return Err(Error::Precondition("samples and max_iter must be positive".into()));
    }
    let g = canonical_form(&class)?;
    let pred = predictions(&class)?;
    let mut checks = Vec::new();
    let mut timing = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Result<Vec<Check>>| -> Result<()> {
        let t = Instant::now();
        let cs = f()?;
        timing.push(Timing { name: name.into(), seconds: t.elapsed().as_secs_f64() });
        for c in &cs {
            log::info!("{} {:?} measured {:e} threshold {:e}", c.name, c.status, c.measured, c.threshold);
        }
        checks.extend(cs);
        Ok(())
    };
    timed("orbit_convergence", &mut || Ok(vec![orbit_convergence_check(&class, &g, &o)?]))?;
    timed("power_limit_kernels", &mut || Ok(vec![power_limit_check(&class, &g, &o)?]))?;
    timed("l2_witnesses", &mut || Ok(vec![witness_check(&class, &g, &o, 50)?]))?;
    timed("recurrence", &mut || recurrence_checks(&class, &g, &o))?;
    timed("dual_convergence", &mut || Ok(vec![dual_convergence_check(&class, &g, &o, o.samples)?]))?;
    timed("lambda_invariance", &mut || Ok(vec![lambda_invariance_check(&pred.kulkarni, &g, &o)?]))?;
    timed("l1_containment", &mut || Ok(vec![l1_containment_check(&class, &pred.kulkarni, &g, &o)?]))?;
    let status = overall(&checks);
    Ok(VerificationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        body: ReportBody {
            spec: spec.clone(),
            classification: class,
            confidence,
            predictions: pred,
            options: o,
            matrix: g,
            checks,
            status,
        },
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::catalog;

    fn spec(name: &str) -> ElementSpec {
        ElementSpec::Structured(catalog().into_iter().find(|(n, _)| *n == name).unwrap().1)
    }

    fn fast() -> VerifyOptions {
        VerifyOptions { samples: 24, ..VerifyOptions::default() }
    }

    #[test]
    fn every_catalog_entry_verifies() {
        for (name, _) in catalog() {
            let r = run_verification(&spec(name), &fast()).unwrap();
            let failed: Vec<_> = r.body.checks.iter().filter(|c| c.status == Status::Fail).collect();
            assert!(failed.is_empty(), "{name}: {failed:?}");
        }
    }

    #[test]
    fn short_budget_fails_for_vertical_translation() {
        let opts = VerifyOptions { max_iter: Some(10), ..fast() };
        let r = run_verification(&spec("vertical_translation"), &opts).unwrap();
        let c = r.body.checks.iter().find(|c| c.name == "orbit_convergence").unwrap();
        assert_eq!(c.status, Status::Fail);
        assert_eq!(r.body.status, Status::Fail);
    }

    #[test]
    fn report_round_trip_and_version_gate() {
        let r = run_verification(&spec("screw"), &fast()).unwrap();
        let back = VerificationReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let bumped = r.to_json().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
        assert!(matches!(VerificationReport::from_json(&bumped), Err(Error::Schema { .. })));
    }

    #[test]
    fn bodies_are_deterministic() {
        let a = run_verification(&spec("regular_loxodromic"), &fast()).unwrap();
        let b = run_verification(&spec("regular_loxodromic"), &fast()).unwrap();
        assert_eq!(a.body_json(), b.body_json());
    }

    #[test]
    fn overall_ignores_skipped() {
        let c = |s| Check { name: "x".into(), status: s, measured: 0.0, threshold: 0.0, iterations: 0, seed: 0, note: None };
        assert_eq!(overall(&[c(Status::Pass), c(Status::Skipped)]), Status::Pass);
        assert_eq!(overall(&[c(Status::Pass), c(Status::Fail)]), Status::Fail);
        assert_eq!(overall(&[]), Status::Pass);
    }
}
