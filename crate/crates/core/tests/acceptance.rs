//! Acceptance suite: one PASS/FAIL line per criterion. Parts listed in
//! `KNOWN_UNATTAINABLE` are reported but do not fail the test target.

use std::time::Instant;

use qkleinian::classify::{
    canonical_form, catalog, catalog_classes, classify_fine, classify_fine_numeric, projective_order, Coarse,
    Confidence, ElementClass, ProjectiveOrder, GOLDEN,
};
use qkleinian::dynamics::{
    aligned_exponent, density_check_s1, density_check_t2, l2_witness, limit_of_powers, orbit, par_map_indexed,
    point_rng, random_point, random_quaternion, recurrence_check, sample_points, Direction, Subspace,
    DEFAULT_POWER_HORIZON,
};
use qkleinian::limitsets::{descriptor_invariance_check, predict_kulkarni, sample_atom, Atom};
use qkleinian::projective::{basis_line, chordal_dist, dual_apply_point, point_line_dist, ProjPoint};
use qkleinian::spectra::{phi_eigenvalues, RANK_TOL};
use qkleinian::{Error, HMat3, HVec3, Quaternion};

const KNOWN_UNATTAINABLE: &[&str] = &["9:t2_golden_golden_squared_terminates"];

struct Part {
    id: String,
    ok: bool,
    detail: String,
}

fn part(criterion: u32, name: &str, ok: bool, detail: impl Into<String>) -> Part {
    Part { id: format!("{criterion}:{name}"), ok, detail: detail.into() }
}

fn class(name: &str) -> ElementClass {
    catalog_classes().into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn pt(i: usize) -> ProjPoint {
    ProjPoint::basis(i)
}

fn criterion_1() -> Vec<Part> {
    let t = Instant::now();
    let mut out = Vec::new();
    for (name, spec) in catalog() {
        let want = name;
        let structured = classify_fine(&spec).map(|c| c.fine.label());
        out.push(part(1, &format!("structured_{name}"), structured.as_deref() == Ok(want), format!("{structured:?}")));
        let g = canonical_form(&classify_fine(&spec).unwrap()).unwrap();
        let numeric = classify_fine_numeric(&g, 1e-9, 100);
        let ok = matches!(&numeric, Ok((c, Confidence::Heuristic)) if c.fine.label() == want);
        out.push(part(1, &format!("matrix_{name}"), ok, format!("{:?}", numeric.map(|(c, k)| (c.fine.label(), k)))));
    }
    assert_eq!(out.len(), 30);
    let secs = t.elapsed().as_secs_f64();
    out.push(part(1, "runtime", secs < 1.0, format!("{secs:.3}s")));
    out
}

fn criterion_2() -> Vec<Part> {
    let t = Instant::now();
    let g = HMat3::diag_real(0.5, 1.0, 2.0);
    let lines = [basis_line(0, 1), basis_line(1, 2), basis_line(0, 2)];
    let points = sample_points(0, 200, |p| lines.iter().all(|l| point_line_dist(p, l) > 0.1)).unwrap();
    let mut worst = 0.0f64;
    for p in &points {
        let tr = orbit(&g, p, -60, 60).unwrap();
        worst = worst.max(chordal_dist(tr.point_at(60).unwrap(), &pt(2)));
        worst = worst.max(chordal_dist(tr.point_at(-60).unwrap(), &pt(0)));
    }
    let secs = t.elapsed().as_secs_f64();
    vec![
        part(2, "converge_e3_forward_e1_backward", worst < 1e-6, format!("max dist {worst:.2e} over {}", points.len())),
        part(2, "runtime", secs < 1.0, format!("{secs:.3}s")),
    ]
}

/// Kernels of the forward and backward limit maps, keyed by subclass name.
fn expected_kernels(name: &str) -> Option<(Subspace, Subspace)> {
    let p = |i| Subspace::point(pt(i));
    let l = |i, j| Subspace::line(basis_line(i, j));
    Some(match name {
        "regular_loxodromic" => (l(0, 1), l(1, 2)),
        "screw" | "homothety_real" | "homothety_complex" => (p(2), l(0, 1)),
        "loxo_parabolic" => (l(0, 2), l(0, 1)),
        "vertical_translation" | "rational_ellipto_parabolic" | "irrational_ellipto_parabolic" => (l(0, 2), l(0, 2)),
        "non_vertical_translation" | "ellipto_translation" => (l(0, 1), l(0, 1)),
        _ => return None,
    })
}

fn criterion_3() -> Vec<Part> {
    let mut out = Vec::new();
    for (name, c) in catalog_classes() {
        let Some((fwd, bwd)) = expected_kernels(name) else {
            assert_eq!(c.coarse, Coarse::Elliptic);
            continue;
        };
        let g = canonical_form(&c).unwrap();
        for (dir, want) in [(Direction::Forward, fwd), (Direction::Backward, bwd)] {
            let maps = limit_of_powers(&g, dir, DEFAULT_POWER_HORIZON, RANK_TOL);
            let ok = matches!(&maps, Ok(ms) if !ms.is_empty() && ms.iter().all(|m| m.kernel.same_as(&want, 1e-9)));
            out.push(part(3, &format!("{name}_{dir:?}"), ok, format!("{:?}", maps.map(|m| m[0].kernel))));
        }
    }
    out
}

fn criterion_4() -> Vec<Part> {
    let cases: [(&str, Vec<(usize, usize)>); 4] = [
        ("regular_loxodromic", vec![(0, 1), (1, 2)]),
        ("non_vertical_translation", vec![(0, 1)]),
        ("ellipto_translation", vec![(0, 1)]),
        ("loxo_parabolic", vec![(0, 1), (0, 2)]),
    ];
    let mut out = Vec::new();
    for (name, lines) in cases {
        let c = class(name);
        let g = canonical_form(&c).unwrap();
        let polynomial = c.fine.polynomial_rate();
        let (n, tol) = if polynomial { (aligned_exponent(&c, 10_000), 1e-3) } else { (80, 1e-5) };
        for (i, j) in lines {
            let mut rng = point_rng(4, (10 * i + j) as u64);
            let targets = sample_atom(&Atom::Line(basis_line(i, j)), 50, &mut rng);
            let dists = par_map_indexed(50, |k| {
                let t = &targets[k as usize];
                l2_witness(&c, t, n).and_then(|w| w.image(&g)).map(|q| chordal_dist(&q, t))
            });
            let worst = dists.into_iter().map(|d| d.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
            out.push(part(
                4,
                &format!("{name}_L{}{}", i + 1, j + 1),
                targets.len() == 50 && worst < tol,
                format!("n = {n}, max dist {worst:.2e}"),
            ));
        }
    }
    out
}

fn criterion_5() -> Vec<Part> {
    let c = class("simple_irrational_elliptic");
    let g = canonical_form(&c).unwrap();
    let points = sample_points(5, 100, |_| true).unwrap();
    let found = par_map_indexed(100, |i| recurrence_check(&g, &points[i as usize], 1e-2, 100_000));
    let misses = found.iter().filter(|r| r.is_err()).count();
    let longest = found.iter().filter_map(|r| r.as_ref().ok()).max().copied().unwrap_or(0);

    let r = class("rational_elliptic");
    let gr = canonical_form(&r).unwrap();
    let ProjectiveOrder::Finite(n0) = projective_order(&r) else { panic!("rational class has finite order") };
    let mut worst = 0.0f64;
    for p in sample_points(6, 100, |_| true).unwrap() {
        let tr = orbit(&gr, &p, 0, n0 as i64).unwrap();
        worst = worst.max(chordal_dist(tr.last().unwrap(), &p));
    }
    vec![
        part(5, "golden_recurrence", misses == 0, format!("{misses} misses, longest return {longest}")),
        part(5, "rational_periodicity", worst < 1e-10, format!("order {n0}, max dist {worst:.2e}")),
    ]
}

/// (direction, chart index, target) per subclass.
fn expected_dual(name: &str) -> Vec<(Direction, usize, ProjPoint)> {
    use Direction::{Backward as B, Forward as F};
    match name {
        "regular_loxodromic" => vec![(F, 0, pt(0)), (B, 2, pt(2))],
        "screw" | "homothety_real" | "homothety_complex" => vec![(F, 2, pt(2))],
        "loxo_parabolic" => vec![(F, 2, pt(2)), (B, 0, pt(1))],
        "vertical_translation" | "rational_ellipto_parabolic" | "irrational_ellipto_parabolic" => vec![(F, 0, pt(1))],
        "non_vertical_translation" | "ellipto_translation" => vec![(F, 0, pt(2))],
        _ => vec![],
    }
}

fn chart_point(seed: u64, i: u64, chart: usize) -> ProjPoint {
    let mut rng = point_rng(seed, i);
    let mut v = HVec3::default();
    for j in 0..3 {
        v.0[j] = if j == chart { Quaternion::ONE } else { random_quaternion(&mut rng) };
    }
    ProjPoint::new(v).unwrap()
}

fn criterion_6() -> Vec<Part> {
    let mut out = Vec::new();
    for (name, c) in catalog_classes() {
        let expected = expected_dual(name);
        if expected.is_empty() {
            continue;
        }
        let g = canonical_form(&c).unwrap();
        let polynomial = c.fine.polynomial_rate();
        let (budget, tol) = if polynomial { (100_000u64, 1e-3) } else { (500, 1e-5) };
        for (k, (dir, chart, target)) in expected.into_iter().enumerate() {
            let step = dir.generator(&g).unwrap().inverse().unwrap().transpose();
            let dists = par_map_indexed(100, |i| {
                let mut q = chart_point(60 + k as u64, i, chart);
                for _ in 0..budget {
                    q = dual_apply_point(&step, &q).unwrap();
                }
                chordal_dist(&q, &target)
            });
            let worst = dists.into_iter().fold(0.0, f64::max);
            out.push(part(6, &format!("{name}_{dir:?}_U{}", chart + 1), worst < tol, format!("max dist {worst:.2e} after {budget}")));
        }
    }
    out
}

fn gaussian_matrix(seed: u64, i: u64) -> HMat3 {
    let mut rng = point_rng(seed, i);
    let mut m = HMat3::zero();
    for r in 0..3 {
        for c in 0..3 {
            m.0[r][c] = random_quaternion(&mut rng);
        }
    }
    m
}

fn criterion_7() -> Vec<Part> {
    let mut det_err = 0.0f64;
    let mut phi_err = 0.0f64;
    let mut pair_err = 0.0f64;
    for i in 0..1000 {
        let a = gaussian_matrix(7, 2 * i);
        let b = gaussian_matrix(7, 2 * i + 1);
        let ab = a.mat_mul(&b);
        let (da, db, dab) = (a.det_h().unwrap(), b.det_h().unwrap(), ab.det_h().unwrap());
        det_err = det_err.max((dab - da * db).abs() / (da * db).abs());
        phi_err = phi_err.max((ab.phi() - a.phi() * b.phi()).iter().map(|z| z.norm()).fold(0.0, f64::max));
        let ev = phi_eigenvalues(&a).unwrap();
        let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for z in ev {
            let d = ev.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            pair_err = pair_err.max(d / scale);
        }
    }

    let mut rng = point_rng(7, 99_999);
    let mut axioms = true;
    for _ in 0..1000 {
        let (p, q, r) = (random_point(&mut rng), random_point(&mut rng), random_point(&mut rng));
        let s = random_quaternion(&mut rng);
        let p_scaled = ProjPoint::new(p.rep().scale_right(s)).unwrap();
        axioms &= chordal_dist(&p, &p) <= 1e-15
            && chordal_dist(&p, &p_scaled) <= 1e-12
            && chordal_dist(&p, &q) == chordal_dist(&q, &p)
            && (0.0..=1.0).contains(&chordal_dist(&p, &q))
            && chordal_dist(&p, &r) <= chordal_dist(&p, &q) + chordal_dist(&q, &r) + 1e-12;
    }

    let mut lift_err = 0.0f64;
    for i in 0..50 {
        let g = gaussian_matrix(8, i);
        let r = 0.1 + 5.0 * (i as f64 / 50.0);
        let p = random_point(&mut rng);
        let a = orbit(&g, &p, 0, 30).unwrap();
        let b = orbit(&g.scale_real(r), &p, 0, 30).unwrap();
        for ((_, x), (_, y)) in a.samples.iter().zip(&b.samples) {
            lift_err = lift_err.max(chordal_dist(x, y));
        }
    }

    vec![
        part(7, "det_multiplicative", det_err <= 1e-9, format!("max rel err {det_err:.2e}")),
        part(7, "phi_homomorphism", phi_err <= 1e-10, format!("max err {phi_err:.2e}")),
        part(7, "phi_conjugate_pairing", pair_err <= 1e-9, format!("max err {pair_err:.2e}")),
        part(7, "chordal_axioms", axioms, "1000 random triples"),
        part(7, "orbit_lift_invariance", lift_err <= 1e-10, format!("max dist {lift_err:.2e}")),
    ]
}

fn criterion_8() -> Vec<Part> {
    let mut out = Vec::new();
    for (name, c) in catalog_classes() {
        let lambda = predict_kulkarni(&c).unwrap().lambda;
        if lambda.is_trivial() {
            continue;
        }
        let g = canonical_form(&c).unwrap();
        let r = descriptor_invariance_check(&g, &lambda, 100, 1e-8, 8);
        out.push(part(8, name, r.is_ok(), format!("{r:?}")));
    }
    out
}

fn brute_s1(alpha: f64, eps: f64) -> u64 {
    // sort all angles and rescan every N
    let limit = 2.0 * (eps / 2.0).asin() / std::f64::consts::TAU;
    let mut n = 1u64;
    loop {
        let mut xs: Vec<f64> = (0..=n).map(|k| (k as f64 * alpha).rem_euclid(1.0)).collect();
        xs.sort_by(f64::total_cmp);
        let wrap = 1.0 - xs[xs.len() - 1] + xs[0];
        let gap = xs.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
        if gap <= limit {
            return n;
        }
        n += 1;
    }
}

fn criterion_9() -> Vec<Part> {
    let s1 = density_check_s1(GOLDEN, 0.01);
    let oracle = brute_s1(GOLDEN, 0.01);
    let t2 = density_check_t2(GOLDEN, GOLDEN * GOLDEN, 0.2);
    let s1_rat = density_check_s1(1.0 / 3.0, 0.1);
    let t2_rat = density_check_t2(0.5, 0.25, 0.2);
    vec![
        part(9, "s1_golden_matches_oracle", s1 == Ok(oracle), format!("{s1:?} vs oracle {oracle}")),
        part(9, "t2_golden_golden_squared_terminates", t2.is_ok(), format!("{t2:?}")),
        part(9, "s1_rational_caps", matches!(s1_rat, Err(Error::CapReached { .. })), format!("{s1_rat:?}")),
        part(9, "t2_rational_caps", matches!(t2_rat, Err(Error::CapReached { .. })), format!("{t2_rat:?}")),
    ]
}

#[test]
fn acceptance() {
    let criteria: [(u32, &str, fn() -> Vec<Part>); 9] = [
        (1, "taxonomy round trip", criterion_1),
        (2, "regular attractors", criterion_2),
        (3, "power-limit kernels", criterion_3),
        (4, "L2 witnesses", criterion_4),
        (5, "elliptic recurrence", criterion_5),
        (6, "dual convergence", criterion_6),
        (7, "algebraic properties", criterion_7),
        (8, "Lambda invariance", criterion_8),
        (9, "density checks", criterion_9),
    ];
    let mut unexpected = Vec::new();
    for (k, title, run) in criteria {
        let t = Instant::now();
        let parts = run();
        let ok = !parts.is_empty() && parts.iter().all(|p| p.ok);
        println!("{} criterion {k} ({title}) [{} parts, {:.2}s]", if ok { "PASS" } else { "FAIL" }, parts.len(), t.elapsed().as_secs_f64());
        for p in parts.iter().filter(|p| !p.ok) {
            let known = KNOWN_UNATTAINABLE.contains(&p.id.as_str());
            println!("    {} {}: {}", if known { "known-unattainable" } else { "failed" }, p.id, p.detail);
            if !known {
                unexpected.push(p.id.clone());
            }
        }
    }
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}
