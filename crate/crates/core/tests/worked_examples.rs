//! The worked examples: certificates, derivative tables, the convexity
//! counterexample, the gH derivative regression and the negative control.

use approx::assert_abs_diff_eq;
use ivkkt::calculus::{self, Bound, ConvexityPlan, IntervalFn, CONVEXITY_TOL};
use ivkkt::interval::Interval;
use ivkkt::kkt::{
    search_multipliers, verify_certificate, Certificate, KktContext, ParetoClass, ProbeScope, SearchOutcome,
    Theorem, VerdictKind, VerifyOptions, DEFAULT_PROBES, DEFAULT_SEED,
};
use ivkkt::manifold::{ManifoldKind, Point, Tangent};
use ivkkt::oracle::{classify, scalarization_check, ClassVerdict, GridSpec};
use ivkkt::problem::{load, parse_problem, ProblemFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::E;

fn context(pf: &ProblemFile) -> KktContext<'_> {
    let pbar = pf.candidate.clone().unwrap();
    KktContext::sampled(&pf.spec, &pbar, DEFAULT_PROBES, DEFAULT_SEED, pf.spec.probe_scope).unwrap()
}

fn registry_certificate(pf: &ProblemFile, th: Theorem) -> Certificate {
    pf.certificate_for(th).cloned().unwrap()
}

fn pt(v: &[f64]) -> Point {
    Point::Vector(v.to_vec())
}

#[test]
fn mivop3_shape_and_active_set() {
    let pf = load("mivop3").unwrap();
    assert_eq!(pf.spec.l(), 2);
    assert_eq!(pf.spec.t(), 5);
    assert_eq!(pf.spec.manifold, ManifoldKind::LogOrthant(2));
    let ctx = context(&pf);
    assert_eq!(ctx.active, vec![0, 1, 2, 4]);
    assert_eq!(ctx.probes.len(), DEFAULT_PROBES);
}

#[test]
fn mivop3_weighted_certificate() {
    let pf = load("mivop3").unwrap();
    let ctx = context(&pf);
    let v = verify_certificate(&ctx, &registry_certificate(&pf, Theorem::T32a), &VerifyOptions::default()).unwrap();
    assert_eq!(v.kind, VerdictKind::Certified, "{v:?}");
    assert_eq!(v.claimed_class, ParetoClass::TypeI);
    // The weighted sum vanishes identically.
    assert!(v.min_residual.unwrap().abs() < 1e-7);
    assert!(v.hypotheses.iter().all(|h| h.report.holds()));
}

#[test]
fn mivop3_derivative_table() {
    let pf = load("mivop3").unwrap();
    let pbar = pt(&[1.0, 1.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let q: [f64; 2] = [rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)];
        let (a, b) = (q[0].ln(), q[1].ln());
        let expected_obj = [(a, a), (2.0 * a + 2.0 * b, 2.0 * a + 2.0 * b)];
        let expected_con = [a + 0.5 * b, -a, a + b, 2.0 * a + b, -b];
        let w = pf.spec.manifold.log_map(&pbar, &pt(&q)).unwrap();
        for (o, e) in pf.spec.objectives.iter().zip(expected_obj) {
            let (dl, du) = calculus::weak_dir_deriv(&o.f, &pbar, &w).unwrap();
            assert_abs_diff_eq!(dl, e.0, epsilon = 1e-5);
            assert_abs_diff_eq!(du, e.1, epsilon = 1e-5);
        }
        for (c, e) in pf.spec.constraints.iter().zip(expected_con) {
            assert_abs_diff_eq!(calculus::dir_deriv(&c.f, &pbar, &w).unwrap(), e, epsilon = 1e-5);
        }
    }
    // psi4 toward (e, 1).
    let d = calculus::dir_deriv_toward(&pf.spec.constraints[3].f, &pbar, &pt(&[E, 1.0])).unwrap();
    assert_abs_diff_eq!(d, 2.0, epsilon = 1e-7);
}

#[test]
fn mivop4_split_certificate() {
    let pf = load("mivop4").unwrap();
    let ctx = context(&pf);
    assert_eq!(ctx.active, vec![2, 3, 4]);
    let v = verify_certificate(&ctx, &registry_certificate(&pf, Theorem::T34a), &VerifyOptions::default()).unwrap();
    assert_eq!(v.kind, VerdictKind::Certified, "{v:?}");
}

#[test]
fn mivop4_convexity_counterexample() {
    let pf = load("mivop4").unwrap();
    let phi1 = &pf.spec.objectives[0].f;
    let plan = ConvexityPlan {
        anchors: pf.spec.anchors.clone(),
        pairs: vec![],
        alphas: vec![0.5],
    };
    let report = calculus::lu_convexity_probe(phi1, &plan, CONVEXITY_TOL);
    let w = report.witness.expect("phi1 is not LU-convex");
    assert_eq!(w.component, Some(Bound::Lower));
    assert_abs_diff_eq!(w.lhs, 2.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(w.rhs, 4.0 / 9.0, epsilon = 1e-12);
    // phi2 lower toward (1, e).
    let d = calculus::dir_deriv_toward(pf.spec.objectives[1].f.lower(), &pt(&[1.0, 1.0]), &pt(&[1.0, E])).unwrap();
    assert_abs_diff_eq!(d, 1.0, epsilon = 1e-7);
}

#[test]
fn mivop5_gh_certificate() {
    let pf = load("mivop5").unwrap();
    assert_eq!(pf.spec.manifold, ManifoldKind::SpdCone(2));
    let ctx = context(&pf);
    assert_eq!(ctx.active, vec![0, 2]);
    let v = verify_certificate(&ctx, &registry_certificate(&pf, Theorem::T41), &VerifyOptions::default()).unwrap();
    assert_eq!(v.kind, VerdictKind::Certified, "{v:?}");
    assert_eq!(v.forms_agree, Some(true));
    assert_eq!(v.gh_conditions.len(), DEFAULT_PROBES);
    for c in &v.gh_conditions {
        assert!(c.lo().abs() <= 1e-6 && c.hi().abs() <= 1e-6, "{c}");
    }
}

#[test]
fn mivop5_derivatives_factor_through_ldet() {
    let pf = load("mivop5").unwrap();
    let pbar = pf.candidate.clone().unwrap();
    let q: Point = "sym[1.2, 0.1, 0.9]".parse().unwrap();
    let u = (1.2f64 * 0.9 - 0.01).ln();
    let w = pf.spec.manifold.log_map(&pbar, &q).unwrap();
    let g1 = calculus::gh_dir_deriv(&pf.spec.objectives[0].f, &pbar, &w).unwrap();
    assert!(g1.hausdorff(&Interval::point(u)) < 1e-6);
    let g2 = calculus::gh_dir_deriv(&pf.spec.objectives[1].f, &pbar, &w).unwrap();
    assert!(g2.hausdorff(&Interval::ZERO) < 1e-6);
    let expected = [-2.0 * u, -u, 0.0];
    for (c, e) in pf.spec.constraints.iter().zip(expected) {
        assert_abs_diff_eq!(calculus::dir_deriv(&c.f, &pbar, &w).unwrap(), e, epsilon = 1e-6);
    }
}

#[test]
fn gh_derivative_regression() {
    let pf = load("hderiv_counterexample").unwrap();
    let f = &pf.spec.objectives[0].f;
    let p = pt(&[0.0]);
    assert_eq!(f.eval(&p).unwrap(), Interval::new(-1.0, 4.0).unwrap());
    let g = calculus::gh_dir_deriv(f, &p, &Tangent::Vector(vec![1.0])).unwrap();
    assert!(g.lo().abs() <= 1e-7 && g.hi().abs() <= 1e-7, "{g}");
}

#[test]
fn relaxed_mivop3_is_refuted_everywhere() {
    let pf = load("relaxed_mivop3").unwrap();
    let ctx = context(&pf);
    let opts = VerifyOptions::default();
    let v = verify_certificate(&ctx, &registry_certificate(&pf, Theorem::T32a), &opts).unwrap();
    assert_eq!(v.kind, VerdictKind::Violated);
    assert!(v.violation.as_ref().unwrap().residual < 0.0);
    let outcome = search_multipliers(&ctx, Theorem::T32a, &opts).unwrap();
    assert!(matches!(outcome, SearchOutcome::Infeasible(_)), "{outcome:?}");

    let pbar = pf.candidate.clone().unwrap();
    let grid = GridSpec::new(pf.spec.sample_box.clone(), 101).unwrap();
    let verdict = classify(&pf.spec, &pbar, &grid, &[ParetoClass::TypeI]).unwrap();
    let ClassVerdict::Refuted(w) = verdict.get(ParetoClass::TypeI).unwrap() else {
        panic!("type-I should be refuted");
    };
    for (a, b) in w.phi.items().iter().zip(verdict.candidate_phi.items()) {
        assert!(a.lt_lu(b), "{a} vs {b}");
    }
    let s = scalarization_check(&pf.spec, &pbar, &[1.0, 1.0], &[1.0, 1.0], &grid).unwrap();
    assert!(!s.is_minimizer());
}

#[test]
fn mivop3_scalarization_minimizer() {
    let pf = load("mivop3").unwrap();
    let grid = GridSpec::new(pf.spec.sample_box.clone(), 101).unwrap();
    let s = scalarization_check(&pf.spec, &pf.candidate.clone().unwrap(), &[1.0, 1.0], &[1.0, 1.0], &grid).unwrap();
    assert!(s.is_minimizer());
}

#[test]
fn search_recovers_certificates() {
    for (name, th) in [("mivop3", Theorem::T32a), ("mivop4", Theorem::T34a), ("mivop5", Theorem::T41)] {
        let pf = load(name).unwrap();
        let ctx = context(&pf);
        match search_multipliers(&ctx, th, &VerifyOptions::default()).unwrap() {
            SearchOutcome::Found { verdict, .. } => assert_ne!(verdict.kind, VerdictKind::Violated),
            other => panic!("{name}: {other:?}"),
        }
    }
}

const STRONG_FIXTURE: &str = "\
manifold euclidean 1
box -1:1
probes box
objective phi lower=p1 upper=2*p1 + 3
constraint psi -p1
candidate (0)
";

#[test]
fn single_bound_theorems() {
    let pf = parse_problem("strong", STRONG_FIXTURE).unwrap();
    let ctx = context(&pf);
    let opts = VerifyOptions::default();
    // dL = w and dpsi = -w: mu = 1 balances the lower bound exactly.
    let t37: Certificate = "theorem=T37a c=1 bound=L mu=1".parse().unwrap();
    let v = verify_certificate(&ctx, &t37, &opts).unwrap();
    assert_ne!(v.kind, VerdictKind::Violated, "{v:?}");
    // dL = w < dU = 2w fails for w < 0.
    let t38: Certificate = "theorem=T38a c=1 bound=L mu=1".parse().unwrap();
    let v = verify_certificate(&ctx, &t38, &opts).unwrap();
    assert_eq!(v.kind, VerdictKind::Violated);
    assert!(v.violation.unwrap().condition.contains("dL < dU"));
}

#[test]
fn probe_scope_changes_probe_sources() {
    let pf = load("mivop3").unwrap();
    let pbar = pf.candidate.clone().unwrap();
    let feasible = KktContext::sampled(&pf.spec, &pbar, 50, 1, ProbeScope::Feasible).unwrap();
    assert!(feasible.probes.is_empty());
    let v = verify_certificate(&feasible, &registry_certificate(&pf, Theorem::T32a), &VerifyOptions::default()).unwrap();
    assert!(v.warnings.iter().any(|w| w.contains("vacuous")));
}

#[test]
fn interval_function_parses_like_registry() {
    let m = ManifoldKind::LogOrthant(2);
    let f = IntervalFn::parse("ln(p1) + 3", "ln(p1) + 5", m).unwrap();
    assert_eq!(f.eval(&pt(&[1.0, 1.0])).unwrap(), Interval::new(3.0, 5.0).unwrap());
}
