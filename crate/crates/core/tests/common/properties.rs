//! Seeded property suites: interval algebra, order laws, manifold maps,
//! derivative equivalence and certificate round-trips.
//!
//! Shared by the `properties` test target and the acceptance run. Each suite
//! panics on the first failing case.

use std::sync::OnceLock;

use ivkkt::calculus::{self, IntervalFn};
use ivkkt::interval::Interval;
use ivkkt::kkt::{
    search_multipliers, verify_certificate, Certificate, KktContext, Multipliers, SearchOutcome, Theorem,
    VerdictKind, VerifyOptions,
};
use ivkkt::manifold::{ldet, ManifoldKind, Mat, Point};
use ivkkt::problem::{load, registry, ProblemFile};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub const CASES: u32 = 128;

fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]))
}

fn interval() -> impl Strategy<Value = Interval> {
    (-1e3f64..1e3, 0f64..1e3).prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
}

/// Intervals on a coarse lattice so that equal endpoints actually occur.
fn lattice_interval() -> impl Strategy<Value = Interval> {
    (-4i32..4, 0i32..4).prop_map(|(lo, w)| Interval::new(lo as f64 * 0.5, (lo + w) as f64 * 0.5).unwrap())
}

pub fn gh_identities_and_antisymmetry() {
    runner()
        .run(&(interval(), interval(), -1e3f64..1e3), |(a, b, c)| {
            prop_assert_eq!(a.gh_diff(&a), Interval::ZERO);
            prop_assert_eq!(a.gh_diff(&b), b.gh_diff(&a).scale(-1.0));
            // Subtracting a degenerate interval shifts both endpoints.
            let shifted = a.gh_diff(&Interval::point(c));
            prop_assert_eq!(shifted, Interval::new(a.lo() - c, a.hi() - c).unwrap());
            // gH difference of points is the ordinary difference.
            prop_assert_eq!(
                Interval::point(a.lo()).gh_diff(&Interval::point(b.hi())),
                Interval::point(a.lo() - b.hi())
            );
            Ok(())
        })
        .unwrap();
}

pub fn lu_and_cw_partial_order_laws() {
    runner()
        .run(&(lattice_interval(), lattice_interval(), lattice_interval()), |(a, b, c)| {
            for (leq, lt) in [
                (Interval::leq_lu as fn(&Interval, &Interval) -> bool, Interval::lt_lu as fn(&Interval, &Interval) -> bool),
                (Interval::leq_cw, Interval::lt_cw),
            ] {
                prop_assert!(leq(&a, &a));
                prop_assert!(!lt(&a, &a));
                if lt(&a, &b) {
                    prop_assert!(leq(&a, &b));
                }
                if leq(&a, &b) && leq(&b, &a) {
                    prop_assert_eq!(a, b);
                }
                if leq(&a, &b) && leq(&b, &c) {
                    prop_assert!(leq(&a, &c));
                }
            }
            // LU refines CW on the center: a <=_LU b implies center(a) <= center(b).
            if a.leq_lu(&b) {
                prop_assert!(a.center() <= b.center());
            }
            Ok(())
        })
        .unwrap();
}

pub fn cw_order_laws_on_real_intervals() {
    runner()
        .run(&(interval(), interval(), interval()), |(a, b, c)| {
            if a.leq_cw(&b) && b.leq_cw(&c) {
                prop_assert!(a.leq_cw(&c));
            }
            if a.leq_cw(&b) && b.leq_cw(&a) {
                prop_assert_eq!(a, b);
            }
            Ok(())
        })
        .unwrap();
}

fn spd(n: usize) -> impl Strategy<Value = Point> {
    proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |b| {
        // B Bᵀ + I/2 is well conditioned.
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                let mut s: f64 = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum();
                if i == j {
                    s += 0.5;
                }
                upper.push(s);
            }
        }
        Point::Matrix(Mat::from_upper(&upper).unwrap())
    })
}

fn vector(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Point> {
    proptest::collection::vec(lo..hi, n).prop_map(Point::Vector)
}

fn max_abs_diff(p: &Point, q: &Point) -> f64 {
    match (p, q) {
        (Point::Vector(a), Point::Vector(b)) => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        (Point::Matrix(a), Point::Matrix(b)) => a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    }
}

fn exp_log_roundtrip<S: Strategy<Value = Point>>(m: ManifoldKind, points: impl Fn() -> S) {
    runner()
        .run(&(points(), points()), |(p, q)| {
            let w = m.log_map(&p, &q).unwrap();
            let back = m.exp_map(&p, &w).unwrap();
            prop_assert!(max_abs_diff(&back, &q) <= 1e-9, "{m}: {p} -> {q} came back as {back}");
            // The geodesic endpoints are p and q.
            prop_assert!(max_abs_diff(&m.geodesic(&p, &q, 0.0).unwrap(), &p) <= 1e-9);
            prop_assert!(max_abs_diff(&m.geodesic(&p, &q, 1.0).unwrap(), &q) <= 1e-9);
            Ok(())
        })
        .unwrap();
}

pub fn exp_log_roundtrip_euclidean() {
    exp_log_roundtrip(ManifoldKind::Euclidean(3), || vector(3, -5.0, 5.0));
}

pub fn exp_log_roundtrip_log_orthant() {
    exp_log_roundtrip(ManifoldKind::LogOrthant(3), || vector(3, 0.05, 20.0));
}

pub fn exp_log_roundtrip_spd() {
    exp_log_roundtrip(ManifoldKind::SpdCone(2), || spd(2));
    exp_log_roundtrip(ManifoldKind::SpdCone(3), || spd(3));
}

pub fn spd_log_determinant_is_affine_along_geodesics() {
    for n in [2, 3] {
        let m = ManifoldKind::SpdCone(n);
        runner()
            .run(&(spd(n), spd(n), 0.0f64..=1.0), |(p, q, t)| {
                let (Point::Matrix(a), Point::Matrix(b)) = (&p, &q) else { unreachable!() };
                let Point::Matrix(g) = m.geodesic(&p, &q, t).unwrap() else { unreachable!() };
                let expected = (1.0 - t) * ldet(a).unwrap() + t * ldet(b).unwrap();
                prop_assert!((ldet(&g).unwrap() - expected).abs() <= 1e-9);
                Ok(())
            })
            .unwrap();
    }
}

fn registry_problems() -> &'static [ProblemFile] {
    static PROBLEMS: OnceLock<Vec<ProblemFile>> = OnceLock::new();
    PROBLEMS.get_or_init(|| registry::names().map(|n| load(n).unwrap()).collect())
}

fn unit_coords(pf: &ProblemFile, u: &[f64]) -> Option<Point> {
    let coords = pf.spec.sample_box.map_unit(u);
    pf.spec.manifold.point_from_coords(&coords).ok()
}

/// gH derivative against the min/max of the endpoint derivatives, and both
/// against a one-sided gH difference quotient.
pub fn gh_derivative_is_min_max_of_endpoint_derivatives() {
    for pf in registry_problems() {
        let m = pf.spec.manifold;
        let dim = m.coord_dim();
        let unit = proptest::collection::vec(0.05f64..0.95, dim);
        runner()
            .run(&(unit.clone(), unit), |(u, v)| {
                let (Some(p), Some(q)) = (unit_coords(pf, &u), unit_coords(pf, &v)) else {
                    return Ok(());
                };
                let w = m.log_map(&p, &q).unwrap();
                for o in &pf.spec.objectives {
                    let f: &IntervalFn = &o.f;
                    let (dl, du) = calculus::weak_dir_deriv(f, &p, &w).unwrap();
                    let gh = calculus::gh_dir_deriv(f, &p, &w).unwrap();
                    prop_assert!(gh.hausdorff(&Interval::new(dl.min(du), dl.max(du)).unwrap()) <= 1e-6);
                    let t = 1e-6;
                    let step = m.exp_map(&p, &w.scaled(t)).unwrap();
                    let quotient = f.eval(&step).unwrap().gh_diff(&f.eval(&p).unwrap()).scale(1.0 / t);
                    prop_assert!(
                        gh.hausdorff(&quotient) <= 1e-4 * (1.0 + gh.hi().abs().max(gh.lo().abs())),
                        "{}: {gh} vs quotient {quotient}",
                        o.name
                    );
                }
                Ok(())
            })
            .unwrap();
    }
}

fn context(pf: &ProblemFile, probes: usize, seed: u64) -> KktContext<'_> {
    let pbar = pf.candidate.clone().unwrap();
    KktContext::sampled(&pf.spec, &pbar, probes, seed, pf.spec.probe_scope).unwrap()
}

const QUICK: VerifyOptions = VerifyOptions {
    tol: ivkkt::kkt::INEQ_TOL,
    check_hypotheses: false,
    alphas: 3,
};

pub fn searched_certificates_verify_after_text_round_trip() {
    let cases = [("mivop3", Theorem::T32a), ("mivop4", Theorem::T34a), ("mivop5", Theorem::T41)];
    runner()
        .run(&(0usize..3, 0u64..1_000_000, 20usize..80), |(which, seed, probes)| {
            let (name, th) = cases[which];
            let pf = load(name).unwrap();
            let ctx = context(&pf, probes, seed);
            let SearchOutcome::Found { certificate, verdict } = search_multipliers(&ctx, th, &QUICK).unwrap() else {
                return Err(TestCaseError::fail(format!("{name} {th}: no multipliers at seed {seed}")));
            };
            prop_assert_ne!(verdict.kind, VerdictKind::Violated);
            let text = certificate.to_string();
            let parsed: Certificate = text.parse().unwrap();
            prop_assert_eq!(&parsed, &certificate);
            let again = verify_certificate(&ctx, &parsed, &QUICK).unwrap();
            prop_assert_eq!(again, verdict);
            Ok(())
        })
        .unwrap();
}

pub fn gh_and_endpoint_forms_agree() {
    let pf = load("mivop5").unwrap();
    let ctx = context(&pf, 60, 3);
    let cert_strategy = (
        proptest::collection::vec(0.01f64..4.0, 2),
        proptest::collection::vec(0.0f64..4.0, 3),
        proptest::bool::ANY,
    );
    runner()
        .run(&cert_strategy, |(lam, mut mu, drop_inactive)| {
            if drop_inactive {
                mu[1] = 0.0;
            }
            let cert = Certificate {
                theorem: Theorem::T41,
                multipliers: Multipliers {
                    lam: Some(lam),
                    mu: Some(mu),
                    ..Multipliers::default()
                },
            };
            let v = verify_certificate(&ctx, &cert, &QUICK).unwrap();
            prop_assert_eq!(v.forms_agree, Some(true));
            prop_assert_eq!(v.gh_conditions.len(), ctx.probes.len());
            Ok(())
        })
        .unwrap();
}

pub fn split_weight_certificates_transform_to_center_width() {
    let pf = load("mivop3").unwrap();
    let ctx = context(&pf, 60, 5);
    let strategy = (proptest::collection::vec(0.01f64..0.99, 2), 0.1f64..10.0);
    let accepted = std::cell::Cell::new(0usize);
    runner()
        .run(&strategy, |(lam_l, k)| {
            // Each objective keeps total weight 2, as in the worked certificate.
            let lam_u: Vec<f64> = lam_l.iter().map(|x| 2.0 - x).collect();
            let c = Certificate {
                theorem: Theorem::T32c,
                multipliers: Multipliers {
                    lam_l: Some(lam_l.clone()),
                    lam_u: Some(lam_u.clone()),
                    mu: Some(vec![1.0, 7.0, 0.0, 0.0, 4.5]),
                    ..Multipliers::default()
                }
                .scaled(k),
            };
            let vc = verify_certificate(&ctx, &c, &QUICK).unwrap();
            prop_assert_ne!(vc.kind, VerdictKind::Violated, "{:?}", vc.violation);
            let m = &c.multipliers;
            let (ll, lu) = (m.lam_l.as_ref().unwrap(), m.lam_u.as_ref().unwrap());
            let b = Certificate {
                theorem: Theorem::T32b,
                multipliers: Multipliers {
                    lam_c: Some(ll.iter().zip(lu).map(|(l, u)| l + u).collect()),
                    lam_w: Some(ll.iter().zip(lu).map(|(l, u)| u - l).collect()),
                    mu: m.mu.clone(),
                    ..Multipliers::default()
                },
            };
            let vb = verify_certificate(&ctx, &b, &QUICK).unwrap();
            prop_assert_ne!(vb.kind, VerdictKind::Violated, "{:?}", vb.violation);
            accepted.set(accepted.get() + 1);
            Ok(())
        })
        .unwrap();
    assert!(accepted.get() >= CASES as usize);
}

/// Every suite with its name.
#[allow(dead_code)]
pub const SUITES: &[(&str, fn())] = &[
    ("gh_identities_and_antisymmetry", gh_identities_and_antisymmetry),
    ("lu_and_cw_partial_order_laws", lu_and_cw_partial_order_laws),
    ("cw_order_laws_on_real_intervals", cw_order_laws_on_real_intervals),
    ("exp_log_roundtrip_euclidean", exp_log_roundtrip_euclidean),
    ("exp_log_roundtrip_log_orthant", exp_log_roundtrip_log_orthant),
    ("exp_log_roundtrip_spd", exp_log_roundtrip_spd),
    ("spd_log_determinant_is_affine_along_geodesics", spd_log_determinant_is_affine_along_geodesics),
    ("gh_derivative_is_min_max_of_endpoint_derivatives", gh_derivative_is_min_max_of_endpoint_derivatives),
    ("searched_certificates_verify_after_text_round_trip", searched_certificates_verify_after_text_round_trip),
    ("gh_and_endpoint_forms_agree", gh_and_endpoint_forms_agree),
    ("split_weight_certificates_transform_to_center_width", split_weight_certificates_transform_to_center_width),
];
