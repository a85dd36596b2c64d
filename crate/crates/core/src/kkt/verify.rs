//! Certificate verification on a probe set.

use std::fmt;

use crate::calculus::{
    self, Bound, ConvexityPlan, ProbeReport, ProbeVerdict, Witness, CONVEXITY_TOL,
};
use crate::interval::Interval;
use crate::manifold::Point;

use super::certificate::{Certificate, Family, ParetoClass, Theorem};
use super::conditions::{conditions, sign_requirements, CondKind, SignReq};
use super::{KktContext, KktError, ProbeScope, FEAS_TOL, INEQ_TOL, STRICT_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub tol: f64,
    pub check_hypotheses: bool,
    /// α values per pair in convexity hypothesis probes.
    pub alphas: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tol: INEQ_TOL,
            check_hypotheses: true,
            alphas: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Certified,
    HypothesesUnverified,
    Violated,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::Certified => "certified",
            VerdictKind::HypothesesUnverified => "certified-hypotheses-unverified",
            VerdictKind::Violated => "violated",
        })
    }
}

/// The first failed requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: String,
    /// One-based probe number, absent for probe-independent requirements.
    pub probe: Option<usize>,
    pub source: Option<Point>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub description: String,
    pub report: ProbeReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub theorem: Theorem,
    pub claimed_class: ParetoClass,
    pub kind: VerdictKind,
    pub probes: usize,
    pub seed: u64,
    pub scope: ProbeScope,
    pub tol: f64,
    /// Smallest value of the weak inequalities over all probes.
    pub min_residual: Option<f64>,
    /// Smallest value of the strict inequalities (must exceed the margin).
    pub min_strict: Option<f64>,
    pub violation: Option<Violation>,
    /// `max |μ_u ψ_u(p̄)|` over the supplied vectors, per constraint.
    pub slackness: Vec<f64>,
    pub active: Vec<usize>,
    pub hypotheses: Vec<HypothesisCheck>,
    pub warnings: Vec<String>,
    /// gH-form condition interval per probe (generalized Hukuhara theorem only).
    pub gh_conditions: Vec<Interval>,
    /// Whether the gH form and the endpoint form agreed on every probe.
    pub forms_agree: Option<bool>,
}

impl Verdict {
    pub fn is_certified(&self) -> bool {
        self.kind != VerdictKind::Violated
    }
}

fn first_violation(slot: &mut Option<Violation>, v: Violation) {
    if slot.is_none() {
        *slot = Some(v);
    }
}

/// Verifies any certificate; dispatches on the theorem family.
pub fn verify_certificate(ctx: &KktContext<'_>, cert: &Certificate, opts: &VerifyOptions) -> Result<Verdict, KktError> {
    let prob = ctx.prob;
    let (l, t) = (prob.l(), prob.t());
    cert.check_shape(l, t)?;
    let th = cert.theorem;
    let m = &cert.multipliers;
    let tol = opts.tol;
    let mut violation = None;
    let mut warnings = Vec::new();

    for req in sign_requirements(th, l, t) {
        let (ok, residual) = match req {
            SignReq::Positive(s) => (s.value(m) > 0.0, s.value(m)),
            SignReq::NonNegative(s) => (s.value(m) >= 0.0, s.value(m)),
            SignReq::Less(a, b) => (a.value(m) < b.value(m), b.value(m) - a.value(m)),
        };
        if !ok {
            first_violation(
                &mut violation,
                Violation {
                    condition: req.to_string(),
                    probe: None,
                    source: None,
                    residual,
                },
            );
        }
    }

    let mut slackness = vec![0.0f64; t];
    for (key, mu) in m.mu_vectors() {
        for (u, (mv, pv)) in mu.iter().zip(&ctx.psi_bar).enumerate() {
            let r = (mv * pv).abs();
            slackness[u] = slackness[u].max(r);
            if r > tol {
                first_violation(
                    &mut violation,
                    Violation {
                        condition: format!("{key}[{}]*psi[{}](pbar) = 0", u + 1, u + 1),
                        probe: None,
                        source: None,
                        residual: r,
                    },
                );
            }
        }
    }

    let probes = &ctx.probes;
    let table = &ctx.table;
    let mut min_residual: Option<f64> = None;
    let mut min_strict: Option<f64> = None;
    let mut gh_conditions = Vec::new();
    let mut forms_agree = None;

    let record = |min: &mut Option<f64>, v: f64| *min = Some(min.map_or(v, |x: f64| x.min(v)));

    if th == Theorem::T41 {
        let lam = m.lam.as_deref().unwrap_or(&[]);
        let mu = m.mu.as_deref().unwrap_or(&[]);
        let mut agree = true;
        for k in 0..probes.len() {
            let a: Interval = (0..l)
                .map(|s| {
                    let (dl, du) = table.objectives[k][s];
                    Interval::new(dl.min(du), dl.max(du)).expect("finite derivatives").scale(lam[s])
                })
                .sum();
            let c: f64 = mu.iter().zip(&table.constraints[k]).map(|(x, d)| x * d).sum();
            let cond = a.scale(-1.0).gh_diff(&Interval::point(c));
            gh_conditions.push(cond);
            let gh_ok = cond.leq_lu(&Interval::point(tol));
            let (e_lo, e_hi) = (a.lo() + c, a.hi() + c);
            let endpoint_ok = e_lo >= -tol && e_hi >= -tol;
            agree &= gh_ok == endpoint_ok;
            let residual = e_lo.min(e_hi);
            record(&mut min_residual, residual);
            if !gh_ok {
                first_violation(
                    &mut violation,
                    Violation {
                        condition: "-(sum lam*dphi) gH-minus sum mu*dpsi <=LU [0,0]".into(),
                        probe: Some(k + 1),
                        source: Some(probes.sources[k].clone()),
                        residual,
                    },
                );
            }
        }
        debug_assert!(agree, "gH and endpoint forms disagree");
        forms_agree = Some(agree);
    } else {
        let conds = conditions(th, l, t, m.index, m.bound, m.blocks.as_deref());
        for k in 0..probes.len() {
            for cond in &conds {
                let v = cond.value(table, k, m);
                let failed = match cond.kind {
                    CondKind::Weak => {
                        record(&mut min_residual, v);
                        v < -tol
                    }
                    CondKind::Strict => {
                        record(&mut min_strict, v);
                        v <= STRICT_MARGIN
                    }
                };
                if failed {
                    first_violation(
                        &mut violation,
                        Violation {
                            condition: cond.label.clone(),
                            probe: Some(k + 1),
                            source: Some(probes.sources[k].clone()),
                            residual: v,
                        },
                    );
                }
            }
        }
    }

    if probes.is_empty() {
        warnings.push("probe set is empty: the inequalities hold vacuously".to_string());
    }
    if matches!(th, Theorem::T34a | Theorem::T34b) && !ctx.active.is_empty() {
        for (key, mu) in m.mu_vectors() {
            if ctx.active.iter().all(|&u| mu[u] == 0.0) {
                warnings.push(format!("all {key} vanish on the active set"));
            }
        }
    }

    let hypotheses = if opts.check_hypotheses && !probes.is_empty() {
        hypothesis_checks(ctx, cert, opts.alphas)
    } else {
        Vec::new()
    };
    let kind = if violation.is_some() {
        VerdictKind::Violated
    } else if hypotheses.iter().any(|h| h.report.verdict == ProbeVerdict::Violated) {
        VerdictKind::HypothesesUnverified
    } else {
        VerdictKind::Certified
    };

    Ok(Verdict {
        theorem: th,
        claimed_class: th.claimed_class(),
        kind,
        probes: probes.len(),
        seed: probes.seed,
        scope: probes.scope,
        tol,
        min_residual,
        min_strict,
        violation,
        slackness,
        active: ctx.active.clone(),
        hypotheses,
        warnings,
        gh_conditions,
        forms_agree,
    })
}

/// Probes the convexity and pseudo-convexity assumptions of the theorem at `p̄`.
fn hypothesis_checks(ctx: &KktContext<'_>, cert: &Certificate, alphas: usize) -> Vec<HypothesisCheck> {
    use Theorem::*;
    let prob = ctx.prob;
    let th = cert.theorem;
    let pbar = &ctx.pbar;
    let sources = &ctx.probes.sources;
    let plan = ConvexityPlan::anchored_at(pbar, sources, alphas, prob.anchors.clone());
    let c = cert.multipliers.index.unwrap_or(0);
    let mut out = Vec::new();
    let mut push = |description: String, report: ProbeReport| out.push(HypothesisCheck { description, report });

    let convex_constraints = matches!(th, T32a | T32b | T32c | T33 | T35a | T35b | T35c | T41);
    if convex_constraints {
        for con in &prob.constraints {
            push(
                format!("{} convex at pbar", con.name),
                calculus::convexity_probe(&con.f, &plan, CONVEXITY_TOL),
            );
        }
    } else {
        for &u in &ctx.active {
            let con = &prob.constraints[u];
            push(
                format!("{} strictly pseudo-convex at pbar", con.name),
                calculus::pseudoconvexity_probe(&con.f, pbar, sources, true),
            );
        }
    }

    let all: Vec<usize> = (0..prob.l()).collect();
    let single = vec![c];
    let (targets, kind): (&[usize], &str) = match th {
        T32a | T33 | T41 => (&all, "LU-convex"),
        T32b | T32c => (&all, "CW-convex"),
        T35a => (&single, "LU-convex"),
        T35b | T35c => (&single, "CW-convex"),
        T34a => (&all, "strictly LU-pseudo-convex"),
        T34b => (&all, "strictly CW-pseudo-convex"),
        T36a => (&single, "LU-pseudo-convex"),
        T36b => (&single, "CW-pseudo-convex"),
        T37a | T37b => (&single, "strictly pseudo-convex bound"),
        T38a | T38b => (&single, "convex bound"),
    };
    for &s in targets {
        let obj = &prob.objectives[s];
        let report = match kind {
            "LU-convex" => calculus::lu_convexity_probe(&obj.f, &plan, CONVEXITY_TOL),
            "CW-convex" => calculus::cw_convexity_probe(&obj.f, &plan, CONVEXITY_TOL),
            "strictly LU-pseudo-convex" | "LU-pseudo-convex" => {
                let strict = kind.starts_with("strictly");
                calculus::bound_pseudoconvexity_probe(&obj.f, Bound::Lower, pbar, sources, strict).and(
                    calculus::bound_pseudoconvexity_probe(&obj.f, Bound::Upper, pbar, sources, strict),
                )
            }
            "strictly CW-pseudo-convex" | "CW-pseudo-convex" => {
                let strict = kind.starts_with("strictly");
                calculus::bound_pseudoconvexity_probe(&obj.f, Bound::Center, pbar, sources, strict).and(
                    calculus::bound_pseudoconvexity_probe(&obj.f, Bound::HalfWidth, pbar, sources, strict),
                )
            }
            "strictly pseudo-convex bound" => {
                let b = cert.multipliers.bound.unwrap_or(Bound::Lower);
                calculus::bound_pseudoconvexity_probe(&obj.f, b, pbar, sources, true)
            }
            _ => {
                // The convexity hypothesis pairs with the other bound.
                let b = match cert.multipliers.bound.unwrap_or(Bound::Lower) {
                    Bound::Lower => Bound::Upper,
                    Bound::Upper => Bound::Lower,
                    other => other,
                };
                calculus::bound_convexity_probe(&obj.f, b, &plan, CONVEXITY_TOL)
            }
        };
        let label = if kind == "convex bound" || kind == "strictly pseudo-convex bound" {
            let b = cert.multipliers.bound.unwrap_or(Bound::Lower);
            let b = if kind == "convex bound" {
                match b {
                    Bound::Lower => Bound::Upper,
                    Bound::Upper => Bound::Lower,
                    other => other,
                }
            } else {
                b
            };
            let what = if kind == "convex bound" { "convex" } else { "strictly pseudo-convex" };
            format!("{} {}-{what} at pbar", obj.name, b.tag())
        } else {
            format!("{} {kind} at pbar", obj.name)
        };
        push(label, report);
    }
    out
}

fn check_family(cert: &Certificate, family: Family) -> Result<(), KktError> {
    if cert.theorem.family() == family {
        Ok(())
    } else {
        Err(KktError::Shape(format!(
            "{} is not handled by this verifier ({family:?} theorems only)",
            cert.theorem
        )))
    }
}

/// Weighted-sum theorems: T32a/b/c and T35a/b/c.
pub fn verify_weighted_kkt(ctx: &KktContext<'_>, cert: &Certificate, opts: &VerifyOptions) -> Result<Verdict, KktError> {
    check_family(cert, Family::Weighted)?;
    verify_certificate(ctx, cert, opts)
}

/// Per-bound theorems: T33, T34a/b, T36a/b.
pub fn verify_split_kkt(ctx: &KktContext<'_>, cert: &Certificate, opts: &VerifyOptions) -> Result<Verdict, KktError> {
    check_family(cert, Family::Split)?;
    verify_certificate(ctx, cert, opts)
}

/// Single-bound theorems for strong optimality: T37a/b, T38a/b.
pub fn verify_strong_kkt(ctx: &KktContext<'_>, cert: &Certificate, opts: &VerifyOptions) -> Result<Verdict, KktError> {
    check_family(cert, Family::Strong)?;
    verify_certificate(ctx, cert, opts)
}

/// The generalized Hukuhara form, T41.
pub fn verify_gh_kkt(ctx: &KktContext<'_>, cert: &Certificate, opts: &VerifyOptions) -> Result<Verdict, KktError> {
    check_family(cert, Family::GeneralizedHukuhara)?;
    verify_certificate(ctx, cert, opts)
}

/// Checks that active constraints strictly decrease toward strictly feasible probes.
///
/// Probes whose source is not strictly feasible are skipped, so a problem
/// with an empty interior passes vacuously.
pub fn feasible_direction_probe(ctx: &KktContext<'_>) -> ProbeReport {
    let prob = ctx.prob;
    let mut checks = 0;
    for (k, q) in ctx.probes.sources.iter().enumerate() {
        let values = match prob.constraint_values(q) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if !values.iter().all(|&v| v < -FEAS_TOL) {
            continue;
        }
        for &u in &ctx.active {
            checks += 1;
            let d = ctx.table.constraints[k][u];
            if d >= calculus::STRICT_NEGATIVE {
                let witness = Witness {
                    component: None,
                    p: ctx.pbar.clone(),
                    q: q.clone(),
                    alpha: None,
                    lhs: d,
                    rhs: values[u],
                    error: Some(format!("{} does not decrease toward this point", prob.constraints[u].name)),
                };
                return ProbeReport {
                    verdict: ProbeVerdict::Violated,
                    checks,
                    witness: Some(witness),
                };
            }
        }
    }
    ProbeReport {
        verdict: ProbeVerdict::HoldsOnSamples,
        checks,
        witness: None,
    }
}
