//! Multiplier search: the theorem inequalities on every probe become LP rows.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::calculus::Bound;

use super::certificate::{Certificate, Multipliers, Theorem};
use super::conditions::{conditions, slots, CondKind, Coef, Condition, Slot};
use super::lp::{lp_feasible, LpOutcome, Sense};
use super::verify::{verify_certificate, Verdict, VerdictKind, VerifyOptions};
use super::{KktContext, KktError, STRICT_MARGIN};

/// Lower bound on every objective multiplier.
pub const EPS_LAMBDA: f64 = 1e-6;
/// Relative singular-value cutoff of the denoised LP.
pub const DENOISE_RTOL: f64 = 1e-7;
/// Distinct decompositions tried before giving up.
pub const MAX_DECOMPOSITIONS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchFailure {
    pub theorem: Theorem,
    /// LP solves attempted.
    pub attempts: usize,
    /// Smallest phase-1 infeasibility seen.
    pub best_phase1: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found { certificate: Certificate, verdict: Verdict },
    Infeasible(SearchFailure),
}

impl SearchOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, SearchOutcome::Found { .. })
    }
}

/// One fixed choice of index, bound and blocks.
#[derive(Debug, Clone)]
struct Variant {
    index: Option<usize>,
    bound: Option<Bound>,
    blocks: Option<Vec<Vec<usize>>>,
}

enum Attempt {
    Lp(LpOutcome, Multipliers),
    StrictFailed(String),
}

/// Looks for multipliers that make `theorem` certify the candidate on the probe set.
///
/// Inactive constraints get zero multipliers; for the single-objective and
/// decomposition theorems every choice is tried and the first verified one
/// is returned.
pub fn search_multipliers(ctx: &KktContext<'_>, theorem: Theorem, opts: &VerifyOptions) -> Result<SearchOutcome, KktError> {
    let (l, t) = (ctx.prob.l(), ctx.prob.t());
    let variants = variants(ctx, theorem)?;
    let mut failure = SearchFailure {
        theorem,
        attempts: 0,
        best_phase1: None,
        reason: String::new(),
    };
    if variants.is_empty() {
        failure.reason = if theorem == Theorem::T33 {
            format!("{t} constraints cannot be split into {} nonempty blocks", 2 * l)
        } else {
            "no admissible variant".into()
        };
        return Ok(SearchOutcome::Infeasible(failure));
    }
    let mut reasons = Vec::new();
    for v in variants {
        failure.attempts += 1;
        match attempt(ctx, theorem, &v, opts.tol)? {
            Attempt::StrictFailed(label) => reasons.push(format!("{} fails on some probe", label)),
            Attempt::Lp(LpOutcome::Infeasible { phase1 }, _) => {
                failure.best_phase1 = Some(failure.best_phase1.map_or(phase1, |b: f64| b.min(phase1)));
            }
            Attempt::Lp(LpOutcome::Feasible(_), m) => {
                let certificate = Certificate {
                    theorem,
                    multipliers: m,
                };
                let verdict = verify_certificate(ctx, &certificate, opts)?;
                if verdict.kind != VerdictKind::Violated {
                    return Ok(SearchOutcome::Found { certificate, verdict });
                }
                reasons.push("LP solution did not verify".into());
            }
        }
    }
    reasons.dedup();
    failure.reason = if reasons.is_empty() {
        "the multiplier LP is infeasible".into()
    } else {
        reasons.join("; ")
    };
    Ok(SearchOutcome::Infeasible(failure))
}

fn variants(ctx: &KktContext<'_>, theorem: Theorem) -> Result<Vec<Variant>, KktError> {
    let (l, t) = (ctx.prob.l(), ctx.prob.t());
    let indices: Vec<Option<usize>> = if theorem.uses_index() {
        (0..l).map(Some).collect()
    } else {
        vec![None]
    };
    let bounds: Vec<Option<Bound>> = if theorem.bounds().is_empty() {
        vec![None]
    } else {
        theorem.bounds().iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    if theorem == Theorem::T33 {
        for blocks in decompositions(t, 2 * l, &ctx.active) {
            out.push(Variant {
                index: None,
                bound: None,
                blocks: Some(blocks),
            });
        }
        return Ok(out);
    }
    for &index in &indices {
        for &bound in &bounds {
            out.push(Variant {
                index,
                bound,
                blocks: None,
            });
        }
    }
    Ok(out)
}

/// Surjections of `0..t` onto `count` blocks, one per distinct assignment of
/// the active constraints.
fn decompositions(t: usize, count: usize, active: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if count == 0 || t < count {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut digits = vec![0usize; t];
    loop {
        let mut used = vec![false; count];
        digits.iter().for_each(|&d| used[d] = true);
        if used.iter().all(|&u| u) {
            let key: Vec<usize> = active.iter().map(|&u| digits[u]).collect();
            if seen.insert(key) {
                let mut blocks = vec![Vec::new(); count];
                for (u, &d) in digits.iter().enumerate() {
                    blocks[d].push(u);
                }
                out.push(blocks);
                if out.len() >= MAX_DECOMPOSITIONS {
                    break;
                }
            }
        }
        // Next assignment, last constraint fastest.
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < count {
                break;
            }
            digits[i] = 0;
        }
    }
    out
}

/// Rows and bounds of the multiplier LP; columns follow `vars`.
struct LpSystem {
    vars: Vec<Slot>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    sense: Vec<Sense>,
    bounds: Vec<(f64, f64)>,
}

fn attempt(ctx: &KktContext<'_>, theorem: Theorem, v: &Variant, tol: f64) -> Result<Attempt, KktError> {
    let (l, t) = (ctx.prob.l(), ctx.prob.t());
    let conds = conditions(theorem, l, t, v.index, v.bound, v.blocks.as_deref());
    let empty = Multipliers::default();
    let n_probes = ctx.probes.len();

    for cond in conds.iter().filter(|c| c.kind == CondKind::Strict) {
        if (0..n_probes).any(|k| cond.value(&ctx.table, k, &empty) <= STRICT_MARGIN) {
            return Ok(Attempt::StrictFailed(cond.label.clone()));
        }
    }

    // Denoised rows first; the raw rows are the fallback. Either way the
    // caller verifies the result against the raw derivatives.
    let mut outcome = None;
    let mut system = None;
    for denoise in [true, false] {
        let sys = build_lp(ctx, theorem, &conds, tol, denoise);
        let o = lp_feasible(&sys.a, &sys.b, &sys.sense, &sys.bounds);
        let done = matches!(o, Ok(LpOutcome::Feasible(_)));
        let keep = match (&outcome, &o) {
            (None, _) | (_, Ok(LpOutcome::Feasible(_))) => true,
            (Some(Ok(LpOutcome::Infeasible { phase1: old })), Ok(LpOutcome::Infeasible { phase1 })) => phase1 < old,
            (Some(Err(_)), Ok(_)) => true,
            _ => false,
        };
        if keep {
            outcome = Some(o);
            system = Some(sys);
        }
        if done {
            break;
        }
    }
    let outcome = outcome.expect("at least one solve")?;
    let LpSystem { vars, bounds, .. } = system.expect("at least one solve");
    let mut m = Multipliers {
        index: v.index,
        bound: v.bound,
        blocks: v.blocks.clone(),
        ..Multipliers::default()
    };
    for (key, len) in super::certificate::expected_shape(theorem, l, t) {
        *m.vector_mut(key).expect("known key") = Some(vec![0.0; len]);
    }
    if let LpOutcome::Feasible(x) = &outcome {
        for (i, s) in vars.iter().enumerate() {
            let value = x[i].clamp(bounds[i].0, bounds[i].1);
            if let Some(Some(vec)) = m.vector_mut(s.key) {
                vec[s.index] = value;
            }
        }
    }
    Ok(Attempt::Lp(outcome, m))
}

fn build_lp(ctx: &KktContext<'_>, theorem: Theorem, conds: &[Condition], tol: f64, denoise: bool) -> LpSystem {
    let (l, t) = (ctx.prob.l(), ctx.prob.t());
    let n_probes = ctx.probes.len();
    let vars = slots(theorem, l, t);
    let col = |s: &Slot| vars.iter().position(|x| x == s).expect("slot belongs to theorem");
    let bounds: Vec<(f64, f64)> = vars
        .iter()
        .map(|s| {
            if s.is_lambda() {
                (EPS_LAMBDA, f64::INFINITY)
            } else if !ctx.active.contains(&s.index) {
                (0.0, 0.0)
            } else {
                let psi = ctx.psi_bar[s.index].abs();
                let hi = if psi > 0.0 { 0.5 * tol / psi } else { f64::INFINITY };
                (0.0, hi)
            }
        })
        .collect();

    // Probe rows carry the constant part in a trailing column until denoised.
    let weak: Vec<&Condition> = conds.iter().filter(|c| c.kind == CondKind::Weak).collect();
    let mut probe_rows = Vec::with_capacity(n_probes * weak.len());
    for k in 0..n_probes {
        for cond in &weak {
            let mut row = vec![0.0; vars.len() + 1];
            for term in &cond.terms {
                let d = term.var.value(&ctx.table, k);
                match term.coef {
                    Coef::Const(c) => row[vars.len()] += c * d,
                    Coef::Slot(s) => row[col(&s)] += d,
                }
            }
            probe_rows.push(row);
        }
    }
    if denoise {
        probe_rows = denoised(&probe_rows);
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut sense = Vec::new();
    for mut row in probe_rows {
        let cst = row.pop().expect("constant column");
        a.push(row);
        b.push(-0.5 * tol - cst);
        sense.push(Sense::Geq);
    }

    let lambdas: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].is_lambda()).collect();
    if !lambdas.is_empty() {
        let mut row = vec![0.0; vars.len()];
        lambdas.iter().for_each(|&i| row[i] = 1.0);
        a.push(row);
        b.push(1.0);
        sense.push(Sense::Eq);
    }
    if matches!(theorem, Theorem::T32c | Theorem::T35c) {
        let n = if theorem == Theorem::T32c { l } else { 1 };
        for i in 0..n {
            let mut row = vec![0.0; vars.len()];
            row[col(&Slot { key: "lamU", index: i })] = 1.0;
            row[col(&Slot { key: "lamL", index: i })] = -1.0;
            a.push(row);
            b.push(EPS_LAMBDA);
            sense.push(Sense::Geq);
        }
    }

    LpSystem { vars, a, b, sense, bounds }
}

/// Drops singular directions below [`DENOISE_RTOL`] of the largest.
///
/// Probe rows are often exact combinations of a few functions of the probe
/// point (for instance `ln q1` and `ln q2`), blurred by derivative noise. The
/// noise makes the system numerically full rank and the simplex unstable.
fn denoised(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, n) = (rows.len(), rows.first().map_or(0, Vec::len));
    if m == 0 || n == 0 {
        return rows.to_vec();
    }
    let d = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let mut svd = d.svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return rows.to_vec();
    }
    for s in svd.singular_values.iter_mut() {
        if *s <= DENOISE_RTOL * smax {
            *s = 0.0;
        }
    }
    match svd.recompose() {
        Ok(r) => (0..m).map(|i| (0..n).map(|j| r[(i, j)]).collect()).collect(),
        Err(_) => rows.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompositions_are_surjective_and_deduplicated() {
        let all = decompositions(3, 2, &[0, 1, 2]);
        // 2^3 - 2 surjections.
        assert_eq!(all.len(), 6);
        for blocks in &all {
            super::super::certificate::check_decomposition(blocks, 3, 2).unwrap();
        }
        // Only constraint 0 is active: its block is all that matters.
        assert_eq!(decompositions(3, 2, &[0]).len(), 2);
        assert!(decompositions(1, 2, &[0]).is_empty());
    }
}

