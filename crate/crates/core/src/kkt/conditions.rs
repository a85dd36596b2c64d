//! Per-probe inequality templates for every theorem.
//!
//! A condition is a sum of `coefficient × derivative` terms. Coefficients are
//! either constants or multiplier slots, so the same template is evaluated
//! by verification (slots filled in) and turned into LP rows by search
//! (slots are the unknowns).

use std::fmt;

use crate::calculus::Bound;

use super::certificate::{expected_shape, Multipliers, Theorem};
use super::DerivTable;

/// One multiplier entry, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub key: &'static str,
    pub index: usize,
}

impl Slot {
    pub fn is_lambda(&self) -> bool {
        self.key.starts_with("lam")
    }

    pub fn value(&self, m: &Multipliers) -> f64 {
        m.vector(self.key)
            .and_then(|v| v.get(self.index).copied())
            .unwrap_or(0.0)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.key, self.index + 1)
    }
}

/// A derivative at `p̄` along a probe direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DVar {
    Objective(usize, Bound),
    /// `min(dL, dU)` of an objective: lower end of its gH derivative.
    ObjectiveMin(usize),
    /// `max(dL, dU)`.
    ObjectiveMax(usize),
    Constraint(usize),
}

impl DVar {
    pub fn value(&self, table: &DerivTable, k: usize) -> f64 {
        match *self {
            DVar::Objective(s, b) => {
                let (dl, du) = table.objectives[k][s];
                match b {
                    Bound::Lower => dl,
                    Bound::Upper => du,
                    Bound::Center => (dl + du) / 2.0,
                    Bound::HalfWidth => (du - dl) / 2.0,
                }
            }
            DVar::ObjectiveMin(s) => {
                let (dl, du) = table.objectives[k][s];
                dl.min(du)
            }
            DVar::ObjectiveMax(s) => {
                let (dl, du) = table.objectives[k][s];
                dl.max(du)
            }
            DVar::Constraint(u) => table.constraints[k][u],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coef {
    Const(f64),
    Slot(Slot),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: Coef,
    pub var: DVar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondKind {
    /// `value ≥ -tol`.
    Weak,
    /// `value > STRICT_MARGIN`; such conditions never involve multipliers.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub terms: Vec<Term>,
    pub kind: CondKind,
}

impl Condition {
    pub fn value(&self, table: &DerivTable, k: usize, m: &Multipliers) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let c = match t.coef {
                    Coef::Const(c) => c,
                    Coef::Slot(s) => s.value(m),
                };
                c * t.var.value(table, k)
            })
            .sum()
    }

    pub fn has_slots(&self) -> bool {
        self.terms.iter().any(|t| matches!(t.coef, Coef::Slot(_)))
    }
}

/// Static requirements on multiplier values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignReq {
    Positive(Slot),
    NonNegative(Slot),
    /// `a < b`.
    Less(Slot, Slot),
}

impl fmt::Display for SignReq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignReq::Positive(s) => write!(f, "{s} > 0"),
            SignReq::NonNegative(s) => write!(f, "{s} >= 0"),
            SignReq::Less(a, b) => write!(f, "{a} < {b}"),
        }
    }
}

/// Every multiplier slot of a theorem, in a fixed order.
pub fn slots(theorem: Theorem, l: usize, t: usize) -> Vec<Slot> {
    expected_shape(theorem, l, t)
        .into_iter()
        .flat_map(|(key, len)| (0..len).map(move |index| Slot { key, index }))
        .collect()
}

pub fn sign_requirements(theorem: Theorem, l: usize, t: usize) -> Vec<SignReq> {
    let mut out: Vec<SignReq> = slots(theorem, l, t)
        .into_iter()
        .map(|s| if s.is_lambda() { SignReq::Positive(s) } else { SignReq::NonNegative(s) })
        .collect();
    if matches!(theorem, Theorem::T32c | Theorem::T35c) {
        let n = if theorem == Theorem::T32c { l } else { 1 };
        for i in 0..n {
            out.push(SignReq::Less(Slot { key: "lamL", index: i }, Slot { key: "lamU", index: i }));
        }
    }
    out
}

fn slot(key: &'static str, index: usize) -> Coef {
    Coef::Slot(Slot { key, index })
}

fn mu_terms(key: &'static str, us: impl IntoIterator<Item = usize>) -> Vec<Term> {
    us.into_iter()
        .map(|u| Term {
            coef: slot(key, u),
            var: DVar::Constraint(u),
        })
        .collect()
}

fn obj(coef: Coef, s: usize, b: Bound) -> Term {
    Term {
        coef,
        var: DVar::Objective(s, b),
    }
}

fn weak(label: impl Into<String>, terms: Vec<Term>) -> Condition {
    Condition {
        label: label.into(),
        terms,
        kind: CondKind::Weak,
    }
}

fn strict(label: impl Into<String>, terms: Vec<Term>) -> Condition {
    Condition {
        label: label.into(),
        terms,
        kind: CondKind::Strict,
    }
}

/// Weighted sum over all objectives with two λ vectors plus `Σ μ ψ′`.
fn weighted_all(l: usize, t: usize, keys: (&'static str, &'static str), bounds: (Bound, Bound)) -> Condition {
    let mut terms = Vec::new();
    for s in 0..l {
        terms.push(obj(slot(keys.0, s), s, bounds.0));
        terms.push(obj(slot(keys.1, s), s, bounds.1));
    }
    terms.extend(mu_terms("mu", 0..t));
    weak(
        format!("sum lam{}*d{} + lam{}*d{} + mu*dpsi >= 0", bounds.0, bounds.0, bounds.1, bounds.1),
        terms,
    )
}

/// Conditions evaluated on every probe direction.
///
/// `index` and `bound` are required by the single-objective theorems and
/// `blocks` by the decomposition theorem; shapes are assumed checked.
pub fn conditions(
    theorem: Theorem,
    l: usize,
    t: usize,
    index: Option<usize>,
    bound: Option<Bound>,
    blocks: Option<&[Vec<usize>]>,
) -> Vec<Condition> {
    use Bound::*;
    use Theorem::*;
    let c = index.unwrap_or(0);
    let one = Coef::Const(1.0);
    match theorem {
        T32a | T32c => vec![weighted_all(l, t, ("lamL", "lamU"), (Lower, Upper))],
        T32b => vec![weighted_all(l, t, ("lamC", "lamW"), (Center, HalfWidth))],
        T33 => {
            let blocks = blocks.expect("T33 requires blocks");
            let mut out = Vec::with_capacity(2 * l);
            for s in 0..l {
                let mut lo = vec![obj(one, s, Lower)];
                lo.extend(mu_terms("mu", blocks[s].iter().copied()));
                out.push(weak(format!("dL[{}] + sum_Q{} mu*dpsi >= 0", s + 1, s + 1), lo));
                let mut hi = vec![obj(one, s, Upper)];
                hi.extend(mu_terms("mu", blocks[s + l].iter().copied()));
                out.push(weak(format!("dU[{}] + sum_Q{} mu*dpsi >= 0", s + 1, s + l + 1), hi));
            }
            out
        }
        T34a | T34b => {
            let (b1, b2, k1, k2, m1, m2) = if theorem == T34a {
                (Lower, Upper, "lamL", "lamU", "muL", "muU")
            } else {
                (Center, HalfWidth, "lamC", "lamW", "muC", "muW")
            };
            let mut first: Vec<Term> = (0..l).map(|s| obj(slot(k1, s), s, b1)).collect();
            first.extend(mu_terms(m1, 0..t));
            let mut second: Vec<Term> = (0..l).map(|s| obj(slot(k2, s), s, b2)).collect();
            second.extend(mu_terms(m2, 0..t));
            vec![
                weak(format!("sum lam{b1}*d{b1} + {m1}*dpsi >= 0"), first),
                weak(format!("sum lam{b2}*d{b2} + {m2}*dpsi >= 0"), second),
            ]
        }
        T35a | T35b | T35c => {
            let (b1, b2, k1, k2) = if theorem == T35b {
                (Center, HalfWidth, "lamC", "lamW")
            } else {
                (Lower, Upper, "lamL", "lamU")
            };
            let mut terms = vec![obj(slot(k1, 0), c, b1), obj(slot(k2, 0), c, b2)];
            terms.extend(mu_terms("mu", 0..t));
            vec![weak(
                format!("lam{b1}*d{b1}[{0}] + lam{b2}*d{b2}[{0}] + mu*dpsi >= 0", c + 1),
                terms,
            )]
        }
        T36a | T36b => {
            let (b1, b2, m1, m2) = if theorem == T36a {
                (Lower, Upper, "muL", "muU")
            } else {
                (Center, HalfWidth, "muC", "muW")
            };
            let mut first = vec![obj(one, c, b1)];
            first.extend(mu_terms(m1, 0..t));
            let mut second = vec![obj(one, c, b2)];
            second.extend(mu_terms(m2, 0..t));
            vec![
                weak(format!("d{b1}[{}] + {m1}*dpsi >= 0", c + 1), first),
                weak(format!("d{b2}[{}] + {m2}*dpsi >= 0", c + 1), second),
            ]
        }
        T37a | T37b | T38a | T38b => {
            let b = bound.expect("strong theorems require a bound");
            let mut out = Vec::new();
            let neg = Coef::Const(-1.0);
            if matches!(theorem, T38a | T38b) {
                // Derivative ordering and, for the CW variant, sign conditions.
                let (lt_label, lt_terms) = if matches!(b, Lower | Center) {
                    ("dL < dU", vec![obj(one, c, Upper), obj(neg, c, Lower)])
                } else {
                    ("dU < dL", vec![obj(one, c, Lower), obj(neg, c, Upper)])
                };
                out.push(strict(format!("{lt_label} [{}]", c + 1), lt_terms));
                match b {
                    Center => out.push(strict(format!("dL[{}] > 0", c + 1), vec![obj(one, c, Lower)])),
                    HalfWidth => out.push(strict(format!("dU[{}] < 0", c + 1), vec![obj(neg, c, Upper)])),
                    _ => {}
                }
            }
            let mut terms = vec![obj(one, c, b)];
            terms.extend(mu_terms("mu", 0..t));
            out.push(weak(format!("d{b}[{}] + mu*dpsi >= 0", c + 1), terms));
            out
        }
        T41 => {
            let mut lo: Vec<Term> = (0..l)
                .map(|s| Term {
                    coef: slot("lam", s),
                    var: DVar::ObjectiveMin(s),
                })
                .collect();
            lo.extend(mu_terms("mu", 0..t));
            let mut hi: Vec<Term> = (0..l)
                .map(|s| Term {
                    coef: slot("lam", s),
                    var: DVar::ObjectiveMax(s),
                })
                .collect();
            hi.extend(mu_terms("mu", 0..t));
            vec![
                weak("sum lam*min(dL,dU) + mu*dpsi >= 0", lo),
                weak("sum lam*max(dL,dU) + mu*dpsi >= 0", hi),
            ]
        }
    }
}
