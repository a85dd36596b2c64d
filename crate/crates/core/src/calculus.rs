//! Directional derivatives along geodesics and sampling-based convexity probes.
//!
//! Every probe verdict is relative to the sampled points: "holds on samples"
//! is never a proof.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{self, Expr, ExprError};
use crate::interval::Interval;
use crate::manifold::{GeometryError, ManifoldKind, Point, Tangent};
use crate::sampling::Sampler;

/// Initial forward-difference step.
pub const H0: f64 = 1e-2;
/// Number of step halvings.
pub const HALVINGS: usize = 20;
pub const DERIV_RTOL: f64 = 1e-7;
pub const DERIV_ATOL: f64 = 1e-9;
/// Tolerance of the convexity inequality.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// A derivative counts as strictly negative below this value.
pub const STRICT_NEGATIVE: f64 = -1e-10;
/// Sample points closer than this to the base point are skipped by pseudo-convexity probes.
pub const SAME_POINT_DIST: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalculusError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("`{name}` is not a feature of {manifold} (available: {available})")]
    UnknownFeature {
        name: String,
        manifold: ManifoldKind,
        available: String,
    },
    #[error("lower and upper bounds live on different manifolds")]
    ManifoldMismatch,
    #[error("directional derivative did not converge (last extrapolants {last} and {previous})")]
    NoConvergence { last: f64, previous: f64 },
    #[error("lower bound {lower} exceeds upper bound {upper}")]
    Inverted { lower: f64, upper: f64 },
}

/// A real-valued function on a manifold, given by an expression over its features.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFn {
    expr: Expr,
    manifold: ManifoldKind,
}

impl ScalarFn {
    pub fn new(expr: Expr, manifold: ManifoldKind) -> Result<Self, CalculusError> {
        let names = manifold.feature_names();
        for v in expr.free_vars() {
            if !names.contains(&v) {
                return Err(CalculusError::UnknownFeature {
                    name: v,
                    manifold,
                    available: names.join(", "),
                });
            }
        }
        Ok(Self { expr, manifold })
    }

    pub fn parse(src: &str, manifold: ManifoldKind) -> Result<Self, CalculusError> {
        Self::new(expr::parse(src)?, manifold)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    pub fn eval(&self, p: &Point) -> Result<f64, CalculusError> {
        let env = self.manifold.features(p)?;
        Ok(self.expr.eval(&env)?)
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

/// Selects one real-valued component of an interval function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Lower,
    Upper,
    Center,
    HalfWidth,
}

impl Bound {
    pub fn tag(self) -> &'static str {
        match self {
            Bound::Lower => "L",
            Bound::Upper => "U",
            Bound::Center => "C",
            Bound::HalfWidth => "W",
        }
    }

    pub fn from_tag(s: &str) -> Option<Bound> {
        match s {
            "L" => Some(Bound::Lower),
            "U" => Some(Bound::Upper),
            "C" => Some(Bound::Center),
            "W" => Some(Bound::HalfWidth),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
            Bound::Center => "center",
            Bound::HalfWidth => "half-width",
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// `p ↦ [lower(p), upper(p)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFn {
    lower: ScalarFn,
    upper: ScalarFn,
    center: ScalarFn,
    half_width: ScalarFn,
}

impl IntervalFn {
    pub fn new(lower: ScalarFn, upper: ScalarFn) -> Result<Self, CalculusError> {
        if lower.manifold != upper.manifold {
            return Err(CalculusError::ManifoldMismatch);
        }
        let m = lower.manifold;
        let center = ScalarFn::new(Expr::center_of(&lower.expr, &upper.expr), m)?;
        let half_width = ScalarFn::new(Expr::half_width_of(&lower.expr, &upper.expr), m)?;
        Ok(Self {
            lower,
            upper,
            center,
            half_width,
        })
    }

    pub fn parse(lower: &str, upper: &str, manifold: ManifoldKind) -> Result<Self, CalculusError> {
        Self::new(ScalarFn::parse(lower, manifold)?, ScalarFn::parse(upper, manifold)?)
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.lower.manifold
    }

    pub fn lower(&self) -> &ScalarFn {
        &self.lower
    }

    pub fn upper(&self) -> &ScalarFn {
        &self.upper
    }

    pub fn component(&self, b: Bound) -> &ScalarFn {
        match b {
            Bound::Lower => &self.lower,
            Bound::Upper => &self.upper,
            Bound::Center => &self.center,
            Bound::HalfWidth => &self.half_width,
        }
    }

    pub fn eval(&self, p: &Point) -> Result<Interval, CalculusError> {
        let lower = self.lower.eval(p)?;
        let upper = self.upper.eval(p)?;
        Interval::new(lower, upper).map_err(|_| CalculusError::Inverted { lower, upper })
    }
}

/// One-sided derivative of `f` at `p` along the geodesic `α ↦ exp_p(α w)`.
///
/// Forward differences at `α = h₀ 2^-k`, with two Richardson levels to cancel
/// the `O(α)` and `O(α²)` error terms.
pub fn dir_deriv(f: &ScalarFn, p: &Point, w: &Tangent) -> Result<f64, CalculusError> {
    if w.is_zero() {
        return Ok(0.0);
    }
    let m = f.manifold;
    let norm = m.norm(p, w)?;
    let h0 = if norm > 1.0 { H0 / norm } else { H0 };
    let f0 = f.eval(p)?;

    let quotient = |h: f64| -> Result<f64, CalculusError> {
        let q = m.exp_map(p, &w.scaled(h))?;
        Ok((f.eval(&q)? - f0) / h)
    };

    let mut d_prev = quotient(h0)?;
    let mut r1_prev: Option<f64> = None;
    let mut r2_prev: Option<f64> = None;
    let mut h = h0;
    for _ in 1..=HALVINGS {
        h *= 0.5;
        let d = quotient(h)?;
        let r1 = 2.0 * d - d_prev;
        if let Some(r1p) = r1_prev {
            let r2 = (4.0 * r1 - r1p) / 3.0;
            if let Some(r2p) = r2_prev {
                if (r2 - r2p).abs() <= DERIV_ATOL + DERIV_RTOL * r2.abs() {
                    return Ok(r2);
                }
            }
            r2_prev = Some(r2);
        }
        r1_prev = Some(r1);
        d_prev = d;
    }
    Err(CalculusError::NoConvergence {
        last: r2_prev.unwrap_or(f64::NAN),
        previous: r1_prev.unwrap_or(f64::NAN),
    })
}

/// `dir_deriv(f, p, log_p q)`.
pub fn dir_deriv_toward(f: &ScalarFn, p: &Point, q: &Point) -> Result<f64, CalculusError> {
    let w = f.manifold.log_map(p, q)?;
    dir_deriv(f, p, &w)
}

/// Componentwise derivatives `(dL, dU)` of the endpoint functions.
pub fn weak_dir_deriv(f: &IntervalFn, p: &Point, w: &Tangent) -> Result<(f64, f64), CalculusError> {
    Ok((dir_deriv(&f.lower, p, w)?, dir_deriv(&f.upper, p, w)?))
}

/// gH directional derivative `[min(dL, dU), max(dL, dU)]`.
pub fn gh_dir_deriv(f: &IntervalFn, p: &Point, w: &Tangent) -> Result<Interval, CalculusError> {
    let (dl, du) = weak_dir_deriv(f, p, w)?;
    Ok(Interval::new(dl.min(du), dl.max(du)).expect("finite derivatives"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeVerdict {
    HoldsOnSamples,
    Violated,
}

impl fmt::Display for ProbeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeVerdict::HoldsOnSamples => "holds-on-samples",
            ProbeVerdict::Violated => "violated",
        })
    }
}

/// A counterexample found by a probe.
///
/// Convexity: `lhs = f(γ(α))`, `rhs = α f(q) + (1 - α) f(p)`.
/// Pseudo-convexity: `p` is the base point, `q` the sample, `lhs = f′(p; log_p q)`
/// and `rhs = f(q) - f(p)`; `alpha` is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub component: Option<Bound>,
    pub p: Point,
    pub q: Point,
    pub alpha: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub error: Option<String>,
}

impl Witness {
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = self.component {
            write!(f, "[{}] ", c.name())?;
        }
        write!(f, "p={:.6} q={:.6}", self.p, self.q)?;
        if let Some(a) = self.alpha {
            write!(f, " alpha={a}")?;
        }
        match &self.error {
            Some(e) => write!(f, " error: {e}"),
            None => write!(f, " lhs={:.6} rhs={:.6}", self.lhs, self.rhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub verdict: ProbeVerdict,
    /// Number of inequality instances examined.
    pub checks: usize,
    pub witness: Option<Witness>,
}

impl ProbeReport {
    fn from_search(checks: usize, witness: Option<Witness>) -> Self {
        let verdict = if witness.is_some() {
            ProbeVerdict::Violated
        } else {
            ProbeVerdict::HoldsOnSamples
        };
        Self {
            verdict,
            checks,
            witness,
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == ProbeVerdict::HoldsOnSamples
    }

    /// Conjunction: the first violated report wins, checks add up.
    pub fn and(self, other: ProbeReport) -> ProbeReport {
        let checks = self.checks + other.checks;
        let witness = self.witness.or(other.witness);
        ProbeReport::from_search(checks, witness)
    }

    fn tagged(mut self, b: Bound) -> Self {
        if let Some(w) = self.witness.as_mut() {
            w.component = Some(b);
        }
        self
    }
}

/// An explicit `(p, q, α)` triple checked before the sampled ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub p: Point,
    pub q: Point,
    pub alpha: f64,
}

/// Point pairs and α values for convexity probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityPlan {
    pub anchors: Vec<Anchor>,
    pub pairs: Vec<(Point, Point)>,
    pub alphas: Vec<f64>,
}

/// `k / (n + 1)` for `k = 1..=n`; nine values give 0.1, ..., 0.9.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

impl ConvexityPlan {
    /// Pairs consecutive sample points.
    pub fn sample(
        sampler: &Sampler,
        n_pairs: usize,
        n_alphas: usize,
        keep: impl FnMut(&Point) -> bool,
        anchors: Vec<Anchor>,
    ) -> Self {
        let mut pts = sampler.points(2 * n_pairs, keep).into_iter();
        let mut pairs = Vec::with_capacity(n_pairs);
        while let (Some(p), Some(q)) = (pts.next(), pts.next()) {
            pairs.push((p, q));
        }
        Self {
            anchors,
            pairs,
            alphas: alpha_grid(n_alphas),
        }
    }

    /// Pairs `(base, q)` for every sample `q`: convexity at a fixed point.
    pub fn anchored_at(base: &Point, points: &[Point], n_alphas: usize, anchors: Vec<Anchor>) -> Self {
        Self {
            anchors,
            pairs: points.iter().map(|q| (base.clone(), q.clone())).collect(),
            alphas: alpha_grid(n_alphas),
        }
    }

    pub fn len(&self) -> usize {
        self.anchors.len() + self.pairs.len() * self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn instance(&self, i: usize) -> (&Point, &Point, f64) {
        if i < self.anchors.len() {
            let a = &self.anchors[i];
            return (&a.p, &a.q, a.alpha);
        }
        let j = i - self.anchors.len();
        let (p, q) = &self.pairs[j / self.alphas.len()];
        (p, q, self.alphas[j % self.alphas.len()])
    }
}

/// Checks `f(γ(α)) ≤ α f(q) + (1 - α) f(p) + tol` on every planned instance.
///
/// Evaluation failures count as violations. The reported witness is the one
/// with the lowest instance index, independent of thread scheduling.
pub fn convexity_probe(f: &ScalarFn, plan: &ConvexityPlan, tol: f64) -> ProbeReport {
    let m = f.manifold;
    let witness = (0..plan.len()).into_par_iter().find_map_first(|i| {
        let (p, q, alpha) = plan.instance(i);
        let eval = || -> Result<(f64, f64), CalculusError> {
            let g = m.geodesic(p, q, alpha)?;
            let lhs = f.eval(&g)?;
            let rhs = alpha * f.eval(q)? + (1.0 - alpha) * f.eval(p)?;
            Ok((lhs, rhs))
        };
        let make = |lhs, rhs, error| Witness {
            component: None,
            p: p.clone(),
            q: q.clone(),
            alpha: Some(alpha),
            lhs,
            rhs,
            error,
        };
        match eval() {
            Ok((lhs, rhs)) if lhs <= rhs + tol => None,
            Ok((lhs, rhs)) => Some(make(lhs, rhs, None)),
            Err(e) => Some(make(f64::NAN, f64::NAN, Some(e.to_string()))),
        }
    });
    ProbeReport::from_search(plan.len(), witness)
}

/// Convexity of both endpoint functions.
pub fn lu_convexity_probe(f: &IntervalFn, plan: &ConvexityPlan, tol: f64) -> ProbeReport {
    convexity_probe(&f.lower, plan, tol)
        .tagged(Bound::Lower)
        .and(convexity_probe(&f.upper, plan, tol).tagged(Bound::Upper))
}

/// Convexity of the center and half-width functions.
pub fn cw_convexity_probe(f: &IntervalFn, plan: &ConvexityPlan, tol: f64) -> ProbeReport {
    convexity_probe(&f.center, plan, tol)
        .tagged(Bound::Center)
        .and(convexity_probe(&f.half_width, plan, tol).tagged(Bound::HalfWidth))
}

pub fn bound_convexity_probe(f: &IntervalFn, b: Bound, plan: &ConvexityPlan, tol: f64) -> ProbeReport {
    convexity_probe(f.component(b), plan, tol).tagged(b)
}

/// Checks the pseudo-convexity implication at `pbar` for every sample.
///
/// strict: `f(p) ≤ f(p̄) ⇒ f′(p̄; log p) < 0`; otherwise `f(p) < f(p̄) ⇒ f′ < 0`.
/// Negativity means below [`STRICT_NEGATIVE`]. Samples within
/// [`SAME_POINT_DIST`] of `pbar` are skipped.
pub fn pseudoconvexity_probe(f: &ScalarFn, pbar: &Point, points: &[Point], strict: bool) -> ProbeReport {
    let m = f.manifold;
    let fbar = match f.eval(pbar) {
        Ok(v) => v,
        Err(e) => {
            let w = Witness {
                component: None,
                p: pbar.clone(),
                q: pbar.clone(),
                alpha: None,
                lhs: f64::NAN,
                rhs: f64::NAN,
                error: Some(e.to_string()),
            };
            return ProbeReport::from_search(0, Some(w));
        }
    };
    let witness = points.par_iter().find_map_first(|q| {
        let check = || -> Result<Option<(f64, f64)>, CalculusError> {
            if m.distance(pbar, q)? < SAME_POINT_DIST {
                return Ok(None);
            }
            let diff = f.eval(q)? - fbar;
            let antecedent = if strict { diff <= 0.0 } else { diff < 0.0 };
            if !antecedent {
                return Ok(None);
            }
            let d = dir_deriv_toward(f, pbar, q)?;
            Ok(if d < STRICT_NEGATIVE { None } else { Some((d, diff)) })
        };
        let make = |lhs, rhs, error| Witness {
            component: None,
            p: pbar.clone(),
            q: q.clone(),
            alpha: None,
            lhs,
            rhs,
            error,
        };
        match check() {
            Ok(None) => None,
            Ok(Some((d, diff))) => Some(make(d, diff, None)),
            Err(e) => Some(make(f64::NAN, f64::NAN, Some(e.to_string()))),
        }
    });
    ProbeReport::from_search(points.len(), witness)
}

/// Pseudo-convexity of one component of an interval function.
pub fn bound_pseudoconvexity_probe(
    f: &IntervalFn,
    b: Bound,
    pbar: &Point,
    points: &[Point],
    strict: bool,
) -> ProbeReport {
    pseudoconvexity_probe(f.component(b), pbar, points, strict).tagged(b)
}
