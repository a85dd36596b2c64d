//! KKT certificate verification and multiplier search.
//!
//! The theorems quantify over every feasible point; here that quantifier is
//! discharged on a finite [`ProbeSet`] of directions `log_p̄(p_k)`, so every
//! verdict is "certified on N probes".

pub mod certificate;
pub mod conditions;
pub mod lp;
pub mod search;
pub mod verify;

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::calculus::{self, Anchor, CalculusError, IntervalFn, ScalarFn};
use crate::manifold::{CoordBox, GeometryError, ManifoldKind, Point, Tangent};
use crate::sampling::Sampler;

pub use certificate::{Certificate, Family, Multipliers, ParetoClass, Theorem, ALL_CLASSES, ALL_THEOREMS};
pub use lp::{lp_feasible, LpError, LpOutcome, Sense};
pub use search::{search_multipliers, SearchOutcome, EPS_LAMBDA};
pub use verify::{
    feasible_direction_probe, verify_certificate, verify_gh_kkt, verify_split_kkt, verify_strong_kkt,
    verify_weighted_kkt, Verdict, VerdictKind, VerifyOptions,
};

/// A point is feasible when every constraint is at most this.
pub const FEAS_TOL: f64 = 1e-8;
/// `|ψ_u(p̄)|` at most this puts `u` in the active set.
pub const ACTIVE_TOL: f64 = 1e-8;
/// Tolerance of the theorem inequalities and of complementary slackness.
pub const INEQ_TOL: f64 = 1e-7;
/// Strict inequalities must hold with at least this margin.
pub const STRICT_MARGIN: f64 = 1e-10;
pub const DEFAULT_PROBES: usize = 500;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error("certificate shape: {0}")]
    Shape(String),
    #[error("invalid decomposition: {0}")]
    Decomposition(String),
    #[error("candidate is infeasible: constraint {name} = {value:e} > {tol:e}")]
    Infeasible { name: String, value: f64, tol: f64 },
    #[error("derivative of {function} toward probe {probe} failed: {source}")]
    Derivative {
        function: String,
        probe: usize,
        source: CalculusError,
    },
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub name: String,
    pub f: IntervalFn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub f: ScalarFn,
}

/// Where probe points come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProbeScope {
    /// Feasible points of the sample box only.
    #[default]
    Feasible,
    /// Every valid point of the sample box. A superset of `Feasible`, so a
    /// certificate passing here also passes on the feasible probes.
    Box,
}

impl ProbeScope {
    pub fn name(self) -> &'static str {
        match self {
            ProbeScope::Feasible => "feasible",
            ProbeScope::Box => "box",
        }
    }
}

impl fmt::Display for ProbeScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProbeScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "feasible" => Ok(ProbeScope::Feasible),
            "box" => Ok(ProbeScope::Box),
            other => Err(format!("probe scope must be `feasible` or `box`, got `{other}`")),
        }
    }
}

/// Minimize `(φ_1, ..., φ_l)` subject to `ψ_u ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub manifold: ManifoldKind,
    pub objectives: Vec<Objective>,
    pub constraints: Vec<Constraint>,
    pub sample_box: CoordBox,
    pub probe_scope: ProbeScope,
    /// Extra convexity test instances checked before sampled ones.
    pub anchors: Vec<Anchor>,
}

impl ProblemSpec {
    pub fn l(&self) -> usize {
        self.objectives.len()
    }

    pub fn t(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraint_values(&self, p: &Point) -> Result<Vec<f64>, CalculusError> {
        self.constraints.iter().map(|c| c.f.eval(p)).collect()
    }

    /// All constraints evaluate and are at most `tol`.
    pub fn is_feasible(&self, p: &Point, tol: f64) -> bool {
        self.constraints
            .iter()
            .all(|c| matches!(c.f.eval(p), Ok(v) if v <= tol))
    }

    /// Every objective and constraint evaluates at `p`.
    pub fn evaluates_at(&self, p: &Point) -> bool {
        self.objectives.iter().all(|o| o.f.eval(p).is_ok())
            && self.constraints.iter().all(|c| c.f.eval(p).is_ok())
    }

    /// Returns the constraint values after checking feasibility within `tol`.
    pub fn check_feasible(&self, p: &Point, tol: f64) -> Result<Vec<f64>, KktError> {
        self.manifold.check_point(p)?;
        let values = self.constraint_values(p)?;
        for (c, &v) in self.constraints.iter().zip(&values) {
            if v > tol {
                return Err(KktError::Infeasible {
                    name: c.name.clone(),
                    value: v,
                    tol,
                });
            }
        }
        Ok(values)
    }
}

/// `{u : |ψ_u(p̄)| ≤ tol}`, zero-based.
pub fn active_set(prob: &ProblemSpec, pbar: &Point, tol: f64) -> Result<Vec<usize>, KktError> {
    let values = prob.check_feasible(pbar, tol)?;
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol)
        .map(|(u, _)| u)
        .collect())
}

/// True iff `|μ_u ψ_u(p̄)| ≤ tol` for every `u` and every supplied vector.
pub fn check_slackness(psi_bar: &[f64], mus: &[&[f64]], tol: f64) -> bool {
    mus.iter()
        .all(|mu| mu.iter().zip(psi_bar).all(|(m, v)| (m * v).abs() <= tol))
}

/// Directions at `p̄` toward sampled points.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub base: Point,
    pub sources: Vec<Point>,
    pub directions: Vec<Tangent>,
    pub seed: u64,
    pub scope: ProbeScope,
}

impl ProbeSet {
    /// Samples `count` source points from the problem's box.
    ///
    /// Sources coincide with `p̄` never, evaluate every function, and with the
    /// feasible scope satisfy every constraint within [`FEAS_TOL`].
    pub fn sample(prob: &ProblemSpec, pbar: &Point, count: usize, seed: u64, scope: ProbeScope) -> Result<Self, KktError> {
        prob.manifold.check_point(pbar)?;
        let sampler = Sampler::new(prob.manifold, prob.sample_box.clone(), seed);
        let m = prob.manifold;
        let sources = sampler.points(count, |p| {
            matches!(m.distance(pbar, p), Ok(d) if d >= calculus::SAME_POINT_DIST)
                && prob.evaluates_at(p)
                && (scope == ProbeScope::Box || prob.is_feasible(p, FEAS_TOL))
        });
        Self::from_sources(prob, pbar, sources, seed, scope)
    }

    pub fn from_sources(
        prob: &ProblemSpec,
        pbar: &Point,
        sources: Vec<Point>,
        seed: u64,
        scope: ProbeScope,
    ) -> Result<Self, KktError> {
        let directions = sources
            .iter()
            .map(|q| prob.manifold.log_map(pbar, q))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            base: pbar.clone(),
            sources,
            directions,
            seed,
            scope,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// The first `n` probes.
    pub fn truncated(&self, n: usize) -> ProbeSet {
        let n = n.min(self.len());
        ProbeSet {
            base: self.base.clone(),
            sources: self.sources[..n].to_vec(),
            directions: self.directions[..n].to_vec(),
            seed: self.seed,
            scope: self.scope,
        }
    }
}

/// Directional derivatives of every function along every probe direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTable {
    /// `objectives[k][s] = (dL, dU)`.
    pub objectives: Vec<Vec<(f64, f64)>>,
    /// `constraints[k][u]`.
    pub constraints: Vec<Vec<f64>>,
}

impl DerivTable {
    pub fn compute(prob: &ProblemSpec, probes: &ProbeSet) -> Result<Self, KktError> {
        let rows: Vec<(Vec<(f64, f64)>, Vec<f64>)> = probes
            .directions
            .par_iter()
            .enumerate()
            .map(|(k, w)| {
                let wrap = |name: &str, e| KktError::Derivative {
                    function: name.to_string(),
                    probe: k + 1,
                    source: e,
                };
                let obj = prob
                    .objectives
                    .iter()
                    .map(|o| calculus::weak_dir_deriv(&o.f, &probes.base, w).map_err(|e| wrap(&o.name, e)))
                    .collect::<Result<Vec<_>, _>>()?;
                let con = prob
                    .constraints
                    .iter()
                    .map(|c| calculus::dir_deriv(&c.f, &probes.base, w).map_err(|e| wrap(&c.name, e)))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((obj, con))
            })
            .collect::<Result<_, KktError>>()?;
        let (objectives, constraints) = rows.into_iter().unzip();
        Ok(Self {
            objectives,
            constraints,
        })
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }
}

/// Everything verification and search need at a candidate.
#[derive(Debug, Clone)]
pub struct KktContext<'a> {
    pub prob: &'a ProblemSpec,
    pub pbar: Point,
    pub psi_bar: Vec<f64>,
    pub active: Vec<usize>,
    pub probes: ProbeSet,
    pub table: DerivTable,
}

impl<'a> KktContext<'a> {
    pub fn new(prob: &'a ProblemSpec, pbar: &Point, probes: ProbeSet) -> Result<Self, KktError> {
        let psi_bar = prob.check_feasible(pbar, FEAS_TOL)?;
        let active = active_set(prob, pbar, ACTIVE_TOL)?;
        let table = DerivTable::compute(prob, &probes)?;
        Ok(Self {
            prob,
            pbar: pbar.clone(),
            psi_bar,
            active,
            probes,
            table,
        })
    }

    /// Samples the default probe set.
    pub fn sampled(prob: &'a ProblemSpec, pbar: &Point, count: usize, seed: u64, scope: ProbeScope) -> Result<Self, KktError> {
        let probes = ProbeSet::sample(prob, pbar, count, seed, scope)?;
        Self::new(prob, pbar, probes)
    }
}
