//! Brute-force Pareto classification on a coordinate grid.
//!
//! Verdicts are relative to the grid: "holds" means no grid point refutes
//! the class, never that the candidate is optimal.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::calculus::CalculusError;
use crate::interval::{IntervalError, IntervalTuple};
use crate::kkt::{KktError, ParetoClass, ProblemSpec, ALL_CLASSES, FEAS_TOL};
use crate::manifold::{CoordBox, GeometryError, Point};

/// Largest grid the oracle will walk.
pub const MAX_GRID_POINTS: usize = 10_000_000;
/// Slack allowed by the scalarization check.
pub const SCALAR_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid has {total} points, more than the limit of {MAX_GRID_POINTS}")]
    TooLarge { total: u128 },
    #[error("no feasible grid point among {total} ({invalid} outside the manifold or the function domains)")]
    EmptyFeasible { total: usize, invalid: usize },
    #[error(transparent)]
    Kkt(#[from] KktError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub bounds: CoordBox,
    /// Points per axis, endpoints included.
    pub resolution: usize,
    /// Shifts the whole grid by a random fraction of a step when set.
    pub jitter_seed: Option<u64>,
}

impl GridSpec {
    pub fn new(bounds: CoordBox, resolution: usize) -> Result<Self, OracleError> {
        let g = Self {
            bounds,
            resolution,
            jitter_seed: None,
        };
        g.total()?;
        Ok(g)
    }

    pub fn with_jitter(mut self, seed: u64) -> Self {
        self.jitter_seed = Some(seed);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    /// Number of grid points, after validation.
    pub fn total(&self) -> Result<usize, OracleError> {
        if self.resolution < 2 {
            return Err(OracleError::Grid(format!(
                "resolution must be at least 2, got {}",
                self.resolution
            )));
        }
        for (i, &(lo, hi)) in self.bounds.ranges().iter().enumerate() {
            if !(lo < hi) {
                return Err(OracleError::Grid(format!("axis {} has lo >= hi", i + 1)));
            }
        }
        let total = (self.resolution as u128).pow(self.dim() as u32);
        if total > MAX_GRID_POINTS as u128 {
            return Err(OracleError::TooLarge { total });
        }
        Ok(total as usize)
    }

    fn offsets(&self) -> Vec<f64> {
        match self.jitter_seed {
            None => vec![0.0; self.dim()],
            Some(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.dim()).map(|_| rng.gen_range(0.0..1.0)).collect()
            }
        }
    }

    /// Coordinates of grid point `index`; the last axis varies fastest.
    fn coords(&self, index: usize, offsets: &[f64]) -> Vec<f64> {
        let n = self.resolution;
        let steps = (n - 1) as f64;
        let mut digits = vec![0usize; self.dim()];
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = rest % n;
            rest /= n;
        }
        let unit: Vec<f64> = digits
            .iter()
            .zip(offsets)
            .map(|(&d, &o)| {
                let shifted = d as f64 + o;
                let wrapped = if shifted > steps { shifted - steps } else { shifted };
                wrapped / steps
            })
            .collect();
        self.bounds.map_unit(&unit)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at resolution {}", self.bounds, self.resolution)?;
        if let Some(s) = self.jitter_seed {
            write!(f, " (jitter seed {s})")?;
        }
        Ok(())
    }
}

/// A feasible grid point together with its objective tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub point: Point,
    pub phi: IntervalTuple,
}

enum Cell {
    Invalid,
    Infeasible,
    Feasible(GridPoint),
}

fn objective_tuple(prob: &ProblemSpec, p: &Point) -> Result<IntervalTuple, OracleError> {
    let items = prob
        .objectives
        .iter()
        .map(|o| o.f.eval(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IntervalTuple::new(items)?)
}

fn cell(prob: &ProblemSpec, grid: &GridSpec, offsets: &[f64], index: usize) -> Cell {
    let coords = grid.coords(index, offsets);
    let Ok(point) = prob.manifold.point_from_coords(&coords) else {
        return Cell::Invalid;
    };
    let Ok(values) = prob.constraint_values(&point) else {
        return Cell::Invalid;
    };
    if values.iter().any(|&v| v > FEAS_TOL) {
        return Cell::Infeasible;
    }
    match objective_tuple(prob, &point) {
        Ok(phi) => Cell::Feasible(GridPoint { index, point, phi }),
        Err(_) => Cell::Invalid,
    }
}

/// Grid points with every constraint at most the feasibility tolerance.
pub fn sample_feasible(prob: &ProblemSpec, grid: &GridSpec) -> Result<Vec<GridPoint>, OracleError> {
    let total = grid.total()?;
    let offsets = grid.offsets();
    let cells: Vec<Cell> = (0..total)
        .into_par_iter()
        .map(|i| cell(prob, grid, &offsets, i))
        .collect();
    let invalid = cells.iter().filter(|c| matches!(c, Cell::Invalid)).count();
    let out: Vec<GridPoint> = cells
        .into_iter()
        .filter_map(|c| match c {
            Cell::Feasible(g) => Some(g),
            _ => None,
        })
        .collect();
    if out.is_empty() {
        return Err(OracleError::EmptyFeasible { total, invalid });
    }
    Ok(out)
}

/// Whether `cand` refutes `class` at a point with tuple `base`. Exact comparisons.
pub fn dominates(class: ParetoClass, cand: &IntervalTuple, base: &IntervalTuple) -> Result<bool, IntervalError> {
    Ok(match class {
        ParetoClass::TypeI => cand.lt_lu(base)?,
        ParetoClass::StrongI => cand.leq_lu(base)? && cand != base,
        ParetoClass::WeakI => cand.all_lt_lu(base)?,
        ParetoClass::TypeII => cand.lt_cw(base)?,
        ParetoClass::StrongII => cand.leq_cw(base)? && cand != base,
        ParetoClass::WeakII => cand.all_lt_cw(base)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassVerdict {
    HoldsOnGrid,
    Refuted(GridPoint),
}

impl ClassVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, ClassVerdict::HoldsOnGrid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoVerdict {
    pub grid: GridSpec,
    pub candidate_phi: IntervalTuple,
    pub total: usize,
    pub feasible: usize,
    /// Grid points outside the manifold or where some function fails.
    pub invalid: usize,
    pub classes: Vec<(ParetoClass, ClassVerdict)>,
}

impl ParetoVerdict {
    pub fn get(&self, class: ParetoClass) -> Option<&ClassVerdict> {
        self.classes.iter().find(|(c, _)| *c == class).map(|(_, v)| v)
    }

    pub fn all_hold(&self) -> bool {
        self.classes.iter().all(|(_, v)| v.holds())
    }
}

/// Classifies `p̄` against every class in `classes` (all six when empty).
///
/// The reported witness for a class is the refuting point of lowest grid index.
pub fn classify(
    prob: &ProblemSpec,
    pbar: &Point,
    grid: &GridSpec,
    classes: &[ParetoClass],
) -> Result<ParetoVerdict, OracleError> {
    let classes: Vec<ParetoClass> = if classes.is_empty() {
        ALL_CLASSES.to_vec()
    } else {
        classes.to_vec()
    };
    prob.check_feasible(pbar, FEAS_TOL)?;
    let base = objective_tuple(prob, pbar)?;
    let total = grid.total()?;
    let offsets = grid.offsets();
    let k = classes.len();

    #[derive(Clone)]
    struct Acc {
        feasible: usize,
        invalid: usize,
        first: Vec<Option<usize>>,
    }
    let merge = |mut a: Acc, b: Acc| {
        a.feasible += b.feasible;
        a.invalid += b.invalid;
        for (x, y) in a.first.iter_mut().zip(b.first) {
            *x = match (*x, y) {
                (Some(i), Some(j)) => Some(i.min(j)),
                (x, y) => x.or(y),
            };
        }
        a
    };
    let empty = Acc {
        feasible: 0,
        invalid: 0,
        first: vec![None; k],
    };
    let acc = (0..total)
        .into_par_iter()
        .fold(
            || empty.clone(),
            |mut acc, i| {
                match cell(prob, grid, &offsets, i) {
                    Cell::Invalid => acc.invalid += 1,
                    Cell::Infeasible => {}
                    Cell::Feasible(g) => {
                        acc.feasible += 1;
                        for (slot, &class) in acc.first.iter_mut().zip(&classes) {
                            if slot.is_none() && matches!(dominates(class, &g.phi, &base), Ok(true)) {
                                *slot = Some(i);
                            }
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| empty.clone(), merge);

    if acc.feasible == 0 {
        return Err(OracleError::EmptyFeasible {
            total,
            invalid: acc.invalid,
        });
    }
    let mut out = Vec::with_capacity(k);
    for (&class, first) in classes.iter().zip(&acc.first) {
        let verdict = match first {
            None => ClassVerdict::HoldsOnGrid,
            Some(i) => {
                // Recomputed from scratch so the witness re-checks exactly.
                let Cell::Feasible(g) = cell(prob, grid, &offsets, *i) else {
                    unreachable!("grid evaluation is deterministic")
                };
                debug_assert!(dominates(class, &g.phi, &base)?);
                ClassVerdict::Refuted(g)
            }
        };
        out.push((class, verdict));
    }
    Ok(ParetoVerdict {
        grid: grid.clone(),
        candidate_phi: base,
        total,
        feasible: acc.feasible,
        invalid: acc.invalid,
        classes: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizationResult {
    /// `Σ λ^L φ^L + Σ λ^U φ^U` at `p̄`.
    pub value: f64,
    /// Lowest-index grid point where the scalarization is smaller by more than [`SCALAR_TOL`].
    pub witness: Option<(GridPoint, f64)>,
}

impl ScalarizationResult {
    pub fn is_minimizer(&self) -> bool {
        self.witness.is_none()
    }
}

fn scalarized(phi: &IntervalTuple, lam_l: &[f64], lam_u: &[f64]) -> f64 {
    phi.items()
        .iter()
        .zip(lam_l.iter().zip(lam_u))
        .map(|(iv, (a, b))| a * iv.lo() + b * iv.hi())
        .sum()
}

/// Checks that `p̄` minimizes the weighted endpoint sum over the feasible grid.
pub fn scalarization_check(
    prob: &ProblemSpec,
    pbar: &Point,
    lam_l: &[f64],
    lam_u: &[f64],
    grid: &GridSpec,
) -> Result<ScalarizationResult, OracleError> {
    let l = prob.l();
    if lam_l.len() != l || lam_u.len() != l {
        return Err(OracleError::Kkt(KktError::Shape(format!("expected {l} weights per bound"))));
    }
    if lam_l.iter().chain(lam_u).any(|&x| !(x > 0.0)) {
        return Err(OracleError::Kkt(KktError::Shape("weights must be positive".into())));
    }
    prob.check_feasible(pbar, FEAS_TOL)?;
    let value = scalarized(&objective_tuple(prob, pbar)?, lam_l, lam_u);
    let total = grid.total()?;
    let offsets = grid.offsets();
    let witness = (0..total).into_par_iter().find_map_first(|i| match cell(prob, grid, &offsets, i) {
        Cell::Feasible(g) => {
            let v = scalarized(&g.phi, lam_l, lam_u);
            (v < value - SCALAR_TOL).then_some((g, v))
        }
        _ => None,
    });
    Ok(ScalarizationResult { value, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{IntervalFn, ScalarFn};
    use crate::kkt::{Constraint, Objective, ProbeScope};
    use crate::manifold::ManifoldKind;

    fn problem(constraints: &[&str]) -> ProblemSpec {
        let m = ManifoldKind::Euclidean(2);
        ProblemSpec {
            manifold: m,
            objectives: vec![
                Objective {
                    name: "f".into(),
                    f: IntervalFn::parse("p1", "p1 + 1", m).unwrap(),
                },
                Objective {
                    name: "g".into(),
                    f: IntervalFn::parse("p2", "p2 + abs(p1)", m).unwrap(),
                },
            ],
            constraints: constraints
                .iter()
                .enumerate()
                .map(|(i, s)| Constraint {
                    name: format!("c{}", i + 1),
                    f: ScalarFn::parse(s, m).unwrap(),
                })
                .collect(),
            sample_box: "-1:1,-1:1".parse().unwrap(),
            probe_scope: ProbeScope::Feasible,
            anchors: vec![],
        }
    }

    #[test]
    fn grid_coordinates_hit_endpoints() {
        let g = GridSpec::new("0:1,10:20".parse().unwrap(), 3).unwrap();
        assert_eq!(g.total().unwrap(), 9);
        let o = g.offsets();
        assert_eq!(g.coords(0, &o), vec![0.0, 10.0]);
        assert_eq!(g.coords(1, &o), vec![0.0, 15.0]);
        assert_eq!(g.coords(8, &o), vec![1.0, 20.0]);
        assert!(matches!(
            GridSpec::new("0:1,0:1,0:1,0:1".parse().unwrap(), 101),
            Err(OracleError::TooLarge { .. })
        ));
        assert!(GridSpec::new("0:1".parse().unwrap(), 1).is_err());
    }

    #[test]
    fn unconstrained_grid_is_fully_feasible() {
        let prob = problem(&[]);
        let g = GridSpec::new(prob.sample_box.clone(), 11).unwrap();
        assert_eq!(sample_feasible(&prob, &g).unwrap().len(), 121);
    }

    #[test]
    fn empty_feasible_set_is_distinct() {
        let prob = problem(&["p1^2 + 1"]);
        let g = GridSpec::new(prob.sample_box.clone(), 5).unwrap();
        assert!(matches!(sample_feasible(&prob, &g), Err(OracleError::EmptyFeasible { .. })));
    }

    #[test]
    fn corner_candidate_is_optimal() {
        // Feasible set [0,1]^2 in the sample box; (0,0) minimizes both objectives.
        let prob = problem(&["-p1", "-p2"]);
        let g = GridSpec::new(prob.sample_box.clone(), 21).unwrap();
        let v = classify(&prob, &Point::Vector(vec![0.0, 0.0]), &g, &[]).unwrap();
        assert!(v.all_hold(), "{v:?}");
        let v = classify(&prob, &Point::Vector(vec![0.5, 0.5]), &g, &[]).unwrap();
        let ClassVerdict::Refuted(w) = v.get(ParetoClass::TypeI).unwrap() else {
            panic!("type-I should be refuted")
        };
        assert_eq!(w.point, Point::Vector(vec![0.0, 0.0]));
        assert!(!v.get(ParetoClass::WeakI).unwrap().holds());
        let s = scalarization_check(&prob, &Point::Vector(vec![0.0, 0.0]), &[1.0, 1.0], &[1.0, 1.0], &g).unwrap();
        assert!(s.is_minimizer());
    }
}
