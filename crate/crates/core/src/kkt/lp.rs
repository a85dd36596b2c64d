//! Dense two-phase simplex for small feasibility problems.
//!
//! Finds `x` with `A x ≥ b` / `A x = b` row by row and `lo ≤ x ≤ hi`.
//! Entering columns follow Bland's rule; the ratio test prefers large pivots,
//! since multiplier-search rows are nearly rank deficient.

use thiserror::Error;

/// Pivot elements smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-9;
/// Phase-1 objective above this value means infeasible.
pub const PHASE1_TOL: f64 = 1e-8;
/// Right-hand side slack of the ratio test.
const RATIO_SLACK: f64 = 1e-12;
/// Allowed row violation of a returned solution.
pub const ROW_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite problem data")]
    NonFinite,
    #[error("variable {index} has empty or unbounded-below bounds [{lo}, {hi}]")]
    Bounds { index: usize, lo: f64, hi: f64 },
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("solution violates the constraints by {0:e}")]
    Numerical(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Geq,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<f64>),
    /// Minimum total infeasibility reached by phase 1.
    Infeasible { phase1: f64 },
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible(_))
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; the last row is the objective,
    /// the last column the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let pv = self.at(pr, pc);
        for c in 0..w {
            self.t[pr * w + c] /= pv;
        }
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.t[r * w + pc];
            if factor != 0.0 {
                let row = &mut self.t[r * w..(r + 1) * w];
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= factor * p;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Minimizes the objective row over columns in `allowed`. Returns the pivot count.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool, limit: usize) -> Result<usize, LpError> {
        let mut pivots = 0;
        loop {
            // Bland: lowest-index column with negative reduced cost.
            let obj = self.rows;
            let Some(pc) = (0..self.cols).find(|&c| allowed(c) && self.at(obj, c) < -PIVOT_TOL) else {
                return Ok(pivots);
            };
            // Two-pass ratio test: among rows within a small tolerance of the
            // minimum ratio, pivot on the largest element.
            let mut min_ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    min_ratio = min_ratio.min((self.at(r, self.cols) + RATIO_SLACK) / a);
                }
            }
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL && self.at(r, self.cols) / a <= min_ratio {
                    let better = match best {
                        None => true,
                        Some((ba, brow)) => a > ba || (a == ba && self.basis[r] < self.basis[brow]),
                    };
                    if better {
                        best = Some((a, r));
                    }
                }
            }
            let Some((_, pr)) = best else {
                // Unbounded direction; cannot happen in phase 1 and the
                // feasibility problem has no phase-2 objective.
                return Ok(pivots);
            };
            self.pivot(pr, pc);
            pivots += 1;
            if pivots > limit {
                return Err(LpError::IterationLimit(limit));
            }
        }
    }
}

/// Solves the feasibility problem `a x (sense) b`, `bounds.0 ≤ x ≤ bounds.1`.
///
/// Lower bounds must be finite; upper bounds may be `+∞`.
pub fn lp_feasible(
    a: &[Vec<f64>],
    b: &[f64],
    sense: &[Sense],
    bounds: &[(f64, f64)],
) -> Result<LpOutcome, LpError> {
    let m = a.len();
    let n = bounds.len();
    if b.len() != m || sense.len() != m {
        return Err(LpError::Dimension(format!(
            "{m} rows but {} right-hand sides and {} senses",
            b.len(),
            sense.len()
        )));
    }
    if let Some((i, row)) = a.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(LpError::Dimension(format!("row {i} has {} entries, expected {n}", row.len())));
    }
    if a.iter().flatten().chain(b).any(|x| !x.is_finite()) {
        return Err(LpError::NonFinite);
    }
    for (index, &(lo, hi)) in bounds.iter().enumerate() {
        if !lo.is_finite() || hi.is_nan() || hi < lo {
            return Err(LpError::Bounds { index, lo, hi });
        }
    }

    // Shift x = lo + y with y ≥ 0. Rows: structural constraints, then y_j ≤ hi_j - lo_j.
    struct Row {
        coef: Vec<(usize, f64)>,
        rhs: f64,
        sense: Sense,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(m + n);
    for i in 0..m {
        let shift: f64 = a[i].iter().zip(bounds).map(|(aij, (lo, _))| aij * lo).sum();
        // Unit max-norm rows keep pivot tolerances meaningful.
        let scale = a[i].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        rows.push(Row {
            coef: a[i]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, v / scale))
                .collect(),
            rhs: (b[i] - shift) / scale,
            sense: sense[i],
        });
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if hi.is_finite() {
            // y_j ≤ hi - lo  as  -y_j ≥ lo - hi.
            rows.push(Row {
                coef: vec![(j, -1.0)],
                rhs: lo - hi,
                sense: Sense::Geq,
            });
        }
    }

    // Columns: y (n), one surplus per ≥ row, artificials where needed.
    let nrows = rows.len();
    let n_surplus = rows.iter().filter(|r| r.sense == Sense::Geq).count();
    let mut needs_art = Vec::with_capacity(nrows);
    for r in &rows {
        // A ≥ row with rhs ≤ 0 flipped becomes  -a y + s = -rhs ≥ 0, s basic.
        needs_art.push(!(r.sense == Sense::Geq && r.rhs <= 0.0));
    }
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let cols = n + n_surplus + n_art;
    let w = cols + 1;
    let mut tab = Tableau {
        rows: nrows,
        cols,
        t: vec![0.0; (nrows + 1) * w],
        basis: vec![0; nrows],
    };
    let mut surplus_col = n;
    let mut art_col = n + n_surplus;
    for (i, r) in rows.iter().enumerate() {
        let base = i * w;
        // Row in the form  a y - s = rhs (≥) or a y = rhs (=).
        let mut coef = vec![0.0; cols];
        for &(j, v) in &r.coef {
            coef[j] = v;
        }
        let mut rhs = r.rhs;
        let mut s_col = None;
        if r.sense == Sense::Geq {
            coef[surplus_col] = -1.0;
            s_col = Some(surplus_col);
            surplus_col += 1;
        }
        if rhs < 0.0 || (!needs_art[i] && rhs <= 0.0) {
            coef.iter_mut().for_each(|x| *x = -*x);
            rhs = -rhs;
        }
        if needs_art[i] {
            coef[art_col] = 1.0;
            tab.basis[i] = art_col;
            art_col += 1;
        } else {
            tab.basis[i] = s_col.expect("slack-basic rows are inequalities");
        }
        tab.t[base..base + cols].copy_from_slice(&coef);
        tab.t[base + cols] = rhs;
    }
    // Phase-1 objective: minimize the sum of artificials, expressed in nonbasic columns.
    let obj = nrows * w;
    for i in 0..nrows {
        if tab.basis[i] >= n + n_surplus {
            for c in 0..w {
                tab.t[obj + c] -= tab.t[i * w + c];
            }
        }
    }
    for i in 0..nrows {
        let bc = tab.basis[i];
        tab.t[obj + bc] = 0.0;
    }

    let limit = 50 * (cols + nrows) + 1000;
    tab.optimize(&|_| true, limit)?;
    let phase1 = -tab.t[obj + cols];
    if phase1 > PHASE1_TOL {
        return Ok(LpOutcome::Infeasible { phase1 });
    }

    let mut y = vec![0.0; n];
    for (i, &bc) in tab.basis.iter().enumerate() {
        if bc < n {
            y[bc] = tab.at(i, cols).max(0.0);
        }
    }
    let x: Vec<f64> = y.iter().zip(bounds).map(|(yj, (lo, hi))| (lo + yj).min(*hi)).collect();
    let v = max_violation(a, b, sense, bounds, &x);
    if v > ROW_TOL {
        return Err(LpError::Numerical(v));
    }
    Ok(LpOutcome::Feasible(x))
}

/// Largest violation of `a x (sense) b` and of the bounds.
pub fn max_violation(a: &[Vec<f64>], b: &[f64], sense: &[Sense], bounds: &[(f64, f64)], x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for ((row, bi), s) in a.iter().zip(b).zip(sense) {
        let ax: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
        let v = match s {
            Sense::Geq => bi - ax,
            Sense::Eq => (ax - bi).abs(),
        };
        worst = worst.max(v);
    }
    for (xj, (lo, hi)) in x.iter().zip(bounds) {
        worst = worst.max(lo - xj).max(xj - hi);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREE: (f64, f64) = (-1e6, f64::INFINITY);

    #[test]
    fn equality_and_inequality() {
        let out = lp_feasible(&[vec![1.0], vec![1.0]], &[1.0, 2.0], &[Sense::Geq, Sense::Eq], &[FREE]).unwrap();
        match out {
            LpOutcome::Feasible(x) => assert!((x[0] - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictory_rows() {
        let out = lp_feasible(&[vec![1.0], vec![-1.0]], &[1.0, 0.0], &[Sense::Geq, Sense::Geq], &[FREE]).unwrap();
        assert!(matches!(out, LpOutcome::Infeasible { phase1 } if phase1 > PHASE1_TOL));
    }

    #[test]
    fn respects_bounds() {
        // x + y ≥ 3 with x ≤ 1, y ≤ 1 is infeasible; with y ≤ 2 it is feasible.
        let a = [vec![1.0, 1.0]];
        let out = lp_feasible(&a, &[3.0], &[Sense::Geq], &[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert!(!out.is_feasible());
        let bounds = [(0.0, 1.0), (0.5, 2.0)];
        let LpOutcome::Feasible(x) = lp_feasible(&a, &[3.0], &[Sense::Geq], &bounds).unwrap() else {
            panic!("feasible expected")
        };
        assert!(max_violation(&a, &[3.0], &[Sense::Geq], &bounds, &x) <= ROW_TOL);
    }

    #[test]
    fn fixed_variable_and_normalization() {
        let a = [vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]];
        let b = [1.0, 0.25];
        let s = [Sense::Eq, Sense::Geq];
        let bounds = [(1e-6, f64::INFINITY), (1e-6, f64::INFINITY), (0.0, 0.0)];
        let LpOutcome::Feasible(x) = lp_feasible(&a, &b, &s, &bounds).unwrap() else {
            panic!("feasible expected")
        };
        assert_eq!(x[2], 0.0);
        assert!(max_violation(&a, &b, &s, &bounds, &x) <= ROW_TOL);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            lp_feasible(&[vec![1.0, 2.0]], &[1.0], &[Sense::Geq], &[FREE]),
            Err(LpError::Dimension(_))
        ));
        assert!(matches!(
            lp_feasible(&[vec![1.0]], &[1.0, 2.0], &[Sense::Geq], &[FREE]),
            Err(LpError::Dimension(_))
        ));
        assert!(matches!(
            lp_feasible(&[vec![1.0]], &[1.0], &[Sense::Geq], &[(1.0, 0.0)]),
            Err(LpError::Bounds { .. })
        ));
    }

    #[test]
    fn many_degenerate_rows() {
        // 200 copies of x - y ≥ 0 and x + y = 1: feasible, degenerate at the start.
        let mut a = vec![vec![1.0, 1.0]];
        let mut b = vec![1.0];
        let mut s = vec![Sense::Eq];
        for k in 0..200 {
            let e = k as f64 * 1e-3;
            a.push(vec![1.0 + e, -1.0]);
            b.push(0.0);
            s.push(Sense::Geq);
        }
        let bounds = [(0.0, f64::INFINITY); 2];
        let LpOutcome::Feasible(x) = lp_feasible(&a, &b, &s, &bounds).unwrap() else {
            panic!("feasible expected")
        };
        assert!(max_violation(&a, &b, &s, &bounds, &x) <= ROW_TOL);
    }
}
