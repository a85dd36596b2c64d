//! Small dense square matrices and spectral functions of symmetric matrices.
//!
//! Everything here targets orders up to 8, so storage is a flat row-major
//! `Vec<f64>` and eigendecompositions use cyclic Jacobi rotations.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Largest absolute asymmetry tolerated before a matrix counts as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_OFF_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric (|m[{row}][{col}] - m[{col}][{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix function `{func}` needs positive eigenvalues, found {eigenvalue:e}")]
    NotPositive { func: &'static str, eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// A dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(LinalgError::Dimension { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    /// Builds a symmetric matrix from its upper triangle listed row by row.
    pub fn from_upper(entries: &[f64]) -> Result<Self, LinalgError> {
        let n = order_from_triangle_len(entries.len()).ok_or(LinalgError::Dimension {
            expected: 0,
            got: entries.len(),
        })?;
        let mut m = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = entries[k];
                m[(j, i)] = entries[k];
                k += 1;
            }
        }
        Ok(m)
    }

    /// Upper triangle row by row; inverse of [`Mat::from_upper`].
    pub fn upper(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for i in 0..self.n {
            for j in i..self.n {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| k * v).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|m_ij - m_ji|` together with its position.
    pub fn asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let gap = (self[(i, j)] - self[(j, i)]).abs();
                if gap > worst.2 {
                    worst = (i, j, gap);
                }
            }
        }
        worst
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n, "matmul order mismatch");
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    /// `self * mid * self`, symmetrized. Used for congruences with symmetric factors.
    pub fn sandwich(&self, mid: &Mat) -> Mat {
        self.matmul(mid).matmul(self).symmetrized()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &Mat {
    type Output = Mat;

    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        Mat { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Mat {
    type Output = Mat;

    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.n, rhs.n);
        Mat { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Mat {
    type Output = Mat;

    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sym[")?;
        for (k, v) in self.upper().iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Returns `n` when `len == n (n + 1) / 2` for some `n ≥ 1`.
pub fn order_from_triangle_len(len: usize) -> Option<usize> {
    (1..=64).find(|n| n * (n + 1) / 2 == len)
}

/// Eigendecomposition `S = V diag(λ) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Mat,
}

impl SymEig {
    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.vectors.order();
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix.
///
/// Stops once the off-diagonal Frobenius norm drops below `1e-12` relative to
/// the matrix norm, or after 50 sweeps.
pub fn sym_eig(s: &Mat) -> Result<SymEig, LinalgError> {
    if !s.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let (row, col, gap) = s.asymmetry();
    if gap > SYMMETRY_TOL * s.max_abs().max(1.0) {
        return Err(LinalgError::NotSymmetric { row, col, gap });
    }
    let n = s.order();
    let mut a = s.symmetrized();
    let mut v = Mat::identity(n);
    let scale = a.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_OFF_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEig { values, vectors })
}

/// Spectral functions available through [`mat_fn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatFn {
    Log,
    Exp,
    Pow(f64),
    Sqrt,
    InvSqrt,
}

impl MatFn {
    fn name(self) -> &'static str {
        match self {
            MatFn::Log => "log",
            MatFn::Exp => "exp",
            MatFn::Pow(_) => "pow",
            MatFn::Sqrt => "sqrt",
            MatFn::InvSqrt => "inv_sqrt",
        }
    }

    fn needs_positive(self) -> bool {
        !matches!(self, MatFn::Exp)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            MatFn::Log => x.ln(),
            MatFn::Exp => x.exp(),
            MatFn::Pow(t) => x.powf(t),
            MatFn::Sqrt => x.sqrt(),
            MatFn::InvSqrt => 1.0 / x.sqrt(),
        }
    }
}

/// Applies `f` to a symmetric matrix through its spectrum.
pub fn mat_fn(s: &Mat, f: MatFn) -> Result<Mat, LinalgError> {
    let eig = sym_eig(s)?;
    mat_fn_from_eig(&eig, f)
}

pub fn mat_fn_from_eig(eig: &SymEig, f: MatFn) -> Result<Mat, LinalgError> {
    if f.needs_positive() && eig.min_value() <= 0.0 {
        return Err(LinalgError::NotPositive { func: f.name(), eigenvalue: eig.min_value() });
    }
    Ok(eig.reconstruct_with(|x| f.apply(x)))
}

/// `ln det Q` for a positive definite `Q`, as the sum of log-eigenvalues.
pub fn ldet(q: &Mat) -> Result<f64, LinalgError> {
    let eig = sym_eig(q)?;
    if eig.min_value() <= 0.0 {
        return Err(LinalgError::NotPositive { func: "ldet", eigenvalue: eig.min_value() });
    }
    Ok(eig.values.iter().map(|l| l.ln()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_mat_close(a: &Mat, b: &Mat, tol: f64) {
        assert_eq!(a.order(), b.order());
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = tol);
        }
    }

    #[test]
    fn eig_of_diagonal() {
        let e = sym_eig(&Mat::diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_mat_close(&e.vectors, &Mat::identity(2), 0.0);
    }

    #[test]
    fn eig_matches_characteristic_polynomial() {
        // λ² - 4λ + 3 = 0
        let e = sym_eig(&Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_of_identity() {
        let e = sym_eig(&Mat::identity(5)).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn eig_reconstructs_and_is_orthonormal() {
        let s = Mat::from_upper(&[4.0, 1.0, -2.0, 0.5, 3.0, 0.25, 0.7, 2.0, -1.0, 5.0]).unwrap();
        let e = sym_eig(&s).unwrap();
        assert_mat_close(&e.reconstruct_with(|x| x), &s, 1e-10);
        let vtv = e.vectors.transpose().matmul(&e.vectors);
        assert_mat_close(&vtv, &Mat::identity(4), 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&m), Err(LinalgError::NotSymmetric { .. })));
    }

    #[test]
    fn spectral_functions() {
        assert_mat_close(&mat_fn(&Mat::identity(3), MatFn::Log).unwrap(), &Mat::zeros(3), 0.0);
        assert_mat_close(
            &mat_fn(&Mat::diag(&[4.0, 9.0]), MatFn::Sqrt).unwrap(),
            &Mat::diag(&[2.0, 3.0]),
            1e-15,
        );
        assert_mat_close(
            &mat_fn(&Mat::diag(&[4.0, 1.0]), MatFn::Pow(0.5)).unwrap(),
            &Mat::diag(&[2.0, 1.0]),
            1e-15,
        );
        assert_mat_close(
            &mat_fn(&Mat::diag(&[4.0, 0.25]), MatFn::InvSqrt).unwrap(),
            &Mat::diag(&[0.5, 2.0]),
            1e-15,
        );
        let neg = Mat::diag(&[1.0, -1.0]);
        assert!(matches!(mat_fn(&neg, MatFn::Log), Err(LinalgError::NotPositive { .. })));
        assert!(matches!(mat_fn(&neg, MatFn::Sqrt), Err(LinalgError::NotPositive { .. })));
        assert!(mat_fn(&neg, MatFn::Exp).is_ok());
    }

    #[test]
    fn log_determinant() {
        assert_eq!(ldet(&Mat::identity(2)).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(ldet(&Mat::diag(&[e, e])).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ldet(&Mat::diag(&[2.0, 0.5])).unwrap(), 0.0, epsilon = 1e-15);
        assert!(ldet(&Mat::diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn upper_triangle_layout() {
        let m = Mat::from_upper(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap());
        assert_eq!(m.upper(), vec![1.0, 2.0, 3.0]);
        assert!(Mat::from_upper(&[1.0, 2.0]).is_err());
        assert_eq!(order_from_triangle_len(6), Some(3));
    }
}
