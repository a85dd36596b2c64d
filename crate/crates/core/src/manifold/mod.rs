//! Geometry of the three Hadamard manifolds supported by the crate.
//!
//! - `Euclidean(n)`: flat `ℝⁿ`, `exp_p(w) = p + w`.
//! - `LogOrthant(n)`: the positive orthant with metric `g_ij(p) = δ_ij / (p_i p_j)`.
//!   Geodesics are `α ↦ (p_i e^{α w_i / p_i})`, so the coordinate-wise log turns
//!   it into a flat space.
//! - `SpdCone(n)`: symmetric positive definite matrices with the affine-invariant
//!   metric `Tr(P⁻¹ X P⁻¹ Y)` and geodesic `P^½ (P^-½ Q P^-½)^t P^½`. Exponential
//!   and logarithm maps follow from that geodesic:
//!   `exp_P(W) = P^½ expm(P^-½ W P^-½) P^½`, `log_P(Q) = P^½ logm(P^-½ Q P^-½) P^½`.
//!
//! Points and tangents share a carrier: a coordinate vector for the first two
//! kinds, a symmetric matrix for the cone.

pub mod linalg;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::expr::{self, FeatureEnv};
pub use linalg::{ldet, mat_fn, sym_eig, LinalgError, Mat, MatFn, SymEig};

/// Minimum coordinate accepted on the log-orthant.
pub const ORTHANT_MARGIN: f64 = 1e-12;
/// Minimum eigenvalue ratio `λ_min / λ_max` accepted on the SPD cone.
pub const PD_RATIO: f64 = 1e-10;
/// Largest supported SPD matrix order.
pub const MAX_SPD_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("manifold dimension must be at least 1")]
    ZeroDimension,
    #[error("SPD cone order {0} exceeds the supported maximum of 8")]
    OrderTooLarge(usize),
    #[error("point has shape {got} but the manifold expects {expected}")]
    Shape { expected: String, got: String },
    #[error("coordinate {index} = {value} is not in the positive orthant")]
    NotPositive { index: usize, value: f64 },
    #[error("matrix is not positive definite (eigenvalues in [{min:e}, {max:e}])")]
    NotPositiveDefinite { min: f64, max: f64 },
    #[error("point has non-finite coordinates")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("malformed point literal `{0}`")]
    Syntax(String),
    #[error("unknown manifold kind `{0}` (expected euclidean, log_orthant or spd)")]
    UnknownKind(String),
    #[error("coordinate box: {0}")]
    Box(String),
}

/// The supported manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Euclidean(usize),
    LogOrthant(usize),
    SpdCone(usize),
}

/// A manifold element: coordinate vector or symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Vector(Vec<f64>),
    Matrix(Mat),
}

/// A tangent vector, same carrier as [`Point`]. Matrix tangents are symmetric.
#[derive(Debug, Clone, PartialEq)]
pub enum Tangent {
    Vector(Vec<f64>),
    Matrix(Mat),
}

impl Tangent {
    pub fn scaled(&self, t: f64) -> Tangent {
        match self {
            Tangent::Vector(v) => Tangent::Vector(v.iter().map(|x| t * x).collect()),
            Tangent::Matrix(m) => Tangent::Matrix(m.scaled(t)),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Tangent::Vector(v) => v.iter().all(|&x| x == 0.0),
            Tangent::Matrix(m) => m.as_slice().iter().all(|&x| x == 0.0),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Vector(v) => write_tuple(f, v),
            Point::Matrix(m) => write!(f, "{m}"),
        }
    }
}

impl fmt::Display for Tangent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tangent::Vector(v) => write_tuple(f, v),
            Tangent::Matrix(m) => write!(f, "{m}"),
        }
    }
}

fn write_tuple(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    write!(f, "(")?;
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        match f.precision() {
            Some(p) => write!(f, "{x:.p$}")?,
            None => write!(f, "{x}")?,
        }
    }
    write!(f, ")")
}

impl FromStr for Point {
    type Err = GeometryError;

    /// Parses `(a, b, ...)` or `sym[a11, a12, ..., ann]`.
    ///
    /// Entries may be constant expressions such as `exp(2)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let syntax = || GeometryError::Syntax(s.to_string());
        let (body, is_matrix) = if let Some(rest) = t.strip_prefix("sym[") {
            (rest.strip_suffix(']').ok_or_else(syntax)?, true)
        } else if let Some(rest) = t.strip_prefix('(') {
            (rest.strip_suffix(')').ok_or_else(syntax)?, false)
        } else {
            return Err(syntax());
        };
        let values = split_top_level(body)
            .into_iter()
            .map(|item| expr::eval_constant(item).map_err(|_| syntax()))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.is_empty() {
            return Err(syntax());
        }
        if is_matrix {
            Ok(Point::Matrix(Mat::from_upper(&values).map_err(|_| syntax())?))
        } else {
            Ok(Point::Vector(values))
        }
    }
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !last.is_empty() || !out.is_empty() {
        out.push(last);
    }
    out
}

/// Per-coordinate sampling ranges `lo:hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordBox(Vec<(f64, f64)>);

impl CoordBox {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self, GeometryError> {
        if ranges.is_empty() {
            return Err(GeometryError::Box("at least one range is required".into()));
        }
        for (i, &(lo, hi)) in ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeometryError::Box(format!("range {} is not lo < hi: {lo}:{hi}", i + 1)));
            }
        }
        Ok(Self(ranges))
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Maps a point of the unit cube into the box.
    pub fn map_unit(&self, u: &[f64]) -> Vec<f64> {
        self.0.iter().zip(u).map(|(&(lo, hi), &t)| lo * (1.0 - t) + hi * t).collect()
    }
}

impl FromStr for CoordBox {
    type Err = GeometryError;

    /// Parses `lo1:hi1,lo2:hi2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeometryError::Box(format!("malformed box `{s}`"));
        let ranges = s
            .split(',')
            .map(|part| {
                let (lo, hi) = part.split_once(':').ok_or_else(bad)?;
                let lo = expr::eval_constant(lo.trim()).map_err(|_| bad())?;
                let hi = expr::eval_constant(hi.trim()).map_err(|_| bad())?;
                Ok((lo, hi))
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        CoordBox::new(ranges)
    }
}

impl fmt::Display for CoordBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{lo}:{hi}")?;
        }
        Ok(())
    }
}

impl FromStr for ManifoldKind {
    type Err = GeometryError;

    /// Parses `<kind> <n>`, e.g. `log_orthant 2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut it = s.split_whitespace();
        let kind = it.next().ok_or_else(|| GeometryError::UnknownKind(s.to_string()))?;
        let n: usize = it
            .next()
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| GeometryError::Syntax(s.to_string()))?;
        if it.next().is_some() {
            return Err(GeometryError::Syntax(s.to_string()));
        }
        let m = match kind {
            "euclidean" => ManifoldKind::Euclidean(n),
            "log_orthant" => ManifoldKind::LogOrthant(n),
            "spd" => ManifoldKind::SpdCone(n),
            other => return Err(GeometryError::UnknownKind(other.to_string())),
        };
        m.validate()?;
        Ok(m)
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldKind::Euclidean(n) => write!(f, "euclidean {n}"),
            ManifoldKind::LogOrthant(n) => write!(f, "log_orthant {n}"),
            ManifoldKind::SpdCone(n) => write!(f, "spd {n}"),
        }
    }
}

impl ManifoldKind {
    pub fn validate(&self) -> Result<(), GeometryError> {
        match *self {
            ManifoldKind::Euclidean(0) | ManifoldKind::LogOrthant(0) | ManifoldKind::SpdCone(0) => {
                Err(GeometryError::ZeroDimension)
            }
            ManifoldKind::SpdCone(n) if n > MAX_SPD_ORDER => Err(GeometryError::OrderTooLarge(n)),
            _ => Ok(()),
        }
    }

    /// The `n` in the kind's name.
    pub fn order(&self) -> usize {
        match *self {
            ManifoldKind::Euclidean(n) | ManifoldKind::LogOrthant(n) | ManifoldKind::SpdCone(n) => n,
        }
    }

    /// Intrinsic dimension; `n (n + 1) / 2` for the SPD cone.
    pub fn dim(&self) -> usize {
        match *self {
            ManifoldKind::Euclidean(n) | ManifoldKind::LogOrthant(n) => n,
            ManifoldKind::SpdCone(n) => n * (n + 1) / 2,
        }
    }

    /// Names of the scalar features that expressions on this manifold may use.
    pub fn feature_names(&self) -> Vec<String> {
        match *self {
            ManifoldKind::Euclidean(n) | ManifoldKind::LogOrthant(n) => {
                (1..=n).map(|i| format!("p{i}")).collect()
            }
            ManifoldKind::SpdCone(_) => vec!["ldet".to_string(), "tr".to_string()],
        }
    }

    /// Evaluates the feature environment at a point.
    pub fn features(&self, p: &Point) -> Result<FeatureEnv, GeometryError> {
        match (self, p) {
            (ManifoldKind::Euclidean(_) | ManifoldKind::LogOrthant(_), Point::Vector(v)) => {
                let mut env = FeatureEnv::with_capacity(v.len());
                for (i, &x) in v.iter().enumerate() {
                    env.set(format!("p{}", i + 1), x);
                }
                Ok(env)
            }
            (ManifoldKind::SpdCone(_), Point::Matrix(m)) => {
                let mut env = FeatureEnv::with_capacity(2);
                env.set("ldet", ldet(m)?);
                env.set("tr", m.trace());
                Ok(env)
            }
            _ => Err(self.shape_error(p)),
        }
    }

    fn shape_error(&self, p: &Point) -> GeometryError {
        let got = match p {
            Point::Vector(v) => format!("vector of length {}", v.len()),
            Point::Matrix(m) => format!("{0}x{0} matrix", m.order()),
        };
        let expected = match *self {
            ManifoldKind::SpdCone(n) => format!("{n}x{n} matrix"),
            _ => format!("vector of length {}", self.order()),
        };
        GeometryError::Shape { expected, got }
    }

    /// Checks that `p` lies on the manifold.
    pub fn check_point(&self, p: &Point) -> Result<(), GeometryError> {
        match (*self, p) {
            (ManifoldKind::Euclidean(n), Point::Vector(v)) if v.len() == n => {
                if v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(GeometryError::NonFinite)
                }
            }
            (ManifoldKind::LogOrthant(n), Point::Vector(v)) if v.len() == n => {
                for (i, &x) in v.iter().enumerate() {
                    if !x.is_finite() {
                        return Err(GeometryError::NonFinite);
                    }
                    if x <= ORTHANT_MARGIN {
                        return Err(GeometryError::NotPositive { index: i + 1, value: x });
                    }
                }
                Ok(())
            }
            (ManifoldKind::SpdCone(n), Point::Matrix(m)) if m.order() == n => {
                check_spd(m).map(|_| ())
            }
            _ => Err(self.shape_error(p)),
        }
    }

    fn check_tangent(&self, p: &Point, w: &Tangent) -> Result<(), GeometryError> {
        let ok = match (p, w) {
            (Point::Vector(a), Tangent::Vector(b)) => a.len() == b.len(),
            (Point::Matrix(a), Tangent::Matrix(b)) => a.order() == b.order(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::Shape {
                expected: "tangent matching the base point".into(),
                got: format!("{w}"),
            })
        }
    }

    /// Coordinates used by boxes and grids.
    ///
    /// Vectors use their entries. SPD matrices list the diagonal first, then the
    /// strict upper triangle row by row: `(m11, m22, m12)` for order 2.
    pub fn coord_dim(&self) -> usize {
        self.dim()
    }

    pub fn point_from_coords(&self, c: &[f64]) -> Result<Point, GeometryError> {
        if c.len() != self.coord_dim() {
            return Err(GeometryError::Box(format!(
                "expected {} coordinates, got {}",
                self.coord_dim(),
                c.len()
            )));
        }
        let p = match *self {
            ManifoldKind::Euclidean(_) | ManifoldKind::LogOrthant(_) => Point::Vector(c.to_vec()),
            ManifoldKind::SpdCone(n) => {
                let mut m = Mat::zeros(n);
                for i in 0..n {
                    m[(i, i)] = c[i];
                }
                let mut k = n;
                for i in 0..n {
                    for j in (i + 1)..n {
                        m[(i, j)] = c[k];
                        m[(j, i)] = c[k];
                        k += 1;
                    }
                }
                Point::Matrix(m)
            }
        };
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn coords_of(&self, p: &Point) -> Vec<f64> {
        match p {
            Point::Vector(v) => v.clone(),
            Point::Matrix(m) => {
                let n = m.order();
                let mut out: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
                for i in 0..n {
                    for j in (i + 1)..n {
                        out.push(m[(i, j)]);
                    }
                }
                out
            }
        }
    }

    pub fn zero_tangent(&self) -> Tangent {
        match *self {
            ManifoldKind::SpdCone(n) => Tangent::Matrix(Mat::zeros(n)),
            ManifoldKind::Euclidean(n) | ManifoldKind::LogOrthant(n) => Tangent::Vector(vec![0.0; n]),
        }
    }

    pub fn exp_map(&self, p: &Point, w: &Tangent) -> Result<Point, GeometryError> {
        self.check_point(p)?;
        self.check_tangent(p, w)?;
        let q = match (self, p, w) {
            (ManifoldKind::Euclidean(_), Point::Vector(p), Tangent::Vector(w)) => {
                Point::Vector(p.iter().zip(w).map(|(a, b)| a + b).collect())
            }
            (ManifoldKind::LogOrthant(_), Point::Vector(p), Tangent::Vector(w)) => {
                Point::Vector(p.iter().zip(w).map(|(a, b)| a * (b / a).exp()).collect())
            }
            (ManifoldKind::SpdCone(_), Point::Matrix(p), Tangent::Matrix(w)) => {
                let (half, inv_half) = spd_roots(p)?;
                let inner = inv_half.sandwich(&w.symmetrized());
                Point::Matrix(half.sandwich(&mat_fn(&inner, MatFn::Exp)?))
            }
            _ => unreachable!("shapes checked above"),
        };
        Ok(q)
    }

    pub fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent, GeometryError> {
        self.check_point(p)?;
        self.check_point(q)?;
        let w = match (self, p, q) {
            (ManifoldKind::Euclidean(_), Point::Vector(p), Point::Vector(q)) => {
                Tangent::Vector(q.iter().zip(p).map(|(b, a)| b - a).collect())
            }
            (ManifoldKind::LogOrthant(_), Point::Vector(p), Point::Vector(q)) => {
                Tangent::Vector(p.iter().zip(q).map(|(a, b)| a * (b / a).ln()).collect())
            }
            (ManifoldKind::SpdCone(_), Point::Matrix(p), Point::Matrix(q)) => {
                let (half, inv_half) = spd_roots(p)?;
                let inner = inv_half.sandwich(q);
                Tangent::Matrix(half.sandwich(&mat_fn(&inner, MatFn::Log)?))
            }
            _ => unreachable!("shapes checked above"),
        };
        Ok(w)
    }

    /// Point at parameter `t` on the geodesic from `p` (t = 0) to `q` (t = 1).
    pub fn geodesic(&self, p: &Point, q: &Point, t: f64) -> Result<Point, GeometryError> {
        self.check_point(p)?;
        self.check_point(q)?;
        let g = match (self, p, q) {
            (ManifoldKind::Euclidean(_), Point::Vector(p), Point::Vector(q)) => {
                Point::Vector(p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect())
            }
            (ManifoldKind::LogOrthant(_), Point::Vector(p), Point::Vector(q)) => {
                Point::Vector(p.iter().zip(q).map(|(a, b)| a * (t * (b / a).ln()).exp()).collect())
            }
            (ManifoldKind::SpdCone(_), Point::Matrix(p), Point::Matrix(q)) => {
                let (half, inv_half) = spd_roots(p)?;
                let inner = inv_half.sandwich(q);
                Point::Matrix(half.sandwich(&mat_fn(&inner, MatFn::Pow(t))?))
            }
            _ => unreachable!("shapes checked above"),
        };
        Ok(g)
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64, GeometryError> {
        self.check_point(p)?;
        self.check_point(q)?;
        let d = match (self, p, q) {
            (ManifoldKind::Euclidean(_), Point::Vector(p), Point::Vector(q)) => {
                p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            }
            (ManifoldKind::LogOrthant(_), Point::Vector(p), Point::Vector(q)) => {
                p.iter().zip(q).map(|(a, b)| (a / b).ln().powi(2)).sum::<f64>().sqrt()
            }
            (ManifoldKind::SpdCone(_), Point::Matrix(p), Point::Matrix(q)) => {
                let (_, inv_half) = spd_roots(p)?;
                let eig = sym_eig(&inv_half.sandwich(q))?;
                eig.values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
            }
            _ => unreachable!("shapes checked above"),
        };
        Ok(d)
    }

    /// Riemannian inner product of two tangents at `p`.
    pub fn inner(&self, p: &Point, u: &Tangent, v: &Tangent) -> Result<f64, GeometryError> {
        self.check_point(p)?;
        self.check_tangent(p, u)?;
        self.check_tangent(p, v)?;
        let val = match (self, p, u, v) {
            (ManifoldKind::Euclidean(_), _, Tangent::Vector(u), Tangent::Vector(v)) => {
                u.iter().zip(v).map(|(a, b)| a * b).sum()
            }
            (ManifoldKind::LogOrthant(_), Point::Vector(p), Tangent::Vector(u), Tangent::Vector(v)) => {
                p.iter().zip(u).zip(v).map(|((x, a), b)| a * b / (x * x)).sum()
            }
            (ManifoldKind::SpdCone(_), Point::Matrix(p), Tangent::Matrix(u), Tangent::Matrix(v)) => {
                let p_inv = mat_fn(p, MatFn::Pow(-1.0))?;
                p_inv.matmul(u).matmul(&p_inv).matmul(v).trace()
            }
            _ => unreachable!("shapes checked above"),
        };
        Ok(val)
    }

    /// `√inner(p, w, w)`.
    pub fn norm(&self, p: &Point, w: &Tangent) -> Result<f64, GeometryError> {
        Ok(self.inner(p, w, w)?.max(0.0).sqrt())
    }
}

/// Validates positive definiteness and returns the eigendecomposition.
fn check_spd(m: &Mat) -> Result<SymEig, GeometryError> {
    if !m.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let (row, col, gap) = m.asymmetry();
    if gap > linalg::SYMMETRY_TOL {
        return Err(LinalgError::NotSymmetric { row, col, gap }.into());
    }
    let eig = sym_eig(m)?;
    let (min, max) = (eig.min_value(), eig.max_value());
    if !(max > 0.0 && min > PD_RATIO * max) {
        return Err(GeometryError::NotPositiveDefinite { min, max });
    }
    Ok(eig)
}

/// `(P^½, P^-½)`.
fn spd_roots(p: &Mat) -> Result<(Mat, Mat), GeometryError> {
    let eig = sym_eig(p)?;
    Ok((
        linalg::mat_fn_from_eig(&eig, MatFn::Sqrt)?,
        linalg::mat_fn_from_eig(&eig, MatFn::InvSqrt)?,
    ))
}
