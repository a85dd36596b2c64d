//! Interval-valued multiobjective optimization on Hadamard manifolds:
//! interval orders, manifold geometry, numeric directional derivatives,
//! KKT certificate verification and a brute-force Pareto oracle.

pub mod expr;
pub mod interval;
pub mod manifold;
pub mod calculus;
pub mod kkt;
pub mod oracle;
pub mod problem;
pub mod sampling;
