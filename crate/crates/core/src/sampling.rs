//! Seeded low-discrepancy sampling inside a coordinate box.
//!
//! Halton points with a Cranley-Patterson rotation drawn from a ChaCha stream,
//! so different seeds give different but equally well-spread point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifold::{CoordBox, ManifoldKind, Point};

const PRIMES: [u32; 36] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
];

/// Oversampling factor: how many raw candidates may be drawn per requested point.
pub const MAX_DRAWS_PER_POINT: usize = 50;

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// Shifted Halton sequence in `[0, 1)^dim`.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sampling supports at most {} dimensions", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Self { shift, next: 1 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.next;
        self.next += 1;
        Some(
            self.shift
                .iter()
                .zip(PRIMES)
                .map(|(s, b)| (radical_inverse(i, b) + s).fract())
                .collect(),
        )
    }
}

/// Draws manifold points from a box.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub manifold: ManifoldKind,
    pub bounds: CoordBox,
    pub seed: u64,
}

impl Sampler {
    pub fn new(manifold: ManifoldKind, bounds: CoordBox, seed: u64) -> Self {
        Self { manifold, bounds, seed }
    }

    /// Up to `count` valid points accepted by `keep`, in sequence order.
    ///
    /// At most `count * MAX_DRAWS_PER_POINT` raw candidates are examined, so a
    /// filter that rejects almost everything yields fewer points rather than
    /// looping forever.
    pub fn points(&self, count: usize, mut keep: impl FnMut(&Point) -> bool) -> Vec<Point> {
        let mut out = Vec::with_capacity(count);
        let halton = Halton::new(self.bounds.dim(), self.seed);
        for u in halton.take(count.saturating_mul(MAX_DRAWS_PER_POINT)) {
            if out.len() == count {
                break;
            }
            let coords = self.bounds.map_unit(&u);
            if let Ok(p) = self.manifold.point_from_coords(&coords) {
                if keep(&p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        let v: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn halton_is_seeded_and_in_unit_cube() {
        let a: Vec<_> = Halton::new(3, 7).take(50).collect();
        let b: Vec<_> = Halton::new(3, 7).take(50).collect();
        let c: Vec<_> = Halton::new(3, 8).take(50).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().flatten().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn sampler_respects_box_and_filter() {
        let bounds: CoordBox = "0.5:1.5,2:3".parse().unwrap();
        let s = Sampler::new(ManifoldKind::LogOrthant(2), bounds, 42);
        let pts = s.points(100, |p| matches!(p, Point::Vector(v) if v[0] < 1.0));
        assert_eq!(pts.len(), 100);
        for p in &pts {
            let Point::Vector(v) = p else { unreachable!() };
            assert!(v[0] >= 0.5 && v[0] < 1.0 && v[1] >= 2.0 && v[1] <= 3.0);
        }
        assert!(s.points(10, |_| false).is_empty());
    }

    #[test]
    fn spd_sampler_skips_indefinite_coordinates() {
        let bounds: CoordBox = "0.1:1,0.1:1,-1:1".parse().unwrap();
        let s = Sampler::new(ManifoldKind::SpdCone(2), bounds, 1);
        let pts = s.points(50, |_| true);
        assert_eq!(pts.len(), 50);
        for p in pts {
            ManifoldKind::SpdCone(2).check_point(&p).unwrap();
        }
    }
}
