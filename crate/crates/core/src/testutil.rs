//! Seeded random instances for unit tests.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::Ball;
use crate::math;

/// `n` pairwise disjoint balls with centers in `[0.05, 0.95)^d` and radii in
/// `[0, max_radius)`, shrinking the radius range when placement stalls.
pub(crate) fn random_disjoint_balls(seed: u64, dim: usize, n: usize, max_radius: f64) -> Vec<Ball> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut balls: Vec<Ball> = Vec::with_capacity(n);
    let mut cap = max_radius;
    let mut misses = 0;
    while balls.len() < n {
        let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..0.95)).collect();
        let r = rng.gen_range(0.0..cap);
        if balls.iter().all(|b| math::dist(&b.center, &c) > b.radius + r) {
            balls.push(Ball { center: c, radius: r });
            misses = 0;
        } else {
            misses += 1;
            if misses > 200 {
                cap *= 0.5;
                misses = 0;
            }
        }
    }
    balls
}
