//! Brute-force references: exact k-th distances and counts, disjointness, and
//! certified minimizers for enclosing-ball style problems.
//!
//! The minimizers run a branch and bound over boxes using the fact that every
//! objective here is 1-Lipschitz in the center. They return a feasible value
//! together with the gap to the best certified lower bound.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geom::Ball;
use crate::math::{self, sqrt};

/// Default instance-size ceiling for the minimizers.
pub const DEFAULT_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sort,
    Selection,
    SlidingWindow,
    GridSearch,
}

/// `value` is attained (a feasible radius or an exact quantity); the true
/// optimum lies in `[value - resolution, value]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub value: f64,
    pub witness: Option<usize>,
    pub method: Method,
    pub resolution: f64,
}

impl OracleReport {
    pub fn lower_bound(&self) -> f64 {
        (self.value - self.resolution).max(0.0)
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::RankOutOfRange { k, n });
    }
    Ok(())
}

/// `d_B(q, k)` by sorting all distances; the witness is the k-th ball in
/// `(distance, id)` order.
pub fn exact_kth_distance(balls: &[Ball], q: &[f64], k: usize) -> Result<OracleReport> {
    check_k(k, balls.len())?;
    let mut d: Vec<(f64, usize)> = balls.iter().enumerate().map(|(i, b)| (b.distance(q), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (value, id) = d[k - 1];
    Ok(OracleReport { value, witness: Some(id), method: Method::Sort, resolution: 0.0 })
}

/// Same quantity through `select_nth_unstable`, kept separate as a cross-check.
pub fn exact_kth_distance_select(balls: &[Ball], q: &[f64], k: usize) -> Result<f64> {
    check_k(k, balls.len())?;
    let mut d: Vec<f64> = balls
        .iter()
        .map(|b| {
            let s: f64 = b.center.iter().zip(q).map(|(c, x)| (c - x) * (c - x)).sum();
            (sqrt(s) - b.radius).max(0.0)
        })
        .collect();
    let (_, v, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*v)
}

/// k-th smallest distance from `q` to the given points.
pub fn exact_kth_center_distance(centers: &[Vec<f64>], q: &[f64], k: usize) -> Result<f64> {
    check_k(k, centers.len())?;
    let mut d: Vec<f64> = centers.iter().map(|c| math::dist(c, q)).collect();
    d.sort_by(f64::total_cmp);
    Ok(d[k - 1])
}

/// `(N(x), C(x))`: balls meeting the closed ball `ball(q, x)` and centers
/// inside it.
pub fn exact_counts(balls: &[Ball], q: &[f64], x: f64) -> (usize, usize) {
    let mut n = 0;
    let mut c = 0;
    for b in balls {
        if b.distance(q) <= x {
            n += 1;
        }
        if math::dist(q, &b.center) <= x {
            c += 1;
        }
    }
    (n, c)
}

/// First pair `(i, j)` whose interiors overlap. Tangency is allowed; two
/// balls with the same center never are.
pub fn check_disjoint(balls: &[Ball]) -> Option<(usize, usize)> {
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let d = math::dist(&balls[i].center, &balls[j].center);
            if d < balls[i].radius + balls[j].radius || d == 0.0 {
                return Some((i, j));
            }
        }
    }
    None
}

#[derive(PartialEq)]
struct Cell {
    lower: f64,
    center: Vec<f64>,
    half: Vec<f64>,
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    // Max-heap on negated lower bound.
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower.total_cmp(&self.lower)
    }
}

/// Minimizes a 1-Lipschitz `f` over the box `[lo, hi]` until the feasible
/// value and the certified lower bound are within `tol`, or `max_evals`
/// evaluations are spent. Returns `(upper, lower, argmin)`.
pub fn minimize_lipschitz<F>(lo: &[f64], hi: &[f64], f: F, tol: f64, max_evals: usize) -> (f64, f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = lo.len();
    let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let radius = |h: &[f64]| sqrt(h.iter().map(|x| x * x).sum());
    let mut best = f(&center);
    let mut arg = center.clone();
    let mut evals = 1;
    let mut heap = BinaryHeap::new();
    heap.push(Cell { lower: best - radius(&half), center, half });
    while let Some(cell) = heap.pop() {
        if best - cell.lower <= tol || evals >= max_evals {
            let lower = cell.lower.min(best);
            return (best, lower.max(0.0), arg);
        }
        let half: Vec<f64> = cell.half.iter().map(|h| 0.5 * h).collect();
        let r = radius(&half);
        for mask in 0..1usize << dim {
            let c: Vec<f64> = (0..dim)
                .map(|i| cell.center[i] + if (mask >> i) & 1 == 1 { half[i] } else { -half[i] })
                .collect();
            let v = f(&c);
            evals += 1;
            if v < best {
                best = v;
                arg = c.clone();
            }
            if v - r < best - tol {
                heap.push(Cell { lower: v - r, center: c, half: half.clone() });
            }
        }
    }
    (best, best - tol.min(best), arg)
}

fn bbox(points: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let dim = points[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for i in 0..dim {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

fn spread(lo: &[f64], hi: &[f64]) -> f64 {
    lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max)
}

fn kth_smallest(mut v: Vec<f64>, k: usize) -> f64 {
    let (_, x, _) = v.select_nth_unstable_by(k - 1, f64::total_cmp);
    *x
}

const RELATIVE_TOL: f64 = 1e-6;
const MAX_EVALS: usize = 4_000_000;

/// Radius of the smallest ball containing at least `l` of the points.
/// Exact in one dimension; certified to `resolution` otherwise.
pub fn smallest_enclosing_ball_of_l_points(points: &[Vec<f64>], l: usize, cap: usize) -> Result<OracleReport> {
    check_k(l, points.len())?;
    if points.len() > cap {
        return Err(Error::OracleCap { n: points.len(), cap });
    }
    if l == 1 {
        return Ok(OracleReport { value: 0.0, witness: None, method: Method::SlidingWindow, resolution: 0.0 });
    }
    if points[0].len() == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let value = xs.windows(l).map(|w| 0.5 * (w[l - 1] - w[0])).fold(f64::INFINITY, f64::min);
        return Ok(OracleReport { value, witness: None, method: Method::SlidingWindow, resolution: 0.0 });
    }
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let (lo, hi) = bbox(&refs);
    let tol = RELATIVE_TOL * spread(&lo, &hi).max(f64::MIN_POSITIVE);
    let f = |c: &[f64]| kth_smallest(points.iter().map(|p| math::dist(p, c)).collect(), l);
    let (upper, lower, _) = minimize_lipschitz(&lo, &hi, f, tol, MAX_EVALS);
    Ok(OracleReport { value: upper, witness: None, method: Method::GridSearch, resolution: upper - lower })
}

/// Smallest radius of a ball that completely covers `l` of the balls in `ids`.
pub fn smallest_covering_radius_of_l_balls(balls: &[Ball], ids: &[usize], l: usize, cap: usize) -> Result<OracleReport> {
    check_k(l, ids.len())?;
    if ids.len() > cap {
        return Err(Error::OracleCap { n: ids.len(), cap });
    }
    let refs: Vec<&[f64]> = ids.iter().map(|&i| balls[i].center.as_slice()).collect();
    let (lo, hi) = bbox(&refs);
    let scale = spread(&lo, &hi) + ids.iter().map(|&i| balls[i].radius).fold(0.0, f64::max);
    let tol = RELATIVE_TOL * scale.max(f64::MIN_POSITIVE);
    let f = |c: &[f64]| {
        kth_smallest(ids.iter().map(|&i| math::dist(&balls[i].center, c) + balls[i].radius).collect(), l)
    };
    let (upper, lower, _) = minimize_lipschitz(&lo, &hi, f, tol, MAX_EVALS);
    Ok(OracleReport { value: upper, witness: None, method: Method::GridSearch, resolution: upper - lower })
}

/// Optimal radius of a ball that completely covers `l` balls of `remaining`
/// and meets at least `k` balls of the whole set. The certified lower bound is
/// `value - resolution`.
pub fn optimal_quorum_radius_bound(
    balls: &[Ball],
    remaining: &[usize],
    l: usize,
    k: usize,
    cap: usize,
) -> Result<OracleReport> {
    check_k(k, balls.len())?;
    check_k(l, remaining.len())?;
    if balls.len() > cap {
        return Err(Error::OracleCap { n: balls.len(), cap });
    }
    let refs: Vec<&[f64]> = balls.iter().map(|b| b.center.as_slice()).collect();
    let (lo, hi) = bbox(&refs);
    let scale = spread(&lo, &hi) + balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    let tol = RELATIVE_TOL * scale.max(f64::MIN_POSITIVE);
    let f = |c: &[f64]| {
        let cover = kth_smallest(
            remaining.iter().map(|&i| math::dist(&balls[i].center, c) + balls[i].radius).collect(),
            l,
        );
        let meet = kth_smallest(balls.iter().map(|b| b.distance(c)).collect(), k);
        cover.max(meet)
    };
    let (upper, lower, _) = minimize_lipschitz(&lo, &hi, f, tol, MAX_EVALS);
    if !(upper >= lower) {
        return Err(Error::Internal(format!("minimizer returned {lower} > {upper}")));
    }
    Ok(OracleReport { value: upper, witness: None, method: Method::GridSearch, resolution: upper - lower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_disjoint_balls;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three() -> Vec<Ball> {
        [0.2, 0.5, 0.8].iter().map(|&c| Ball::new(vec![c], 0.05).unwrap()).collect()
    }

    #[test]
    fn kth_distance_examples() {
        let b = three();
        let r = exact_kth_distance(&b, &[0.5], 3).unwrap();
        assert!((r.value - 0.25).abs() < 1e-15);
        assert_eq!(exact_kth_distance(&b, &[0.21], 1).unwrap().value, 0.0);
        assert!(exact_kth_distance(&b, &[0.5], 4).is_err());
    }

    #[test]
    fn sort_and_selection_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in 0..1000 {
            let dim = 1 + t % 3;
            let balls = random_disjoint_balls(t as u64, dim, 30, 0.05);
            let q: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
            let k = rng.gen_range(1..=30);
            let a = exact_kth_distance(&balls, &q, k).unwrap().value;
            let b = exact_kth_distance_select(&balls, &q, k).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn counts_examples() {
        let b = three();
        assert_eq!(exact_counts(&b, &[0.5], 0.0), (1, 1));
        assert_eq!(exact_counts(&b, &[0.52], 0.0), (1, 0));
        assert_eq!(exact_counts(&b, &[0.5], 2.0), (3, 3));
    }

    #[test]
    fn kth_distance_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let balls = random_disjoint_balls(9, 2, 40, 0.05);
        for _ in 0..200 {
            let q = [rng.gen::<f64>(), rng.gen::<f64>()];
            let mut prev = 0.0;
            for k in 1..=40 {
                let d = exact_kth_distance(&balls, &q, k).unwrap().value;
                assert!(d >= prev);
                prev = d;
                assert!(exact_counts(&balls, &q, d).0 >= k);
                if d > 0.0 {
                    assert!(exact_counts(&balls, &q, d * (1.0 - 1e-9)).0 < k);
                }
            }
        }
    }

    #[test]
    fn disjointness() {
        let tangent = [Ball::new(vec![0.25], 0.25).unwrap(), Ball::new(vec![0.75], 0.25).unwrap()];
        assert_eq!(check_disjoint(&tangent), None);
        let same = [Ball::point(vec![0.3, 0.3]), Ball::point(vec![0.3, 0.3])];
        assert_eq!(check_disjoint(&same), Some((0, 1)));
        let overlap = [Ball::new(vec![0.2], 0.2).unwrap(), Ball::new(vec![0.5], 0.2).unwrap()];
        assert_eq!(check_disjoint(&overlap), Some((0, 1)));
    }

    #[test]
    fn enclosing_ball_examples() {
        let pts: Vec<Vec<f64>> = [0.1, 0.2, 0.8, 0.9].iter().map(|&x| vec![x]).collect();
        let r = smallest_enclosing_ball_of_l_points(&pts, 2, DEFAULT_CAP).unwrap();
        assert!((r.value - 0.05).abs() < 1e-12);
        assert_eq!(smallest_enclosing_ball_of_l_points(&pts, 1, DEFAULT_CAP).unwrap().value, 0.0);
        let all = smallest_enclosing_ball_of_l_points(&pts, 4, DEFAULT_CAP).unwrap();
        assert!((all.value - 0.4).abs() < 1e-12);
        let many = vec![vec![0.5]; 65];
        assert!(matches!(
            smallest_enclosing_ball_of_l_points(&many, 2, DEFAULT_CAP),
            Err(Error::OracleCap { .. })
        ));
    }

    #[test]
    fn grid_search_matches_known_planar_optimum() {
        // Equilateral triangle of side 1: circumradius 1/sqrt(3).
        let h = sqrt(3.0) / 2.0;
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h], vec![5.0, 5.0]];
        let r = smallest_enclosing_ball_of_l_points(&pts, 3, DEFAULT_CAP).unwrap();
        let want = 1.0 / sqrt(3.0);
        assert!(r.lower_bound() <= want + 1e-12 && want <= r.value + 1e-12);
        assert!(r.resolution < 1e-4);
        // Two points: half their distance.
        let r = smallest_enclosing_ball_of_l_points(&pts, 2, DEFAULT_CAP).unwrap();
        assert!((r.value - 0.5).abs() < 1e-4);
    }

    #[test]
    fn quorum_bound_single_ball() {
        let b = [Ball::new(vec![0.5, 0.5], 0.1).unwrap()];
        let r = optimal_quorum_radius_bound(&b, &[0], 1, 1, DEFAULT_CAP).unwrap();
        assert!(r.lower_bound() <= 0.1 && r.value <= 0.1 + 1e-6);
    }

    #[test]
    fn covering_chain() {
        for seed in 0..40 {
            let dim = 1 + (seed % 2) as usize;
            let balls = random_disjoint_balls(seed, dim, 16, 0.06);
            let centers: Vec<Vec<f64>> = balls.iter().map(|b| b.center.clone()).collect();
            let ids: Vec<usize> = (0..balls.len()).collect();
            for l in 2..=6 {
                let rc = smallest_enclosing_ball_of_l_points(&centers, l, DEFAULT_CAP).unwrap();
                let rb = smallest_covering_radius_of_l_balls(&balls, &ids, l, DEFAULT_CAP).unwrap();
                assert!(rc.lower_bound() <= rb.value);
                assert!(rb.lower_bound() <= 3.0 * rc.value);
            }
        }
    }
}
