//! The linear-size ball index: registered cells, per-cell lists of large
//! intersecting balls, a quadtree over the centers, and the approximate
//! counters built on top of them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{cells_at_level, grid_level, Ball, NormalizedInstance, Region};
use crate::math::{self, sqrt};
use crate::quadtree::{CompressedQuadtree, NodeId, RangeHits};

#[derive(Clone, Debug)]
pub struct Registry {
    instance: NormalizedInstance,
    ball_tree: CompressedQuadtree,
    registered: Vec<Vec<usize>>,
    assoc: Vec<Vec<usize>>,
    /// Largest diameter among balls registered in each subtree.
    subtree_diam: Vec<f64>,
    centers: CompressedQuadtree,
}

/// Largest exponent tried when bracketing the k-th center distance.
const CENTER_STEPS: i32 = 100;
const CENTER_RATIO: f64 = 1.5;

impl Registry {
    /// Builds the index. Disjointness is assumed, not checked.
    pub fn build(instance: NormalizedInstance) -> Result<Self> {
        let dim = instance.dim;
        let balls = &instance.balls;
        let mut cells_of = Vec::with_capacity(balls.len());
        for (i, b) in balls.iter().enumerate() {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: b.dim() });
            }
            if b.center.iter().any(|&c| !(0.0..1.0).contains(&c)) {
                return Err(Error::OutsideUnitCube);
            }
            let region = Region::ball(&b.center, b.radius);
            let cells = cells_at_level(&region, grid_level(&region, 1.0), 0.0);
            if cells.is_empty() {
                return Err(Error::Internal(format!("ball {i} has an empty grid approximation")));
            }
            cells_of.push(cells);
        }
        let ball_tree =
            CompressedQuadtree::build_from_cubes(dim, cells_of.iter().flatten().cloned())?;
        let mut registered = vec![Vec::new(); ball_tree.len()];
        for (i, cells) in cells_of.iter().enumerate() {
            for c in cells {
                let id = ball_tree.find(c).expect("registered cell is a node");
                registered[id].push(i);
            }
        }
        let mut assoc: Vec<Vec<usize>> = vec![Vec::new(); ball_tree.len()];
        for id in 0..ball_tree.len() {
            let cube = ball_tree.cube(id);
            let mut list = registered[id].clone();
            if let Some(p) = ball_tree.node(id).parent {
                for &b in &assoc[p] {
                    let ball = &balls[b];
                    if Region::ball(&ball.center, ball.radius).intersects_cube(cube)
                        && !list.contains(&b)
                    {
                        list.push(b);
                    }
                }
            }
            list.sort_unstable();
            assoc[id] = list;
        }
        let mut subtree_diam = vec![0.0f64; ball_tree.len()];
        // preorder: children come after their parent
        for id in (0..ball_tree.len()).rev() {
            let own = registered[id].iter().map(|&b| balls[b].diameter()).fold(0.0, f64::max);
            let below = ball_tree.node(id).children.iter().map(|&c| subtree_diam[c]).fold(0.0, f64::max);
            subtree_diam[id] = own.max(below);
        }
        let points: Vec<Vec<f64>> = balls.iter().map(|b| b.center.clone()).collect();
        let radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
        let centers = CompressedQuadtree::build_from_points_with_priority(&points, &radii)?;
        Ok(Registry { instance, ball_tree, registered, assoc, subtree_diam, centers })
    }

    /// Builds the index after an `O(n^2)` pairwise disjointness check.
    pub fn build_checked(instance: NormalizedInstance) -> Result<Self> {
        if let Some((i, j)) = crate::oracle::check_disjoint(&instance.balls) {
            return Err(Error::OverlappingBalls(i, j));
        }
        Self::build(instance)
    }

    pub fn instance(&self) -> &NormalizedInstance {
        &self.instance
    }

    pub fn balls(&self) -> &[Ball] {
        &self.instance.balls
    }

    pub fn ball(&self, id: usize) -> &Ball {
        &self.instance.balls[id]
    }

    pub fn len(&self) -> usize {
        self.instance.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance.balls.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instance.dim
    }

    pub fn c_d(&self) -> usize {
        self.instance.c_d
    }

    pub fn ball_tree(&self) -> &CompressedQuadtree {
        &self.ball_tree
    }

    pub fn centers_tree(&self) -> &CompressedQuadtree {
        &self.centers
    }

    pub fn registered(&self, node: NodeId) -> &[usize] {
        &self.registered[node]
    }

    /// Balls intersecting the node's cube whose diameter is at least the
    /// cube's diameter.
    pub fn associated(&self, node: NodeId) -> &[usize] {
        &self.assoc[node]
    }

    pub(crate) fn check_rank(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::RankOutOfRange { k, n: self.len() });
        }
        Ok(())
    }

    pub(crate) fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: q.len() });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Exactly the balls meeting `region` whose diameter is at least
    /// `delta * diam(region)`, sorted by id.
    pub fn large_balls_intersecting(&self, region: &Region, delta: f64) -> Vec<usize> {
        let threshold = delta * region.diameter();
        let large = |b: usize| self.instance.balls[b].diameter() >= threshold;
        // A large ball meeting the region at p is registered at some cell
        // containing p, and listed at every node below that cell containing p.
        // So it suffices to follow nodes touching the region whose subtree
        // registers some large ball.
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.ball_tree.root()];
        while let Some(u) = stack.pop() {
            let node = self.ball_tree.node(u);
            if !region.touches_cube(&node.cube) {
                continue;
            }
            seen.extend(self.assoc[u].iter().copied().filter(|&b| large(b)));
            stack.extend(node.children.iter().copied().filter(|&c| self.subtree_diam[c] >= threshold));
        }
        seen.into_iter().filter(|&b| region.intersects_ball(&self.instance.balls[b])).collect()
    }

    /// Centers counted by an approximate range query: every center within `x`
    /// of `q` and none farther than `(1 + delta) x`.
    pub fn approx_center_range(&self, q: &[f64], x: f64, delta: f64) -> Result<RangeHits> {
        self.check_point(q)?;
        if !(x >= 0.0) || !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("x = {x}, delta = {delta}")));
        }
        Ok(self.centers.range_hits(q, x, delta / 2.0))
    }

    /// A value `x` with `d_C(q, k) <= x <= 2 d_C(q, k)` where `d_C` is the
    /// k-th smallest distance from `q` to a ball center.
    pub fn approx_kth_center_distance(&self, q: &[f64], k: usize) -> Result<f64> {
        self.check_point(q)?;
        self.check_rank(k)?;
        // Counts here satisfy C(r) <= count <= C(1.25 r).
        let count = |r: f64| self.centers.range_hits(q, r, 0.125).total;
        if count(0.0) >= k {
            return Ok(0.0);
        }
        // Every center lies in the unit cube.
        let far = sqrt(
            q.iter()
                .map(|&x| {
                    let m = math::abs(x).max(math::abs(1.0 - x));
                    m * m
                })
                .sum(),
        );
        let radius = |j: i32| far * libm::pow(CENTER_RATIO, -(j as f64));
        let (mut lo, mut hi) = (0, CENTER_STEPS);
        if count(radius(hi)) >= k {
            let mut d: Vec<f64> = self.instance.balls.iter().map(|b| math::dist(q, &b.center)).collect();
            d.sort_by(f64::total_cmp);
            return Ok(d[k - 1]);
        }
        // Invariant: count(radius(lo)) >= k > count(radius(hi)).
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if count(radius(mid)) >= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // d_C > radius(hi) = radius(lo) / 1.5, and d_C <= 1.25 radius(lo).
        Ok(1.25 * radius(lo))
    }

    /// `N_hat(x)`: an estimate of the number of balls meeting `ball(q, x)`
    /// with `N(x) <= N_hat <= N((1 + delta) x)`. For `x = 0` this is the
    /// exact number of balls containing `q`.
    pub fn approx_ball_count(&self, q: &[f64], delta: f64, x: f64) -> Result<usize> {
        self.check_point(q)?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1]")));
        }
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::InvalidParameter(format!("x = {x}")));
        }
        if x == 0.0 {
            return Ok(self.large_balls_intersecting(&Region::ball(q, 0.0), 1.0).len());
        }
        let large = self.large_balls_intersecting(&Region::ball(q, x), delta / 4.0);
        let hits = self.centers.range_hits(q, x * (1.0 + delta / 4.0), delta / 8.0);
        let counted = self.large_centers_counted(&hits, &large, q, x * (1.0 + delta / 4.0));
        Ok(hits.total + large.len() - counted)
    }

    /// How many of `large` have their center among the points counted by
    /// `hits` (a range query of the given radius around `q`).
    pub(crate) fn large_centers_counted(
        &self,
        hits: &RangeHits,
        large: &[usize],
        q: &[f64],
        radius: f64,
    ) -> usize {
        let mut whole = BTreeSet::new();
        let mut partial = BTreeSet::new();
        for h in &hits.hits {
            if h.whole {
                whole.insert(h.node);
            } else {
                partial.insert(h.node);
            }
        }
        large
            .iter()
            .filter(|&&b| {
                let leaf = self.centers.leaf_of_point(b).expect("centers tree stores points");
                if partial.contains(&leaf) && math::dist(&self.instance.balls[b].center, q) <= radius {
                    return true;
                }
                let mut u = Some(leaf);
                while let Some(id) = u {
                    if whole.contains(&id) {
                        return true;
                    }
                    u = self.centers.node(id).parent;
                }
                false
            })
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_balls() -> Registry {
        let balls = [0.2, 0.5, 0.8].iter().map(|&c| Ball::new(vec![c], 0.05).unwrap()).collect();
        Registry::build(NormalizedInstance::from_unit_balls(balls, 3).unwrap()).unwrap()
    }

    pub(crate) fn random_registry(seed: u64, dim: usize, n: usize) -> Registry {
        let balls = crate::testutil::random_disjoint_balls(seed, dim, n, 0.02);
        Registry::build_checked(NormalizedInstance::from_unit_balls(balls, 3usize.pow(dim as u32)).unwrap()).unwrap()
    }

    #[test]
    fn single_ball() {
        let reg = Registry::build(
            NormalizedInstance::from_unit_balls(vec![Ball::new(vec![0.5, 0.5], 0.1).unwrap()], 9).unwrap(),
        )
        .unwrap();
        assert_eq!(reg.large_balls_intersecting(&Region::ball(&[0.1, 0.1], 0.5), 0.1), vec![0]);
        assert_eq!(reg.approx_ball_count(&[0.1, 0.1], 0.5, 0.5).unwrap(), 1);
        assert_eq!(reg.approx_kth_center_distance(&[0.5, 0.5], 1).unwrap(), 0.0);
    }

    #[test]
    fn three_intervals_structure() {
        let reg = three_balls();
        for i in 0..3 {
            let region = Region::ball(&reg.ball(i).center, 0.05);
            for c in crate::geom::grid_approx(&region, 1.0).unwrap() {
                let id = reg.ball_tree().find(&c).unwrap();
                assert!(reg.registered(id).contains(&i));
            }
        }
        for id in 0..reg.ball_tree().len() {
            assert!(reg.associated(id).len() <= 3);
        }
    }

    #[test]
    fn three_intervals_counts() {
        let reg = three_balls();
        assert_eq!(reg.approx_ball_count(&[0.5], 0.1, 0.3).unwrap(), 3);
        assert_eq!(reg.approx_ball_count(&[0.5], 0.1, 0.2).unwrap(), 1);
        assert_eq!(reg.approx_center_range(&[0.5], 0.25, 0.1).unwrap().total, 1);
        let x = reg.approx_kth_center_distance(&[0.5], 2).unwrap();
        assert!((0.3..=0.6).contains(&x), "{x}");
    }

    #[test]
    fn large_ball_among_small_ones() {
        let mut balls = vec![Ball::new(vec![0.5], 0.3).unwrap()];
        for c in [0.05, 0.1, 0.9, 0.95] {
            balls.push(Ball::new(vec![c], 0.01).unwrap());
        }
        let reg = Registry::build_checked(NormalizedInstance::from_unit_balls(balls, 3).unwrap()).unwrap();
        let got = reg.large_balls_intersecting(&Region::Cube { lower: vec![0.45], side: 0.1 }, 0.5);
        assert_eq!(got, vec![0]);
        let none = reg.large_balls_intersecting(&Region::Cube { lower: vec![0.0], side: 0.04 }, 0.9);
        assert!(none.is_empty());
    }

    #[test]
    fn associated_lists_are_sound_and_small() {
        let reg = random_registry(7, 2, 200);
        let mut total = 0;
        for id in 0..reg.ball_tree().len() {
            let cube = reg.ball_tree().cube(id);
            assert!(reg.associated(id).len() <= 9);
            total += reg.registered(id).len();
            for &b in reg.associated(id) {
                let ball = reg.ball(b);
                assert!(Region::ball(&ball.center, ball.radius).intersects_cube(cube));
                assert!(ball.diameter() >= cube.diameter());
            }
        }
        assert!(total <= 16 * 200);
    }

    #[test]
    fn large_balls_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in 1..=3 {
            let reg = random_registry(dim as u64, dim, 200);
            for _ in 0..100 {
                let c: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                let region = if rng.gen_bool(0.5) {
                    Region::ball(&c, rng.gen_range(0.0..0.3))
                } else {
                    Region::Cube { lower: c, side: rng.gen_range(0.001..0.3) }
                };
                let delta = rng.gen_range(0.01..1.0);
                let want: Vec<usize> = (0..reg.len())
                    .filter(|&b| {
                        let ball = reg.ball(b);
                        ball.diameter() >= delta * region.diameter() && region.intersects_ball(ball)
                    })
                    .collect();
                assert_eq!(reg.large_balls_intersecting(&region, delta), want);
            }
        }
    }

    #[test]
    fn kth_center_distance_two_sided() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in 1..=2 {
            let reg = random_registry(10 + dim as u64, dim, 200);
            let centers: Vec<Vec<f64>> = reg.balls().iter().map(|b| b.center.clone()).collect();
            for _ in 0..100 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                let k = rng.gen_range(1..=200);
                let exact = oracle::exact_kth_center_distance(&centers, &q, k).unwrap();
                let x = reg.approx_kth_center_distance(&q, k).unwrap();
                assert!(exact <= x && x <= 2.0 * exact, "{exact} {x}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ball_count_sandwich(seed in 0u64..1000, dim in 1usize..=3, delta in 0.05f64..=1.0) {
            let reg = random_registry(seed, dim, 80);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            for _ in 0..20 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                let x = rng.gen_range(0.0..0.5);
                let got = reg.approx_ball_count(&q, delta, x).unwrap();
                let (lo, _) = oracle::exact_counts(reg.balls(), &q, x);
                let (hi, _) = oracle::exact_counts(reg.balls(), &q, x * (1.0 + delta));
                prop_assert!(lo <= got && got <= hi, "{} <= {} <= {}", lo, got, hi);
            }
        }

        #[test]
        fn center_range_sandwich(seed in 0u64..1000, x in 0.0f64..0.7, delta in 0.05f64..=1.0) {
            let reg = random_registry(seed, 2, 100);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = [rng.gen::<f64>(), rng.gen::<f64>()];
            let got = reg.approx_center_range(&q, x, delta).unwrap().total;
            let (_, lo) = oracle::exact_counts(reg.balls(), &q, x);
            let (_, hi) = oracle::exact_counts(reg.balls(), &q, x * (1.0 + delta));
            prop_assert!(lo <= got && got <= hi);
        }
    }
}
