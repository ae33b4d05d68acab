//! Approximate k-th nearest ball queries on a [`Registry`]: a constant-factor
//! estimate of `d_k(q)` followed by a refinement to `(1 ± eps)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::Region;
use crate::math;
use crate::quadtree::NodeId;
use crate::registry::Registry;

/// Which case of the constant-factor search produced the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Zero,
    StepA,
    StepB,
    StepC,
}

/// An estimate `x` with `x / 4 <= d_k(q) <= 4 x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantFactor {
    pub estimate: f64,
    pub branch: Branch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KnnAnswer {
    pub ball_id: usize,
    /// Exact distance from the query to `ball_id`.
    pub distance: f64,
    /// An interval known to contain `d_k(q)`.
    pub certified_interval: (f64, f64),
    /// Set when the query fell outside the indexed domain and the ball is an
    /// arbitrary placeholder.
    pub out_of_domain: bool,
}

impl KnnAnswer {
    pub(crate) fn new(ball_id: usize, distance: f64, eps: f64) -> Self {
        KnnAnswer {
            ball_id,
            distance,
            certified_interval: (distance / (1.0 + eps), distance / (1.0 - eps)),
            out_of_domain: false,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} not in (0, 1)")));
    }
    Ok(())
}

/// Constant-factor estimate of `d_k(q)`.
pub fn constant_factor_kth(reg: &Registry, q: &[f64], k: usize) -> Result<ConstantFactor> {
    reg.check_point(q)?;
    reg.check_rank(k)?;
    let count = |x: f64| reg.approx_ball_count(q, 1.0, x);
    if count(0.0)? >= k {
        return Ok(ConstantFactor { estimate: 0.0, branch: Branch::Zero });
    }
    let gamma = k.min(reg.c_d());
    // radii[i] = r_{k-i}; r_0 is taken as 0.
    let mut radii = Vec::with_capacity(gamma + 1);
    for i in 0..=gamma {
        radii.push(if k - i == 0 { 0.0 } else { reg.approx_kth_center_distance(q, k - i)? });
    }
    let mut alpha = 0;
    for (i, &r) in radii.iter().enumerate() {
        if count(r)? >= k {
            alpha = i;
        }
    }
    if alpha == gamma {
        return Ok(ConstantFactor { estimate: radii[gamma], branch: Branch::StepA });
    }
    let r = radii[alpha];
    if count(r / 4.0)? < k {
        return Ok(ConstantFactor { estimate: r, branch: Branch::StepB });
    }
    let probe = Region::ball(q, r / 4.0);
    let mut candidates: Vec<f64> = reg
        .large_balls_intersecting(&probe, 1.0)
        .into_iter()
        .map(|b| reg.ball(b).distance(q))
        .collect();
    candidates.push(0.0);
    candidates.push(r / 4.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for z in candidates {
        if count(z)? >= k {
            return Ok(ConstantFactor { estimate: 2.0 * z, branch: Branch::StepC });
        }
    }
    Err(Error::Internal(format!("no feasible radius in the large-ball scan (k = {k})")))
}

/// Refines an estimate `x` with `x / 4 <= d_k(q) <= 4 x` to a ball whose
/// distance is within `(1 ± eps) d_k(q)`.
pub fn refine(reg: &Registry, q: &[f64], k: usize, x: f64, eps: f64) -> Result<KnnAnswer> {
    reg.check_point(q)?;
    reg.check_rank(k)?;
    check_eps(eps)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("x = {x}")));
    }
    if x == 0.0 {
        let containing = reg.large_balls_intersecting(&Region::ball(q, 0.0), 1.0);
        return match containing.get(k - 1) {
            Some(&b) => Ok(KnnAnswer::new(b, 0.0, eps)),
            None => Err(Error::Internal(format!(
                "estimate 0 but only {} balls contain the query (k = {k})",
                containing.len()
            ))),
        };
    }
    refine_core(reg, q, k, x, eps / 8.0, eps)
}

/// Like [`refine`], given a bracket `lo <= d_k(q) <= hi` with `lo > 0`. A
/// tight bracket allows a coarse internal resolution and a small search ball.
pub fn refine_bracketed(reg: &Registry, q: &[f64], k: usize, lo: f64, hi: f64, eps: f64) -> Result<KnnAnswer> {
    reg.check_point(q)?;
    reg.check_rank(k)?;
    check_eps(eps)?;
    if !(lo > 0.0 && lo <= hi) || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("bracket [{lo}, {hi}]")));
    }
    // additive error is at most e * (hi/4) * (1.5 + 0.5 e) <= 0.4 e hi <= eps lo
    let e = (eps * lo / hi).min(0.125);
    refine_core(reg, q, k, hi / 4.0, e, eps)
}

/// Scans `ball(q, 4x(1+e))` for the k-th nearest ball, assuming
/// `d_k(q) <= 4x`. The returned distance is within `e x (1.5 + 0.5 e)` of
/// `d_k(q)`; `eps` only labels the answer.
fn refine_core(reg: &Registry, q: &[f64], k: usize, x: f64, e: f64, eps: f64) -> Result<KnnAnswer> {
    let radius = 4.0 * x * (1.0 + e);
    let large = reg.large_balls_intersecting(&Region::ball(q, radius), e / (4.0 * (1.0 + e)));
    let hits = reg.centers_tree().range_cells(q, radius, e / 16.0);
    let centers = reg.centers_tree();

    // weight per counted node: its centers minus the large ones among them
    let mut weight: BTreeMap<NodeId, (usize, bool)> =
        hits.hits.iter().map(|h| (h.node, (h.count, h.whole))).collect();
    let is_large: BTreeSet<usize> = large.iter().copied().collect();
    for &b in &large {
        let leaf = centers.leaf_of_point(b).expect("centers tree stores points");
        let mut u = Some(leaf);
        while let Some(id) = u {
            if let Some((w, whole)) = weight.get_mut(&id) {
                if *whole || math::dist(&reg.ball(b).center, q) <= radius {
                    *w -= 1;
                }
                break;
            }
            u = centers.node(id).parent;
        }
    }

    let mut items: Vec<(f64, usize, usize)> = Vec::with_capacity(weight.len() + large.len());
    for (&node, &(w, whole)) in &weight {
        if w == 0 {
            continue;
        }
        let witness = if whole {
            centers.representative(node)
        } else {
            centers
                .points_in_leaf(node)
                .iter()
                .copied()
                .filter(|b| !is_large.contains(b))
                .filter(|&b| math::dist(&reg.ball(b).center, q) <= radius)
                .min_by(|&a, &b| reg.ball(a).radius.total_cmp(&reg.ball(b).radius).then(a.cmp(&b)))
        };
        let b = witness.ok_or_else(|| Error::Internal(format!("counted node {node} has no witness")))?;
        items.push((reg.ball(b).distance(q), b, w));
    }
    for &b in &large {
        items.push((reg.ball(b).distance(q), b, 1));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut acc = 0;
    for &(d, b, w) in &items {
        acc += w;
        if acc >= k {
            return Ok(KnnAnswer::new(b, d, eps));
        }
    }
    Err(Error::Internal(format!(
        "only {acc} balls near the query for k = {k}; the estimate {x} is too small"
    )))
}

/// `(1 ± eps)`-approximate k-th nearest ball. Queries outside the unit cube
/// are answered too.
pub fn query(reg: &Registry, q: &[f64], k: usize, eps: f64) -> Result<KnnAnswer> {
    check_eps(eps)?;
    let cf = constant_factor_kth(reg, q, k)?;
    refine(reg, q, k, cf.estimate, eps)
}

impl Registry {
    /// See [`query`].
    pub fn knn(&self, q: &[f64], k: usize, eps: f64) -> Result<KnnAnswer> {
        query(self, q, k, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Ball, NormalizedInstance};
    use crate::oracle;
    use alloc::vec;
    use crate::testutil::random_disjoint_balls;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three() -> Registry {
        let balls = [0.2, 0.5, 0.8].iter().map(|&c| Ball::new(vec![c], 0.05).unwrap()).collect();
        Registry::build(NormalizedInstance::from_unit_balls(balls, 3).unwrap()).unwrap()
    }

    fn registry(seed: u64, dim: usize, n: usize) -> Registry {
        let balls = random_disjoint_balls(seed, dim, n, 0.05);
        Registry::build_checked(NormalizedInstance::from_unit_balls(balls, 3usize.pow(dim as u32)).unwrap())
            .unwrap()
    }

    #[test]
    fn zero_short_circuit() {
        let reg = three();
        let cf = constant_factor_kth(&reg, &[0.51], 1).unwrap();
        assert_eq!(cf, ConstantFactor { estimate: 0.0, branch: Branch::Zero });
        let a = query(&reg, &[0.51], 1, 0.3).unwrap();
        assert_eq!((a.ball_id, a.distance), (1, 0.0));
    }

    #[test]
    fn three_intervals() {
        let reg = three();
        let cf = constant_factor_kth(&reg, &[0.5], 2).unwrap();
        assert!((0.0625..=1.0).contains(&cf.estimate), "{cf:?}");
        let a = refine(&reg, &[0.5], 2, 0.25, 0.1).unwrap();
        assert!(a.ball_id == 0 || a.ball_id == 2);
        assert!((0.225..=0.275).contains(&a.distance));
        let (lo, hi) = a.certified_interval;
        assert!(lo <= 0.25 && 0.25 <= hi);
    }

    #[test]
    fn center_query_and_last_rank() {
        let reg = registry(3, 2, 120);
        let c = reg.ball(17).center.clone();
        let a = query(&reg, &c, 1, 0.2).unwrap();
        assert_eq!((a.ball_id, a.distance), (17, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = [rng.gen(), rng.gen()];
            let a = query(&reg, &q, 120, 0.1).unwrap();
            let d = oracle::exact_kth_distance(reg.balls(), &q, 120).unwrap().value;
            assert!(a.distance >= 0.9 * d && a.distance <= 1.1 * d);
        }
    }

    #[test]
    fn outside_queries_still_answer() {
        let reg = registry(4, 2, 60);
        for q in [[-0.5, 0.3], [1.7, 2.0], [1.0, 1.0]] {
            for k in [1, 10, 60] {
                let a = query(&reg, &q, k, 0.25).unwrap();
                let d = oracle::exact_kth_distance(reg.balls(), &q, k).unwrap().value;
                assert!(a.distance >= 0.75 * d && a.distance <= 1.25 * d);
            }
        }
    }

    #[test]
    fn random_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..12u64 {
            let dim = 1 + (seed % 3) as usize;
            let n = 150;
            let reg = registry(seed, dim, n);
            for _ in 0..200 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                let k = rng.gen_range(1..=n);
                let eps = [0.5, 0.2, 0.1][rng.gen_range(0..3)];
                let d = oracle::exact_kth_distance(reg.balls(), &q, k).unwrap().value;
                let cf = constant_factor_kth(&reg, &q, k).unwrap();
                assert!(cf.estimate / 4.0 <= d && d <= 4.0 * cf.estimate, "{cf:?} vs {d}");
                let a = query(&reg, &q, k, eps).unwrap();
                assert!((1.0 - eps) * d <= a.distance && a.distance <= (1.0 + eps) * d);
                assert_eq!(a.distance, reg.ball(a.ball_id).distance(&q));
            }
        }
    }

    #[test]
    fn bracketed_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for seed in 0..6u64 {
            let dim = 1 + (seed % 2) as usize;
            let reg = registry(seed, dim, 120);
            for _ in 0..200 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen()).collect();
                let k = rng.gen_range(1..=120);
                let d = oracle::exact_kth_distance(reg.balls(), &q, k).unwrap().value;
                if d == 0.0 {
                    continue;
                }
                let (lo, hi) = (d * rng.gen_range(0.1..=1.0), d * rng.gen_range(1.0..4.0));
                let eps = [0.5, 0.05][rng.gen_range(0..2)];
                let a = refine_bracketed(&reg, &q, k, lo, hi, eps).unwrap();
                assert!((1.0 - eps) * d <= a.distance && a.distance <= (1.0 + eps) * d);
            }
        }
        assert!(refine_bracketed(&three(), &[0.5], 2, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let reg = three();
        assert!(matches!(query(&reg, &[0.5], 4, 0.1), Err(Error::RankOutOfRange { .. })));
        assert!(query(&reg, &[0.5], 1, 1.0).is_err());
        assert!(query(&reg, &[0.5, 0.5], 1, 0.5).is_err());
    }
}
