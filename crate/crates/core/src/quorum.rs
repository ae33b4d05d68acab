//! Quorum clustering: a sequence of balls, each covering a fresh batch of
//! `k - c_d` input balls and meeting at least `k` of them, with radius within
//! a constant factor of the best possible at its turn.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::math;
use crate::oracle;
use crate::registry::Registry;

/// Approximation factor carried by [`Quorum`].
pub const XI: f64 = 12.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PointQuorumBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub assigned: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuorumCluster {
    pub center: Vec<f64>,
    pub radius: f64,
    pub assigned: Vec<usize>,
    pub witness: usize,
    pub gamma: f64,
    pub zeta: f64,
    /// Radius of the underlying point cluster of centers.
    pub rho: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quorum {
    pub clusters: Vec<QuorumCluster>,
    pub k: usize,
    /// Batch size `k - c_d`.
    pub batch: usize,
    pub xi: f64,
    /// Whether the last cluster holds fewer than `batch` balls.
    pub has_remainder: bool,
}

/// Greedy point clustering: each round picks the remaining point whose
/// `min(l, |remaining|)`-th nearest remaining point (itself included) is
/// closest, and takes those points. Radii are within a factor 2 of the
/// smallest ball containing that many remaining points.
pub fn point_quorum(points: &[Vec<f64>], l: usize) -> Result<Vec<PointQuorumBall>> {
    if l == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut out = Vec::with_capacity(points.len().div_ceil(l));
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    while !remaining.is_empty() {
        let m = l.min(remaining.len());
        let mut best: Option<(f64, usize)> = None;
        for &p in &remaining {
            scratch.clear();
            scratch.extend(remaining.iter().map(|&j| (math::dist(&points[p], &points[j]), j)));
            let (_, &mut (r, _), _) = scratch.select_nth_unstable_by(m - 1, |a, b| a.0.total_cmp(&b.0));
            if best.is_none_or(|(br, _)| r < br) {
                best = Some((r, p));
            }
        }
        let (radius, p) = best.expect("remaining is nonempty");
        let mut near: Vec<(f64, usize)> =
            remaining.iter().map(|&j| (math::dist(&points[p], &points[j]), j)).collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut assigned: Vec<usize> = near[..m].iter().map(|&(_, j)| j).collect();
        assigned.sort_unstable();
        remaining.retain(|j| assigned.binary_search(j).is_err());
        out.push(PointQuorumBall { center: points[p].clone(), radius, assigned });
    }
    Ok(out)
}

/// Quorum clustering of the registry's balls for rank `k > 2 c_d`.
pub fn ball_quorum(reg: &Registry, k: usize) -> Result<Quorum> {
    let c_d = reg.c_d();
    if k <= 2 * c_d {
        return Err(Error::Precondition(format!(
            "quorum clustering needs k > 2 c_d = {}; answer k = {k} with the registry query instead",
            2 * c_d
        )));
    }
    reg.check_rank(k)?;
    let batch = k - c_d;
    let centers: Vec<Vec<f64>> = reg.balls().iter().map(|b| b.center.clone()).collect();
    let raw = point_quorum(&centers, batch)?;
    let mut clusters = Vec::with_capacity(raw.len());
    for pq in raw {
        let gamma = reg.knn(&pq.center, k, 0.5)?.distance;
        let zeta = (2.0 * gamma).max(3.0 * pq.radius);
        let witness = *pq
            .assigned
            .iter()
            .min_by(|&&a, &&b| {
                math::dist(&reg.ball(a).center, &pq.center)
                    .total_cmp(&math::dist(&reg.ball(b).center, &pq.center))
                    .then(a.cmp(&b))
            })
            .expect("clusters are nonempty");
        clusters.push(QuorumCluster {
            center: pq.center,
            radius: zeta,
            assigned: pq.assigned,
            witness,
            gamma,
            zeta,
            rho: pq.radius,
        });
    }
    let has_remainder = clusters.last().is_some_and(|c| c.assigned.len() < batch);
    let sortable = if has_remainder { clusters.len() - 1 } else { clusters.len() };
    clusters[..sortable].sort_by(|a, b| a.zeta.total_cmp(&b.zeta));
    Ok(Quorum { clusters, k, batch, xi: XI, has_remainder })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuorumReport {
    pub containment_ok: bool,
    pub intersection_ok: bool,
    pub assignment_ok: bool,
    pub sorted_ok: bool,
    /// `None` when the instance exceeds the oracle cap.
    pub optimality_ok: Option<bool>,
    /// Largest `radius / feasible optimum` seen.
    pub worst_ratio: f64,
    /// Largest `radius / certified lower bound` seen.
    pub worst_ratio_vs_lower: f64,
    pub failures: Vec<String>,
}

impl QuorumReport {
    pub fn passed(&self) -> bool {
        self.containment_ok
            && self.intersection_ok
            && self.assignment_ok
            && self.sorted_ok
            && self.optimality_ok != Some(false)
    }
}

/// Checks containment, intersection counts, the partition of the balls, the
/// radius order, and (for at most `cap` balls) optimality within `xi`.
pub fn verify_quorum(reg: &Registry, quorum: &Quorum, cap: usize) -> Result<QuorumReport> {
    let balls = reg.balls();
    let n = balls.len();
    let mut rep = QuorumReport {
        containment_ok: true,
        intersection_ok: true,
        assignment_ok: true,
        sorted_ok: true,
        ..Default::default()
    };
    let mut owner = vec![usize::MAX; n];
    for (i, c) in quorum.clusters.iter().enumerate() {
        if c.assigned.is_empty() {
            rep.assignment_ok = false;
            rep.failures.push(format!("cluster {i}: no assigned balls"));
        }
        if !c.assigned.contains(&c.witness) {
            rep.assignment_ok = false;
            rep.failures.push(format!("cluster {i}: witness {} not assigned", c.witness));
        }
        for &b in &c.assigned {
            if owner[b] != usize::MAX {
                rep.assignment_ok = false;
                rep.failures.push(format!("ball {b} assigned to clusters {} and {i}", owner[b]));
            }
            owner[b] = i;
            let ball = &balls[b];
            if math::dist(&ball.center, &c.center) + ball.radius > c.radius * (1.0 + 1e-12) {
                rep.containment_ok = false;
                rep.failures.push(format!("cluster {i}: ball {b} is not inside"));
            }
        }
        let (meet, _) = oracle::exact_counts(balls, &c.center, c.radius);
        if meet < quorum.k {
            rep.intersection_ok = false;
            rep.failures.push(format!("cluster {i}: meets {meet} < {} balls", quorum.k));
        }
    }
    if let Some(b) = owner.iter().position(|&o| o == usize::MAX) {
        rep.assignment_ok = false;
        rep.failures.push(format!("ball {b} is not assigned"));
    }
    let sortable = quorum.clusters.len() - usize::from(quorum.has_remainder);
    for i in 1..sortable {
        if quorum.clusters[i].radius < quorum.clusters[i - 1].radius {
            rep.sorted_ok = false;
            rep.failures.push(format!("cluster {i}: radius out of order"));
        }
    }
    if n <= cap {
        let mut ok = true;
        let mut assigned_before: Vec<bool> = vec![false; n];
        for (i, c) in quorum.clusters.iter().enumerate() {
            let remaining: Vec<usize> = (0..n).filter(|&b| !assigned_before[b]).collect();
            let l = quorum.batch.min(remaining.len());
            let bound = oracle::optimal_quorum_radius_bound(balls, &remaining, l, quorum.k, cap)?;
            let ratio = c.radius / bound.value;
            let ratio_lower = if bound.lower_bound() > 0.0 { c.radius / bound.lower_bound() } else { f64::INFINITY };
            rep.worst_ratio = rep.worst_ratio.max(ratio);
            rep.worst_ratio_vs_lower = rep.worst_ratio_vs_lower.max(ratio_lower);
            if c.radius > quorum.xi * bound.value {
                ok = false;
                rep.failures.push(format!(
                    "cluster {i}: radius {} exceeds {} x optimum {} (resolution {})",
                    c.radius, quorum.xi, bound.value, bound.resolution
                ));
            }
            for &b in &c.assigned {
                assigned_before[b] = true;
            }
        }
        rep.optimality_ok = Some(ok);
    }
    Ok(rep)
}

impl Quorum {
    /// One line per cluster: `center... radius | assigned... | witness gamma zeta`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for c in &self.clusters {
            for x in &c.center {
                let _ = write!(s, "{x} ");
            }
            let _ = write!(s, "{} |", c.radius);
            for b in &c.assigned {
                let _ = write!(s, " {b}");
            }
            let _ = writeln!(s, " | {} {} {}", c.witness, c.gamma, c.zeta);
        }
        s
    }
}
