//! Approximate Voronoi diagram for a rank `k` and accuracy `eps` fixed at
//! build time.
//!
//! The index is the overlay `W` of two cube sets:
//!
//! - `I`: exponential grids around every quorum cluster, at rings of radius
//!   `2^j x_i` and resolution `eps / zeta1`.
//! - `S`: an adaptive subdivision of the unit cube in which every leaf has a
//!   single cluster that is a `(1 + eps/8)`-approximate nearest lifted site
//!   (under the product norm) for all of its points.
//!
//! Each cell of `W` stores a representative point, a precomputed estimate of
//! `d_k` there, and the witness ball of the cluster picked by `S`. A query
//! compares the cell diameter with an upper bound `lambda` on `d_k(q)` and
//! returns one of the two stored balls.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{cells_at_level, grid_level, Ball, CanonicalCube, Region, MAX_LEVEL};
use crate::knn::KnnAnswer;
use crate::math::{self, ceil, log2, pow2};
use crate::oracle;
use crate::quadtree::{CompressedQuadtree, NodeId};
use crate::quorum::{ball_quorum, XI};
use crate::registry::Registry;

/// `zeta1` used by [`Mode::Strict`].
pub const STRICT_ZETA1: f64 = 256.0 * XI;
/// Default `zeta1` for [`Mode::Practical`]. Correctness there comes from the
/// cell certificate, so the grids only need to be coarse.
pub const PRACTICAL_ZETA1: f64 = XI;
/// Subdivision depth limit for `S`.
const S_MAX_LEVEL: u32 = 40;
/// Default cap on `|I| + |S|`.
pub const DEFAULT_MAX_CUBES: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The overlay as is, with `zeta1 = 256 xi`.
    Strict,
    /// Coarser grids, then every cell that cannot certify its own answers
    /// is split until it can.
    Practical,
}

impl Mode {
    pub fn default_zeta1(self) -> f64 {
        match self {
            Mode::Strict => STRICT_ZETA1,
            Mode::Practical => PRACTICAL_ZETA1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvdParams {
    pub k: usize,
    pub eps: f64,
    pub mode: Mode,
    /// Overrides the mode's grid constant.
    pub zeta1: Option<f64>,
    /// Build fails rather than enumerate more than this many cubes.
    pub max_cubes: usize,
}

impl AvdParams {
    pub fn new(k: usize, eps: f64, mode: Mode) -> Self {
        AvdParams { k, eps, mode, zeta1: None, max_cubes: DEFAULT_MAX_CUBES }
    }

    pub fn with_zeta1(mut self, zeta1: f64) -> Self {
        self.zeta1 = Some(zeta1);
        self
    }

    pub fn zeta1(&self) -> f64 {
        self.zeta1.unwrap_or(self.mode.default_zeta1())
    }
}

/// A quorum cluster as seen by the index: the lifted point
/// `(center, radius)` and a ball lying inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    pub center: Vec<f64>,
    pub radius: f64,
    pub witness: usize,
}

impl Site {
    /// Product-norm distance from the lifted query `(q, 0)`.
    pub fn lifted_distance(&self, q: &[f64]) -> f64 {
        math::dist(q, &self.center) + self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvdCell {
    pub rep_point: Vec<f64>,
    /// Index into the site list.
    pub cluster: usize,
    pub cluster_witness: usize,
    /// Satisfies `d_k(rep) <= kdist <= (1 + eps/4) d_k(rep)`.
    pub kdist: f64,
    pub kdist_witness: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AvdStats {
    pub clusters: usize,
    pub i_cubes: usize,
    pub s_cubes: usize,
    pub w_nodes: usize,
    /// Nodes of `W` with a nonempty own region.
    pub w_cells: usize,
    /// Cells split by the practical-mode certificate.
    pub refined: usize,
    /// Cells left uncertified at the depth limit.
    pub uncertified: usize,
}

/// Everything needed to rebuild an index without a registry.
#[derive(Clone, Debug, PartialEq)]
pub struct AvdParts {
    pub dim: usize,
    pub k: usize,
    pub eps: f64,
    pub xi: f64,
    pub zeta1: f64,
    pub mode: Mode,
    pub balls: Vec<Ball>,
    pub sites: Vec<Site>,
    /// Cubes of `W` in node order.
    pub cubes: Vec<CanonicalCube>,
    pub cells: Vec<Option<AvdCell>>,
    pub stats: AvdStats,
}

#[derive(Clone, Debug)]
pub struct AvdIndex {
    parts: AvdParts,
    tree: CompressedQuadtree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvdBranch {
    SmallCell,
    Cluster,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryTrace {
    pub node: NodeId,
    pub lambda: f64,
    pub branch: AvdBranch,
    pub answer: KnnAnswer,
}

impl AvdIndex {
    /// Builds the index, filling cells one knn query at a time.
    pub fn build(reg: &Registry, params: &AvdParams) -> Result<Self> {
        Self::build_with_fill(reg, params, |reg, reps, hints, k, eps| {
            reps.iter().zip(hints).map(|(p, &h)| fill_one(reg, p, h, k, eps)).collect()
        })
    }

    /// Like [`Self::build`], with the per-cell knn queries delegated to
    /// `fill(reg, reps, hints, k, eps)`, which must answer `reps` in order
    /// (see [`fill_one`]). The queries are independent, so `fill` may run
    /// them in parallel.
    pub fn build_with_fill<F>(reg: &Registry, params: &AvdParams, mut fill: F) -> Result<Self>
    where
        F: FnMut(&Registry, &[Vec<f64>], &[Option<(f64, f64)>], usize, f64) -> Result<Vec<KnnAnswer>>,
    {
        let (k, eps, zeta1) = (params.k, params.eps, params.zeta1());
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} not in (0, 1)")));
        }
        if !(zeta1 >= 1.0) || !zeta1.is_finite() {
            return Err(Error::InvalidParameter(format!("zeta1 = {zeta1} must be at least 1")));
        }
        let dim = reg.dim();
        let quorum = ball_quorum(reg, k)?;
        let sites: Vec<Site> = quorum
            .clusters
            .iter()
            .map(|c| Site { center: c.center.clone(), radius: c.radius, witness: c.witness })
            .collect();

        let i_cubes = exponential_grids(&sites, eps, zeta1, quorum.xi, params.max_cubes)?;
        let (s_cubes, s_assign) = nearest_site_subdivision(dim, &sites, eps, params.max_cubes)?;
        let i_tree = CompressedQuadtree::build_from_cubes(dim, i_cubes.iter().cloned())?;
        let s_tree = CompressedQuadtree::build_from_cubes(dim, s_cubes.iter().cloned())?;
        let w = CompressedQuadtree::overlay(&i_tree, &s_tree)?;

        let inner_eps = eps / 9.0;
        let mut cubes: BTreeSet<CanonicalCube> = w.tree.nodes().iter().map(|n| n.cube.clone()).collect();
        let mut tree = w.tree;
        // (node, site) for every node still to be filled
        let mut pending: Vec<(NodeId, usize)> = (0..tree.len())
            .map(|id| {
                let s_cube = s_tree.cube(w.from_b[id]);
                s_assign
                    .get(s_cube)
                    .map(|&site| (id, site))
                    .ok_or_else(|| Error::Internal(format!("no site for cube {s_cube:?}")))
            })
            .collect::<Result<_>>()?;
        let mut cells: BTreeMap<CanonicalCube, AvdCell> = BTreeMap::new();
        // bounds on d_k at the representative of every filled cube, split ones included
        let mut brackets: BTreeMap<CanonicalCube, (f64, f64)> = BTreeMap::new();
        let (mut refined, mut uncertified) = (0, 0);
        loop {
            let depth = depths(&tree);
            pending.sort_by_key(|&(id, _)| (depth[id], id));
            let mut split = Vec::new();
            // shallow nodes first, so deeper ones can start from their brackets
            for wave in pending.chunk_by(|a, b| depth[a.0] == depth[b.0]) {
                let mut reps = Vec::new();
                let mut hints = Vec::new();
                let mut owners = Vec::new();
                for &(id, site) in wave {
                    let node = tree.node(id);
                    let kids: Vec<&CanonicalCube> = node.children.iter().map(|&c| tree.cube(c)).collect();
                    // covered nodes get a probe at their center, only to seed
                    // brackets for the nodes below
                    let (rep, owns) = match free_subcube(&node.cube, &kids) {
                        Some(free) => (free.center(), true),
                        None if brackets.contains_key(&node.cube) => continue,
                        None => (node.cube.center(), false),
                    };
                    reps.push(rep);
                    hints.push(ancestor_bracket(&tree, id, &brackets));
                    owners.push((node.cube.clone(), site, owns));
                }
                let answers = fill(reg, &reps, &hints, k, inner_eps)?;
                if answers.len() != reps.len() {
                    return Err(Error::Internal(format!(
                        "fill answered {} of {} cells",
                        answers.len(),
                        reps.len()
                    )));
                }
                for (((cube, site, owns), rep), ans) in owners.into_iter().zip(reps).zip(answers) {
                    let cell = AvdCell {
                        rep_point: rep,
                        cluster: site,
                        cluster_witness: sites[site].witness,
                        kdist: ans.distance / (1.0 - inner_eps),
                        kdist_witness: ans.ball_id,
                    };
                    brackets.insert(cube.clone(), (ans.distance / (1.0 + inner_eps), cell.kdist));
                    if !owns {
                        continue;
                    }
                    let ok = params.mode == Mode::Strict
                        || certified(&cube, &cell, &sites[site], reg.balls(), eps, inner_eps);
                    if ok {
                        cells.insert(cube, cell);
                    } else if cube.level >= S_MAX_LEVEL {
                        uncertified += 1;
                        cells.insert(cube, cell);
                    } else {
                        split.push((cube, site));
                    }
                }
            }
            if split.is_empty() {
                break;
            }
            refined += split.len();
            let mut fresh = Vec::new();
            for (cube, site) in split {
                for child in cube.children() {
                    if cubes.insert(child.clone()) {
                        fresh.push((child, site));
                    }
                }
            }
            if cubes.len() > params.max_cubes {
                return Err(Error::InvalidParameter(format!(
                    "refinement exceeds the cap of {} cubes",
                    params.max_cubes
                )));
            }
            tree = CompressedQuadtree::build_from_cubes(dim, cubes.iter().cloned())?;
            pending = fresh
                .into_iter()
                .map(|(c, site)| (tree.find(&c).expect("inserted cube is a node"), site))
                .collect();
        }
        let table: Vec<Option<AvdCell>> =
            tree.nodes().iter().map(|n| cells.remove(&n.cube)).collect();
        let stats = AvdStats {
            clusters: sites.len(),
            i_cubes: i_cubes.len(),
            s_cubes: s_cubes.len(),
            w_nodes: tree.len(),
            w_cells: table.iter().filter(|c| c.is_some()).count(),
            refined,
            uncertified,
        };
        let parts = AvdParts {
            dim,
            k,
            eps,
            xi: quorum.xi,
            zeta1,
            mode: params.mode,
            balls: reg.balls().to_vec(),
            sites,
            cubes: tree.nodes().iter().map(|n| n.cube.clone()).collect(),
            cells: table,
            stats,
        };
        Ok(AvdIndex { parts, tree })
    }

    /// Rebuilds an index from stored parts, checking that the cube table
    /// forms the same tree and every cell reference is in range.
    pub fn from_parts(parts: AvdParts) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if parts.cubes.is_empty() || parts.balls.is_empty() || parts.sites.is_empty() {
            return bad("empty table".into());
        }
        if parts.cells.len() != parts.cubes.len() {
            return bad(format!("{} cells for {} cubes", parts.cells.len(), parts.cubes.len()));
        }
        if parts.k == 0 || parts.k > parts.balls.len() {
            return Err(Error::RankOutOfRange { k: parts.k, n: parts.balls.len() });
        }
        let tree = CompressedQuadtree::build_from_cubes(parts.dim, parts.cubes.iter().cloned())?;
        if tree.len() != parts.cubes.len()
            || tree.nodes().iter().zip(&parts.cubes).any(|(n, c)| &n.cube != c)
        {
            return bad("cube table is not a canonical quadtree order".into());
        }
        let n = parts.balls.len();
        if parts.balls.iter().any(|b| b.dim() != parts.dim)
            || parts.sites.iter().any(|s| s.center.len() != parts.dim || s.witness >= n)
        {
            return bad("ball or site table is inconsistent".into());
        }
        for (id, cell) in parts.cells.iter().enumerate() {
            let Some(cell) = cell else { continue };
            if cell.cluster >= parts.sites.len()
                || cell.cluster_witness >= n
                || cell.kdist_witness >= n
                || cell.rep_point.len() != parts.dim
                || !parts.cubes[id].contains_point(&cell.rep_point)
            {
                return bad(format!("cell {id} is inconsistent"));
            }
        }
        Ok(AvdIndex { parts, tree })
    }

    pub fn parts(&self) -> &AvdParts {
        &self.parts
    }

    pub fn into_parts(self) -> AvdParts {
        self.parts
    }

    pub fn tree(&self) -> &CompressedQuadtree {
        &self.tree
    }

    pub fn stats(&self) -> AvdStats {
        self.parts.stats
    }

    pub fn k(&self) -> usize {
        self.parts.k
    }

    pub fn eps(&self) -> f64 {
        self.parts.eps
    }

    pub fn dim(&self) -> usize {
        self.parts.dim
    }

    pub fn sites(&self) -> &[Site] {
        &self.parts.sites
    }

    pub fn balls(&self) -> &[Ball] {
        &self.parts.balls
    }

    pub fn cell(&self, id: NodeId) -> Option<&AvdCell> {
        self.parts.cells.get(id).and_then(|c| c.as_ref())
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.parts.dim {
            return Err(Error::DimensionMismatch { expected: self.parts.dim, found: q.len() });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Answers a query. Points outside `[0,1)^d` get ball 0 flagged as out of
    /// domain.
    pub fn query(&self, q: &[f64]) -> Result<KnnAnswer> {
        self.check_query(q)?;
        Ok(match self.trace(q) {
            Some(t) => t.answer,
            None => KnnAnswer {
                ball_id: 0,
                distance: self.parts.balls[0].distance(q),
                certified_interval: (0.0, f64::INFINITY),
                out_of_domain: true,
            },
        })
    }

    /// The query path for `q` inside the unit cube.
    pub fn trace(&self, q: &[f64]) -> Option<QueryTrace> {
        let node = self.tree.point_location(q)?;
        let cell = self.cell(node)?;
        let site = &self.parts.sites[cell.cluster];
        let lambda = site.lifted_distance(q).min(cell.kdist + math::dist(q, &cell.rep_point));
        let eps = self.parts.eps;
        let (branch, ball) = if self.tree.cube(node).diameter() <= eps / 8.0 * lambda {
            (AvdBranch::SmallCell, cell.kdist_witness)
        } else {
            (AvdBranch::Cluster, cell.cluster_witness)
        };
        let answer = KnnAnswer::new(ball, self.parts.balls[ball].distance(q), eps);
        Some(QueryTrace { node, lambda, branch, answer })
    }

    /// Checks the index against brute force on the given queries and on
    /// `cell_samples` evenly spaced cells.
    pub fn audit(&self, queries: &[Vec<f64>], cell_samples: usize) -> Result<AvdAudit> {
        let p = &self.parts;
        let (k, eps, xi) = (p.k, p.eps, p.xi);
        let mut out = AvdAudit::default();
        for (qi, q) in queries.iter().enumerate() {
            self.check_query(q)?;
            out.queries += 1;
            let Some(t) = self.trace(q) else {
                out.out_of_domain += 1;
                continue;
            };
            let dk = oracle::exact_kth_distance(&p.balls, q, k)?.value;
            let ok = |b: usize| {
                let d = p.balls[b].distance(q);
                (1.0 - eps) * dk <= d && d <= (1.0 + eps) * dk
            };
            let d = t.answer.distance;
            if dk > 0.0 {
                out.worst_relative_error = out.worst_relative_error.max(math::abs(d - dk) / dk);
            }
            let cell = self.cell(t.node).expect("traced node has a cell");
            let note = |out: &mut AvdAudit, what: &str| {
                if out.failures.len() < 20 {
                    out.failures.push(format!("query {qi} (node {}): {what}", t.node));
                }
            };
            if ok(t.answer.ball_id) {
                out.correct += 1;
            } else {
                note(&mut out, &format!("distance {d} vs d_k {dk}"));
            }
            if t.lambda < dk * (1.0 - 1e-12) {
                out.lambda_violations += 1;
                note(&mut out, &format!("lambda {} below d_k {dk}", t.lambda));
            }
            match t.branch {
                AvdBranch::SmallCell => {
                    out.small_cell_answers += 1;
                    if !ok(cell.kdist_witness) {
                        out.small_cell_violations += 1;
                        note(&mut out, "small-cell witness out of range");
                    }
                }
                AvdBranch::Cluster => {
                    out.cluster_answers += 1;
                    if !ok(cell.cluster_witness) {
                        out.cluster_violations += 1;
                        note(&mut out, "cluster witness out of range");
                    }
                }
            }
            let anchored = p.sites.iter().any(|s| {
                let c = math::dist(q, &s.center);
                s.radius <= 3.0 * xi * dk && c <= 4.0 * xi * dk && c <= dk + s.radius
            });
            if !anchored {
                out.anchor_missing += 1;
                note(&mut out, "no anchor cluster");
            }
            let best = p.sites.iter().map(|s| s.lifted_distance(q)).fold(f64::INFINITY, f64::min);
            if p.sites[cell.cluster].lifted_distance(q) > (1.0 + eps / 8.0) * best * (1.0 + 1e-12) {
                out.site_violations += 1;
                note(&mut out, "assigned site is not an approximate nearest site");
            }
        }
        let filled: Vec<NodeId> = (0..p.cells.len()).filter(|&i| p.cells[i].is_some()).collect();
        let step = (filled.len() / cell_samples.max(1)).max(1);
        for &id in filled.iter().step_by(step).take(cell_samples) {
            let cell = self.cell(id).expect("filled");
            out.cells_checked += 1;
            let dk = oracle::exact_kth_distance(&p.balls, &cell.rep_point, k)?.value;
            let witness = p.balls[cell.kdist_witness].distance(&cell.rep_point);
            let slack = 1e-12 * dk.max(1e-300);
            let in_range = dk <= cell.kdist + slack
                && cell.kdist <= (1.0 + eps / 4.0) * dk + slack
                && witness >= (1.0 - eps / 4.0) * dk - slack
                && witness <= (1.0 + eps / 4.0) * dk + slack;
            let site = &p.sites[cell.cluster];
            let inside = p.balls[cell.cluster_witness].inside(&site.center, site.radius);
            if !in_range || !inside {
                out.cell_violations += 1;
                if out.failures.len() < 20 {
                    out.failures.push(format!(
                        "cell {id}: kdist {} witness {witness} d_k {dk} witness inside cluster {inside}",
                        cell.kdist
                    ));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AvdAudit {
    pub queries: usize,
    pub out_of_domain: usize,
    pub correct: usize,
    pub worst_relative_error: f64,
    pub lambda_violations: usize,
    pub small_cell_answers: usize,
    pub small_cell_violations: usize,
    pub cluster_answers: usize,
    pub cluster_violations: usize,
    pub anchor_missing: usize,
    pub site_violations: usize,
    pub cells_checked: usize,
    pub cell_violations: usize,
    pub failures: Vec<String>,
}

impl AvdAudit {
    pub fn passed(&self) -> bool {
        self.correct + self.out_of_domain == self.queries
            && self.lambda_violations == 0
            && self.small_cell_violations == 0
            && self.cluster_violations == 0
            && self.anchor_missing == 0
            && self.site_violations == 0
            && self.cell_violations == 0
    }
}

/// One cell query: [`crate::knn::refine_bracketed`] when a bracket
/// `lo <= d_k(p) <= hi` is known, the full knn query otherwise.
pub fn fill_one(reg: &Registry, p: &[f64], hint: Option<(f64, f64)>, k: usize, eps: f64) -> Result<KnnAnswer> {
    match hint {
        Some((lo, hi)) => crate::knn::refine_bracketed(reg, p, k, lo, hi, eps),
        None => reg.knn(p, k, eps),
    }
}

fn depths(tree: &CompressedQuadtree) -> Vec<usize> {
    let mut depth = vec![0; tree.len()];
    // preorder: parents come first
    for id in 0..tree.len() {
        if let Some(p) = tree.node(id).parent {
            depth[id] = depth[p] + 1;
        }
    }
    depth
}

/// Bounds on `d_k` valid anywhere in node `id`, taken from the nearest
/// filled ancestor and widened by its diameter (`d_k` is 1-Lipschitz). Only
/// returned while the bounds stay within a small factor of each other.
fn ancestor_bracket(
    tree: &CompressedQuadtree,
    id: NodeId,
    brackets: &BTreeMap<CanonicalCube, (f64, f64)>,
) -> Option<(f64, f64)> {
    let mut u = tree.node(id).parent;
    while let Some(a) = u {
        let cube = tree.cube(a);
        if let Some(&(lo, hi)) = brackets.get(cube) {
            let d = cube.diameter();
            return (d <= lo / 2.0).then_some((lo - d, hi + d));
        }
        u = tree.node(a).parent;
    }
    None
}

/// Whether every query point of `cube` is answered correctly by `cell`,
/// judged from the representative alone. `d_k` and the distance to a ball
/// are both 1-Lipschitz, so moving from `rep` to `q` shifts each by at most
/// the cube diameter.
fn certified(cube: &CanonicalCube, cell: &AvdCell, site: &Site, balls: &[Ball], eps: f64, inner: f64) -> bool {
    let d = cube.diameter();
    let slack = 1.0 - 1e-9;
    let hi = cell.kdist;
    let lo = hi * (1.0 - inner) / (1.0 + inner);
    // every query takes the small-cell branch, which is always sound
    let lambda_floor = (site.lifted_distance(&cell.rep_point) - d).min(hi);
    if d <= eps / 8.0 * lambda_floor * slack {
        return true;
    }
    let s = balls[cell.cluster_witness].distance(&cell.rep_point);
    (s + d) <= (1.0 + eps) * (lo - d) * slack && (s - d) * slack >= (1.0 - eps) * (hi + d)
}

/// Number of rings around each cluster.
fn ring_count(xi: f64, eps: f64) -> u32 {
    ceil(log2(32.0 * xi / eps)).max(0.0) as u32
}

fn exponential_grids(
    sites: &[Site],
    eps: f64,
    zeta1: f64,
    xi: f64,
    max_cubes: usize,
) -> Result<BTreeSet<CanonicalCube>> {
    let delta = eps / zeta1;
    let mut planned = 0.0;
    let mut rings = Vec::new();
    for s in sites {
        for j in 0..=ring_count(xi, eps) {
            let region = Region::ball(&s.center, pow2(j as i32) * s.radius);
            let level = grid_level(&region, delta);
            planned += clipped_cell_count(&s.center, pow2(j as i32) * s.radius, level);
            rings.push((region, level));
        }
    }
    if planned > max_cubes as f64 {
        return Err(Error::InvalidParameter(format!(
            "exponential grids need about {planned:.0} cubes, over the cap of {max_cubes}; \
             lower zeta1 or raise the cap"
        )));
    }
    let mut out = BTreeSet::new();
    for (region, level) in rings {
        out.extend(cells_at_level(&region, level, 0.0));
    }
    Ok(out)
}

/// Upper bound on the grid cells of `level` meeting the clipped bounding box
/// of `ball(center, radius)`.
fn clipped_cell_count(center: &[f64], radius: f64, level: u32) -> f64 {
    let scale = pow2(level as i32);
    center
        .iter()
        .map(|&c| {
            let lo = math::floor(((c - radius).max(0.0)) * scale);
            let hi = math::floor(((c + radius).min(1.0)) * scale).min(scale - 1.0);
            (hi - lo + 1.0).max(1.0)
        })
        .product()
}

/// Nearest and second-nearest lifted distances from `p`, with the nearest
/// site (lowest index on ties).
fn two_nearest(sites: &[Site], p: &[f64]) -> (usize, f64, f64) {
    let (mut best, mut d1, mut d2) = (0, f64::INFINITY, f64::INFINITY);
    for (i, s) in sites.iter().enumerate() {
        let d = s.lifted_distance(p);
        if d < d1 {
            d2 = d1;
            d1 = d;
            best = i;
        } else if d < d2 {
            d2 = d;
        }
    }
    (best, d1, d2)
}

/// Splits cubes from the root until one site serves every point of a cube
/// within `1 + eps/8` of the nearest. Returns all cubes visited and the site
/// of each, taken at the cube center.
fn nearest_site_subdivision(
    dim: usize,
    sites: &[Site],
    eps: f64,
    max_cubes: usize,
) -> Result<(Vec<CanonicalCube>, BTreeMap<CanonicalCube, usize>)> {
    let factor = 1.0 + eps / 8.0;
    let mut cubes = Vec::new();
    let mut assign = BTreeMap::new();
    let mut stack = vec![CanonicalCube::root(dim)];
    while let Some(cube) = stack.pop() {
        let (best, d1, d2) = two_nearest(sites, &cube.center());
        let half = cube.diameter() / 2.0;
        // 1-Lipschitz: every point p of the cube has d(p, best) <= d1 + half
        // and d(p, other) >= d2 - half.
        let settled = d1 + half <= factor * (d2 - half);
        if !settled && cube.level < S_MAX_LEVEL {
            stack.extend(cube.children());
        }
        assign.insert(cube.clone(), best);
        cubes.push(cube);
        if cubes.len() > max_cubes {
            return Err(Error::InvalidParameter(format!(
                "nearest-site subdivision exceeds the cap of {max_cubes} cubes"
            )));
        }
    }
    Ok((cubes, assign))
}

/// Largest dyadic sub-cube of `cube` that neither contains nor lies in any of
/// `children`, searched level by level. `None` when the children cover the
/// cube.
fn free_subcube(cube: &CanonicalCube, children: &[&CanonicalCube]) -> Option<CanonicalCube> {
    let mut frontier = vec![cube.clone()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for c in frontier {
            if children.iter().any(|ch| ch.contains(&c)) {
                continue;
            }
            if children.iter().any(|ch| c.contains(ch)) {
                if c.level < MAX_LEVEL {
                    next.extend(c.children());
                }
                continue;
            }
            return Some(c);
        }
        frontier = next;
    }
    None
}
