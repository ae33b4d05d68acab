//! Compressed quadtrees over `[0,1]^d` keyed by canonical cubes.
//!
//! Nodes are stored in z-order preorder (root at index 0). The stored cube set
//! is closed under least common ancestors, so every node's children lie in
//! distinct child orthants and a node's own region is its cube minus the cubes
//! of its children. Side tables in other modules are plain vectors indexed by
//! [`NodeId`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{grid_cell, grid_level, CanonicalCube, Region, MAX_LEVEL};
use crate::math;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub cube: CanonicalCube,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// Outcome of looking up a canonical cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellQuery {
    /// The cube is stored verbatim.
    Exact(NodeId),
    /// The cube lies on the compressed edge from `outer` down to `inner`.
    Between { outer: NodeId, inner: NodeId },
    /// The cube lies in the region of `NodeId` and contains no stored cube.
    Inside(NodeId),
}

/// Nodes realizing a grid approximation. `nodes` are the frontier cells;
/// `containers` are the coarser nodes passed through on the way down. Every
/// point of the region lies in the subtree of a frontier node or in the own
/// region (cube minus children) of a container.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Realization {
    pub nodes: Vec<NodeId>,
    pub containers: Vec<NodeId>,
}

/// One counted node of a range query. `whole` means the entire subtree was
/// added; otherwise only the node's own points inside the ball were.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RangeHit {
    pub node: NodeId,
    pub count: usize,
    pub whole: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RangeHits {
    pub total: usize,
    pub hits: Vec<RangeHit>,
}

#[derive(Clone, Debug)]
struct PointData {
    coords: Vec<Vec<f64>>,
    count: Vec<usize>,
    rep: Vec<usize>,
    leaf_of: Vec<NodeId>,
    leaf_points: Vec<Vec<usize>>,
}

#[derive(Clone, Debug)]
pub struct CompressedQuadtree {
    dim: usize,
    nodes: Vec<Node>,
    index: BTreeMap<CanonicalCube, NodeId>,
    points: Option<PointData>,
}

/// Result of overlaying two trees: the merged tree plus, for every merged
/// node, the smallest node of each source whose cube contains it.
#[derive(Clone, Debug)]
pub struct Overlay {
    pub tree: CompressedQuadtree,
    pub from_a: Vec<NodeId>,
    pub from_b: Vec<NodeId>,
}

impl CompressedQuadtree {
    /// Builds the tree whose cells are `cubes`, the root, and their pairwise
    /// least common ancestors.
    pub fn build_from_cubes<I>(dim: usize, cubes: I) -> Result<Self>
    where
        I: IntoIterator<Item = CanonicalCube>,
    {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut all: Vec<CanonicalCube> = vec![CanonicalCube::root(dim)];
        for c in cubes {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
            if c.level > MAX_LEVEL || c.coords.iter().any(|&x| x >> c.level != 0) {
                return Err(Error::OutsideUnitCube);
            }
            all.push(c);
        }
        all.sort_by(|a, b| a.zorder_cmp(b));
        all.dedup();
        loop {
            let before = all.len();
            let lcas: Vec<CanonicalCube> =
                all.windows(2).map(|w| CanonicalCube::lca(&w[0], &w[1])).collect();
            all.extend(lcas);
            all.sort_by(|a, b| a.zorder_cmp(b));
            all.dedup();
            if all.len() == before {
                break;
            }
        }

        let mut nodes: Vec<Node> = Vec::with_capacity(all.len());
        let mut index = BTreeMap::new();
        let mut stack: Vec<NodeId> = Vec::new();
        for cube in all {
            while let Some(&top) = stack.last() {
                if nodes[top].cube.contains(&cube) {
                    break;
                }
                stack.pop();
            }
            let id = nodes.len();
            let parent = stack.last().copied();
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            index.insert(cube.clone(), id);
            nodes.push(Node { cube, parent, children: Vec::new() });
            stack.push(id);
        }
        Ok(CompressedQuadtree { dim, nodes, index, points: None })
    }

    /// Builds a tree over points of `[0,1)^d`. Each point sits in the deepest
    /// cube containing it; coincident points share a leaf. The representative
    /// of a node is its point with the smallest id.
    pub fn build_from_points(points: &[Vec<f64>]) -> Result<Self> {
        let priority: Vec<f64> = (0..points.len()).map(|i| i as f64).collect();
        Self::build_from_points_with_priority(points, &priority)
    }

    /// Like [`Self::build_from_points`], with the representative of each node
    /// chosen as the point minimizing `(priority, id)`.
    pub fn build_from_points_with_priority(points: &[Vec<f64>], priority: &[f64]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).ok_or(Error::EmptyInput)?;
        if priority.len() != points.len() {
            return Err(Error::InvalidParameter("priority length differs from point count".into()));
        }
        let mut keys = Vec::with_capacity(points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
            }
            keys.push(grid_cell(MAX_LEVEL, p)?);
        }
        let mut tree = Self::build_from_cubes(dim, keys.iter().cloned())?;
        let n_nodes = tree.nodes.len();
        let mut count = vec![0usize; n_nodes];
        let mut rep = vec![usize::MAX; n_nodes];
        let mut leaf_points = vec![Vec::new(); n_nodes];
        let mut leaf_of = Vec::with_capacity(points.len());
        let better = |a: usize, b: usize| -> bool {
            b == usize::MAX || (priority[a], a) < (priority[b], b)
        };
        for (i, key) in keys.iter().enumerate() {
            let leaf = tree.index[key];
            leaf_of.push(leaf);
            leaf_points[leaf].push(i);
            count[leaf] += 1;
            if better(i, rep[leaf]) {
                rep[leaf] = i;
            }
        }
        for id in (1..n_nodes).rev() {
            let p = tree.nodes[id].parent.expect("non-root node has a parent");
            count[p] += count[id];
            if rep[id] != usize::MAX && better(rep[id], rep[p]) {
                rep[p] = rep[id];
            }
        }
        tree.points = Some(PointData { coords: points.to_vec(), count, rep, leaf_of, leaf_points });
        Ok(tree)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        0
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn cube(&self, id: NodeId) -> &CanonicalCube {
        &self.nodes[id].cube
    }

    pub fn find(&self, cube: &CanonicalCube) -> Option<NodeId> {
        self.index.get(cube).copied()
    }

    /// Number of points stored below `id` (0 for trees built from cubes).
    pub fn count(&self, id: NodeId) -> usize {
        self.points.as_ref().map_or(0, |p| p.count[id])
    }

    /// The representative point id of the subtree at `id`.
    pub fn representative(&self, id: NodeId) -> Option<usize> {
        self.points.as_ref().and_then(|p| (p.rep[id] != usize::MAX).then_some(p.rep[id]))
    }

    pub fn leaf_of_point(&self, point: usize) -> Option<NodeId> {
        self.points.as_ref().map(|p| p.leaf_of[point])
    }

    pub fn points_in_leaf(&self, id: NodeId) -> &[usize] {
        self.points.as_ref().map_or(&[], |p| &p.leaf_points[id])
    }

    pub fn point(&self, i: usize) -> Option<&[f64]> {
        self.points.as_ref().map(|p| p.coords[i].as_slice())
    }

    /// True when `ancestor` is `id` or lies on the path from `id` to the root.
    pub fn is_ancestor(&self, ancestor: NodeId, mut id: NodeId) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            if id < ancestor {
                return false;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    fn child_containing(&self, id: NodeId, cube: &CanonicalCube) -> Option<NodeId> {
        self.nodes[id].children.iter().copied().find(|&c| self.nodes[c].cube.contains(cube))
    }

    /// Locates a canonical cube by descending from the root.
    pub fn cell_query(&self, cube: &CanonicalCube) -> CellQuery {
        if let Some(id) = self.find(cube) {
            return CellQuery::Exact(id);
        }
        let mut u = self.root();
        while let Some(c) = self.child_containing(u, cube) {
            u = c;
        }
        let inner = self.nodes[u].children.iter().copied().find(|&c| cube.contains(&self.nodes[c].cube));
        match inner {
            Some(inner) => CellQuery::Between { outer: u, inner },
            None => CellQuery::Inside(u),
        }
    }

    /// Deepest node whose (half-open) cube contains `q`, or `None` if `q` is
    /// outside `[0,1)^d`.
    pub fn point_location(&self, q: &[f64]) -> Option<NodeId> {
        let key = grid_cell(MAX_LEVEL, q).ok()?;
        Some(self.locate_key(&key))
    }

    /// Deepest node whose cube contains the given canonical cube.
    pub fn locate_key(&self, key: &CanonicalCube) -> NodeId {
        let mut u = self.root();
        while let Some(c) = self.child_containing(u, key) {
            u = c;
        }
        u
    }

    /// Nodes realizing the grid approximation of `region` at `delta`: starting
    /// from the coarse cells at `delta = 1`, descend through stored nodes
    /// meeting the region until reaching the target level or a leaf.
    pub fn nodes_realizing_grid_approx(&self, region: &Region, delta: f64) -> Realization {
        let target = grid_level(region, delta);
        let coarse_level = grid_level(region, 1.0).min(target);
        let mut out = Realization::default();
        let mut stack = Vec::new();
        for cell in crate::geom::cells_at_level(region, coarse_level, crate::geom::TOUCH_TOL) {
            match self.cell_query(&cell) {
                CellQuery::Exact(v) => stack.push(v),
                CellQuery::Between { outer, inner } => {
                    out.nodes.push(outer);
                    stack.push(inner);
                }
                CellQuery::Inside(u) => out.nodes.push(u),
            }
        }
        while let Some(u) = stack.pop() {
            let node = &self.nodes[u];
            if !region.touches_cube(&node.cube) {
                continue;
            }
            if node.cube.level >= target || node.children.is_empty() {
                out.nodes.push(u);
            } else {
                out.containers.push(u);
                stack.extend(node.children.iter().copied());
            }
        }
        out.nodes.sort_unstable();
        out.nodes.dedup();
        out.containers.sort_unstable();
        out.containers.dedup();
        out
    }

    /// Counts stored points of `ball(center, radius)`, adding whole subtrees
    /// once their cube diameter drops to `cell_delta * 2 * radius`. The result
    /// includes every point of the ball and only points within
    /// `radius * (1 + 2 * cell_delta)` of `center`.
    pub fn range_hits(&self, center: &[f64], radius: f64, cell_delta: f64) -> RangeHits {
        self.range_walk(center, radius, cell_delta, true)
    }

    /// Like [`Self::range_hits`], but a whole subtree is only taken once its
    /// cube diameter is at most `cell_delta * 2 * radius`, so every counted
    /// node is small even deep inside the ball.
    pub fn range_cells(&self, center: &[f64], radius: f64, cell_delta: f64) -> RangeHits {
        self.range_walk(center, radius, cell_delta, false)
    }

    fn range_walk(&self, center: &[f64], radius: f64, cell_delta: f64, take_contained: bool) -> RangeHits {
        let mut out = RangeHits::default();
        let Some(pts) = self.points.as_ref() else {
            return out;
        };
        let region = Region::ball(center, radius);
        let cell_diam = cell_delta * 2.0 * radius;
        let mut stack = vec![self.root()];
        while let Some(u) = stack.pop() {
            let node = &self.nodes[u];
            if pts.count[u] == 0 {
                continue;
            }
            let gap = region.dist_to_cube(&node.cube);
            if gap > crate::geom::TOUCH_TOL {
                continue;
            }
            let whole = gap <= 0.0
                && (node.cube.diameter() <= cell_diam
                    || (take_contained && region.contains_cube(&node.cube)));
            if whole {
                out.total += pts.count[u];
                out.hits.push(RangeHit { node: u, count: pts.count[u], whole: true });
                continue;
            }
            let own = pts.leaf_points[u]
                .iter()
                .filter(|&&i| math::dist(&pts.coords[i], center) <= radius)
                .count();
            if own > 0 {
                out.total += own;
                out.hits.push(RangeHit { node: u, count: own, whole: false });
            }
            stack.extend(node.children.iter().copied());
        }
        out
    }

    /// Merges two trees over the same dimension.
    pub fn overlay(a: &CompressedQuadtree, b: &CompressedQuadtree) -> Result<Overlay> {
        if a.dim != b.dim {
            return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
        }
        let cubes = a.nodes.iter().chain(&b.nodes).map(|n| n.cube.clone());
        let tree = CompressedQuadtree::build_from_cubes(a.dim, cubes)?;
        let mut from_a = vec![0; tree.len()];
        let mut from_b = vec![0; tree.len()];
        for id in 0..tree.len() {
            let cube = &tree.nodes[id].cube;
            let parent = tree.nodes[id].parent;
            from_a[id] = a.find(cube).unwrap_or_else(|| parent.map_or(0, |p| from_a[p]));
            from_b[id] = b.find(cube).unwrap_or_else(|| parent.map_or(0, |p| from_b[p]));
        }
        Ok(Overlay { tree, from_a, from_b })
    }

    /// One line per node: `level coords... tag`.
    pub fn dump<F>(&self, mut tag: F) -> String
    where
        F: FnMut(NodeId) -> String,
    {
        let mut s = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            let _ = write!(s, "{}", node.cube.level);
            for c in &node.cube.coords {
                let _ = write!(s, " {c}");
            }
            let _ = writeln!(s, " {}", tag(id));
        }
        s
    }

    /// Structural self-check used by tests and the audit command.
    pub fn check_invariants(&self) -> Result<()> {
        for (id, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                let child = &self.nodes[c].cube;
                if !(node.cube.contains(child) && child.level > node.cube.level) {
                    return Err(Error::Internal(format!("node {id} does not strictly contain child {c}")));
                }
                if self.nodes[c].parent != Some(id) {
                    return Err(Error::Internal(format!("parent link of {c} is wrong")));
                }
            }
            for (i, &x) in node.children.iter().enumerate() {
                for &y in &node.children[i + 1..] {
                    let l = CanonicalCube::lca(&self.nodes[x].cube, &self.nodes[y].cube);
                    if l != node.cube {
                        return Err(Error::Internal(format!("children {x}, {y} of {id} share a deeper ancestor")));
                    }
                }
            }
            if let Some(p) = &self.points {
                let sum: usize = node.children.iter().map(|&c| p.count[c]).sum::<usize>()
                    + p.leaf_points[id].len();
                if sum != p.count[id] {
                    return Err(Error::Internal(format!("count mismatch at node {id}")));
                }
            }
        }
        Ok(())
    }
}
