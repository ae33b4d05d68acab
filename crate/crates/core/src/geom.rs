//! Balls, distances, canonical (dyadic) cubes, grid approximations, the
//! unit-cube normalization and the lifted product-norm space.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math::{self, ceil, floor, floor_log2, pow2, sqrt};

/// Deepest canonical level. Coordinates at this level are exact integers in a
/// double, so every cube identity and parent/child relation is float-free.
pub const MAX_LEVEL: u32 = 52;

/// Absolute slack used when a traversal must not miss a cell that touches a
/// region only on its boundary. Final answers never rely on it.
pub(crate) const TOUCH_TOL: f64 = 1e-12;

/// A closed ball. Points are balls of radius zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !radius.is_finite() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if radius < 0.0 {
            return Err(Error::InvalidParameter(format!("negative radius {radius}")));
        }
        if center.is_empty() {
            return Err(Error::InvalidParameter("zero-dimensional ball".into()));
        }
        Ok(Ball { center, radius })
    }

    pub fn point(center: Vec<f64>) -> Self {
        Ball { center, radius: 0.0 }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Distance from `q` to this ball; dimension is assumed to match.
    #[inline]
    pub fn distance(&self, q: &[f64]) -> f64 {
        let d = math::dist(q, &self.center) - self.radius;
        if d > 0.0 {
            d
        } else {
            0.0
        }
    }

    /// True when `self` lies completely inside `ball(center, radius)`.
    pub fn inside(&self, center: &[f64], radius: f64) -> bool {
        math::dist(&self.center, center) + self.radius <= radius
    }
}

/// `max(|q - c| - r, 0)`.
pub fn dist_point_ball(q: &[f64], b: &Ball) -> Result<f64> {
    if q.len() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), found: q.len() });
    }
    Ok(b.distance(q))
}

/// Uniform scaling followed by translation: `u = scale * p + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    pub scale: f64,
    pub offset: Vec<f64>,
}

impl Transform {
    pub fn identity(dim: usize) -> Self {
        Transform { scale: 1.0, offset: vec![0.0; dim] }
    }

    pub fn apply_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.offset).map(|(x, o)| self.scale * x + o).collect()
    }

    pub fn apply_ball(&self, b: &Ball) -> Ball {
        Ball { center: self.apply_point(&b.center), radius: self.scale * b.radius }
    }

    pub fn invert_point(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.offset).map(|(x, o)| (x - o) / self.scale).collect()
    }

    pub fn invert_ball(&self, b: &Ball) -> Ball {
        Ball { center: self.invert_point(&b.center), radius: b.radius / self.scale }
    }

    /// Converts a unit-cube length back to original units.
    pub fn invert_length(&self, len: f64) -> f64 {
        len / self.scale
    }
}

/// A ball set mapped into `[1/2 - delta, 1/2 + delta]^d` with `delta = eps / 4`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedInstance {
    pub balls: Vec<Ball>,
    pub transform: Transform,
    pub epsilon_floor: f64,
    pub dim: usize,
    pub c_d: usize,
}

impl NormalizedInstance {
    /// Half-width of the box the balls were squeezed into.
    pub fn delta(&self) -> f64 {
        self.epsilon_floor / 4.0
    }

    /// Wraps balls that already live in the unit cube without rescaling.
    pub fn from_unit_balls(balls: Vec<Ball>, c_d: usize) -> Result<Self> {
        let dim = check_balls(&balls)?;
        for b in &balls {
            if b.center.iter().any(|&c| !(0.0..1.0).contains(&c)) {
                return Err(Error::OutsideUnitCube);
            }
        }
        Ok(NormalizedInstance {
            balls,
            transform: Transform::identity(dim),
            epsilon_floor: 1.0,
            dim,
            c_d: packing_constant(dim, Some(c_d))?,
        })
    }
}

fn check_balls(balls: &[Ball]) -> Result<usize> {
    let first = balls.first().ok_or(Error::EmptyInput)?;
    let dim = first.dim();
    for b in balls {
        if b.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: b.dim() });
        }
        if !b.radius.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        if b.radius < 0.0 {
            return Err(Error::InvalidParameter(format!("negative radius {}", b.radius)));
        }
    }
    Ok(dim)
}

/// Translates and uniformly scales `balls` so their bounding cube becomes
/// `[1/2 - eps/4, 1/2 + eps/4]^d`. Uses `c_d = 3^d`.
pub fn normalize(balls: &[Ball], eps: f64) -> Result<NormalizedInstance> {
    normalize_with(balls, eps, None)
}

pub fn normalize_with(balls: &[Ball], eps: f64, c_d: Option<usize>) -> Result<NormalizedInstance> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} not in (0, 1)")));
    }
    let dim = check_balls(balls)?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for b in balls {
        for i in 0..dim {
            lo[i] = lo[i].min(b.center[i] - b.radius);
            hi[i] = hi[i].max(b.center[i] + b.radius);
        }
    }
    let extent = (0..dim).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let delta = eps / 4.0;
    let scale = if extent > 0.0 { 2.0 * delta / extent } else { 1.0 };
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::NonFinite);
    }
    let offset = (0..dim).map(|i| 0.5 - scale * 0.5 * (lo[i] + hi[i])).collect();
    let transform = Transform { scale, offset };
    let balls = balls.iter().map(|b| transform.apply_ball(b)).collect();
    Ok(NormalizedInstance {
        balls,
        transform,
        epsilon_floor: eps,
        dim,
        c_d: packing_constant(dim, c_d)?,
    })
}

/// Upper bound on how many disjoint balls of radius `>= r` can meet a ball of
/// radius `r`. Defaults to `3^d`.
pub fn packing_constant(dim: usize, override_value: Option<usize>) -> Result<usize> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    match override_value {
        Some(c) if c < 2 => Err(Error::InvalidParameter(format!("c_d override {c} < 2"))),
        Some(c) => Ok(c),
        None => 3usize
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidParameter(format!("3^{dim} overflows"))),
    }
}

/// A dyadic cell `[coords * 2^-level, (coords + 1) * 2^-level]` of the unit cube.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCube {
    pub level: u32,
    pub coords: Vec<u64>,
}

impl CanonicalCube {
    pub fn root(dim: usize) -> Self {
        CanonicalCube { level: 0, coords: vec![0; dim] }
    }

    pub fn new(level: u32, coords: Vec<u64>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::InvalidParameter(format!("level {level} > {MAX_LEVEL}")));
        }
        if coords.iter().any(|&c| c >> level != 0) {
            return Err(Error::OutsideUnitCube);
        }
        Ok(CanonicalCube { level, coords })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn side(&self) -> f64 {
        pow2(-(self.level as i32))
    }

    #[inline]
    pub fn diameter(&self) -> f64 {
        self.side() * sqrt(self.dim() as f64)
    }

    #[inline]
    pub fn lower(&self, axis: usize) -> f64 {
        self.coords[axis] as f64 * self.side()
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.coords.iter().map(|&c| (c as f64 + 0.5) * s).collect()
    }

    /// Lower corner expressed at [`MAX_LEVEL`].
    #[inline]
    fn deep(&self, axis: usize) -> u64 {
        self.coords[axis] << (MAX_LEVEL - self.level)
    }

    /// Containment of canonical cubes (reflexive).
    pub fn contains(&self, other: &CanonicalCube) -> bool {
        other.level >= self.level
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(&a, &b)| b >> (other.level - self.level) == a)
    }

    pub fn parent(&self) -> Option<CanonicalCube> {
        (self.level > 0).then(|| self.ancestor(self.level - 1))
    }

    /// The canonical cube of level `level <= self.level` containing `self`.
    pub fn ancestor(&self, level: u32) -> CanonicalCube {
        debug_assert!(level <= self.level);
        let shift = self.level - level;
        CanonicalCube { level, coords: self.coords.iter().map(|c| c >> shift).collect() }
    }

    pub fn children(&self) -> Vec<CanonicalCube> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| CanonicalCube {
                level: self.level + 1,
                coords: (0..d).map(|i| (self.coords[i] << 1) | ((mask >> i) & 1) as u64).collect(),
            })
            .collect()
    }

    /// Smallest canonical cube containing both.
    pub fn lca(a: &CanonicalCube, b: &CanonicalCube) -> CanonicalCube {
        let mut level = a.level.min(b.level);
        for i in 0..a.dim() {
            let x = a.deep(i) ^ b.deep(i);
            if x != 0 {
                let shared = x.leading_zeros() - (64 - MAX_LEVEL);
                level = level.min(shared);
            }
        }
        CanonicalCube {
            level,
            coords: (0..a.dim()).map(|i| a.deep(i) >> (MAX_LEVEL - level)).collect(),
        }
    }

    /// Z-order of lower corners, ancestors before descendants.
    pub fn zorder_cmp(&self, other: &CanonicalCube) -> Ordering {
        let mut axis = 0;
        let mut best = 0u64;
        for i in 0..self.dim() {
            let x = self.deep(i) ^ other.deep(i);
            if best < x && best < (best ^ x) {
                axis = i;
                best = x;
            }
        }
        self.deep(axis)
            .cmp(&other.deep(axis))
            .then(self.level.cmp(&other.level))
    }

    /// Half-open membership `[lower, lower + side)` per axis.
    pub fn contains_point(&self, q: &[f64]) -> bool {
        let s = self.side();
        q.iter().zip(&self.coords).all(|(&x, &c)| {
            let lo = c as f64 * s;
            x >= lo && x < lo + s
        })
    }

    /// Euclidean distance from `q` to the closed cube.
    pub fn dist_to_point(&self, q: &[f64]) -> f64 {
        let s = self.side();
        let mut acc = 0.0;
        for (&x, &c) in q.iter().zip(&self.coords) {
            let lo = c as f64 * s;
            let gap = if x < lo {
                lo - x
            } else if x > lo + s {
                x - lo - s
            } else {
                0.0
            };
            acc += gap * gap;
        }
        sqrt(acc)
    }

    /// Distance from `q` to the farthest point of the closed cube.
    pub fn max_dist_to_point(&self, q: &[f64]) -> f64 {
        let s = self.side();
        let mut acc = 0.0;
        for (&x, &c) in q.iter().zip(&self.coords) {
            let lo = c as f64 * s;
            let far = math::abs(x - lo).max(math::abs(lo + s - x));
            acc += far * far;
        }
        sqrt(acc)
    }
}

/// The canonical cube of `level` containing `p` (floor per coordinate).
pub fn grid_cell(level: u32, p: &[f64]) -> Result<CanonicalCube> {
    if level > MAX_LEVEL {
        return Err(Error::InvalidParameter(format!("level {level} > {MAX_LEVEL}")));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if p.iter().any(|&x| !(0.0..1.0).contains(&x)) {
        return Err(Error::OutsideUnitCube);
    }
    let scale = pow2(level as i32);
    Ok(CanonicalCube { level, coords: p.iter().map(|&x| floor(x * scale) as u64).collect() })
}

/// A convex query set: a closed ball or an axis-aligned closed cube.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Cube { lower: Vec<f64>, side: f64 },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball { center: center.to_vec(), radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Cube { lower, .. } => lower.len(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => 2.0 * radius,
            Region::Cube { lower, side } => side * sqrt(lower.len() as f64),
        }
    }

    /// Some point of the region, used when the diameter is zero.
    fn anchor(&self) -> &[f64] {
        match self {
            Region::Ball { center, .. } => center,
            Region::Cube { lower, .. } => lower,
        }
    }

    fn bbox(&self, axis: usize) -> (f64, f64) {
        match self {
            Region::Ball { center, radius } => (center[axis] - radius, center[axis] + radius),
            Region::Cube { lower, side } => (lower[axis], lower[axis] + side),
        }
    }

    /// Distance between the region and a closed canonical cube.
    pub fn dist_to_cube(&self, cube: &CanonicalCube) -> f64 {
        match self {
            Region::Ball { center, radius } => (cube.dist_to_point(center) - radius).max(0.0),
            Region::Cube { lower, side } => {
                let s = cube.side();
                let mut acc = 0.0;
                for (i, &lo) in lower.iter().enumerate() {
                    let clo = cube.lower(i);
                    let gap = (clo - (lo + side)).max(lo - (clo + s)).max(0.0);
                    acc += gap * gap;
                }
                sqrt(acc)
            }
        }
    }

    pub fn intersects_cube(&self, cube: &CanonicalCube) -> bool {
        self.dist_to_cube(cube) <= 0.0
    }

    pub(crate) fn touches_cube(&self, cube: &CanonicalCube) -> bool {
        self.dist_to_cube(cube) <= TOUCH_TOL
    }

    pub fn contains_cube(&self, cube: &CanonicalCube) -> bool {
        match self {
            Region::Ball { center, radius } => cube.max_dist_to_point(center) <= *radius,
            Region::Cube { lower, side } => (0..lower.len()).all(|i| {
                let clo = cube.lower(i);
                clo >= lower[i] && clo + cube.side() <= lower[i] + side
            }),
        }
    }

    pub fn dist_to_point(&self, p: &[f64]) -> f64 {
        match self {
            Region::Ball { center, radius } => (math::dist(p, center) - radius).max(0.0),
            Region::Cube { lower, side } => {
                let mut acc = 0.0;
                for (i, &x) in p.iter().enumerate() {
                    let gap = (lower[i] - x).max(x - lower[i] - side).max(0.0);
                    acc += gap * gap;
                }
                sqrt(acc)
            }
        }
    }

    /// Exact closed intersection test against a ball.
    pub fn intersects_ball(&self, b: &Ball) -> bool {
        match self {
            Region::Ball { center, radius } => math::dist(center, &b.center) <= radius + b.radius,
            Region::Cube { .. } => self.dist_to_point(&b.center) <= b.radius,
        }
    }
}

/// Canonical level whose side is `2^floor(log2(delta * diam / sqrt(d)))`,
/// clamped into `0..=MAX_LEVEL`. Zero-diameter regions map to `MAX_LEVEL`.
pub fn grid_level(region: &Region, delta: f64) -> u32 {
    let t = delta * region.diameter() / sqrt(region.dim() as f64);
    if !(t > 0.0) || !t.is_finite() {
        return if t.is_infinite() { 0 } else { MAX_LEVEL };
    }
    let e = floor_log2(t);
    if e >= 0 {
        0
    } else {
        ((-e) as u32).min(MAX_LEVEL)
    }
}

/// All canonical cells of the grid-approximation level that intersect the
/// region (closed intersection). A zero-diameter region yields the single
/// deepest cube containing its point, if that point is inside the unit cube.
pub fn grid_approx(region: &Region, delta: f64) -> Result<Vec<CanonicalCube>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    Ok(cells_at_level(region, grid_level(region, delta), 0.0))
}

pub(crate) fn cells_at_level(region: &Region, level: u32, tol: f64) -> Vec<CanonicalCube> {
    let dim = region.dim();
    if region.diameter() == 0.0 {
        return match grid_cell(level, region.anchor()) {
            Ok(c) => vec![c],
            Err(_) => Vec::new(),
        };
    }
    let scale = pow2(level as i32);
    let max_index = (scale - 1.0).max(0.0);
    let mut lo = vec![0u64; dim];
    let mut hi = vec![0u64; dim];
    for axis in 0..dim {
        let (a, b) = region.bbox(axis);
        let a = (ceil((a - tol) * scale) - 1.0).clamp(0.0, max_index);
        let b = floor((b + tol) * scale).clamp(0.0, max_index);
        if a > b {
            return Vec::new();
        }
        lo[axis] = a as u64;
        hi[axis] = b as u64;
    }
    let mut out = Vec::new();
    let mut cur = lo.clone();
    loop {
        let cube = CanonicalCube { level, coords: cur.clone() };
        if region.dist_to_cube(&cube) <= tol {
            out.push(cube);
        }
        let mut axis = 0;
        loop {
            if axis == dim {
                return out;
            }
            if cur[axis] < hi[axis] {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo[axis];
            axis += 1;
        }
    }
}

/// A point of `R^{d+1}` under the product norm `|spatial|_2 + |last|`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    pub spatial: Vec<f64>,
    pub last: f64,
}

impl LiftedPoint {
    pub fn sub(&self, other: &LiftedPoint) -> LiftedPoint {
        LiftedPoint {
            spatial: self.spatial.iter().zip(&other.spatial).map(|(a, b)| a - b).collect(),
            last: self.last - other.last,
        }
    }

    pub fn euclidean_norm(&self) -> f64 {
        sqrt(self.spatial.iter().map(|x| x * x).sum::<f64>() + self.last * self.last)
    }
}

/// `ball(c, r) -> (c, r)`.
pub fn lift(b: &Ball) -> LiftedPoint {
    LiftedPoint { spatial: b.center.clone(), last: b.radius }
}

pub fn lift_point(p: &[f64]) -> LiftedPoint {
    LiftedPoint { spatial: p.to_vec(), last: 0.0 }
}

pub fn product_norm(u: &LiftedPoint) -> f64 {
    math::norm(&u.spatial) + math::abs(u.last)
}

/// `|lift(p) - (center, radius)|_+` without allocating.
#[inline]
pub fn lifted_distance(p: &[f64], center: &[f64], radius: f64) -> f64 {
    math::dist(p, center) + math::abs(radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_ball_distance_examples() {
        let b = Ball::new(vec![3.0, 0.0], 1.0).unwrap();
        assert_eq!(dist_point_ball(&[0.0, 0.0], &b).unwrap(), 2.0);
        let b = Ball::new(vec![0.5], 0.05).unwrap();
        assert_eq!(dist_point_ball(&[0.5], &b).unwrap(), 0.0);
        let b = Ball::new(vec![0.5, 0.5], 0.1).unwrap();
        assert_eq!(dist_point_ball(&[0.4, 0.5], &b).unwrap(), 0.0);
        assert!(matches!(
            dist_point_ball(&[0.4], &b),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn normalize_interval_example() {
        let balls = [Ball::point(vec![0.0]), Ball::point(vec![100.0])];
        let inst = normalize(&balls, 0.4).unwrap();
        assert!((inst.transform.scale - 0.002).abs() < 1e-15);
        assert!((inst.transform.offset[0] - 0.4).abs() < 1e-15);
        assert!((inst.balls[0].center[0] - 0.4).abs() < 1e-15);
        assert!((inst.balls[1].center[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn normalize_single_ball_is_centered() {
        let inst = normalize(&[Ball::new(vec![7.0, -3.0], 2.0).unwrap()], 0.5).unwrap();
        assert_eq!(inst.balls[0].center, vec![0.5, 0.5]);
        let inst = normalize(&[Ball::point(vec![7.0, -3.0])], 0.5).unwrap();
        assert_eq!(inst.transform.scale, 1.0);
        assert_eq!(inst.balls[0].center, vec![0.5, 0.5]);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert_eq!(normalize(&[], 0.5), Err(Error::EmptyInput));
        let bad = Ball { center: vec![f64::NAN], radius: 0.0 };
        assert_eq!(normalize(&[bad], 0.5), Err(Error::NonFinite));
        assert!(normalize(&[Ball::point(vec![0.0])], 1.5).is_err());
    }

    #[test]
    fn grid_cell_examples() {
        let c = grid_cell(3, &[0.30, 0.70]).unwrap();
        assert_eq!(c.coords, vec![2, 5]);
        assert_eq!(grid_cell(0, &[0.9, 0.1]).unwrap(), CanonicalCube::root(2));
        assert_eq!(grid_cell(2, &[0.25]).unwrap().lower(0), 0.25);
        assert_eq!(grid_cell(2, &[1.0]), Err(Error::OutsideUnitCube));
    }

    #[test]
    fn grid_approx_disk_example() {
        let cells = grid_approx(&Region::ball(&[0.5, 0.5], 0.1), 1.0).unwrap();
        let mut corners: Vec<(f64, f64)> = cells.iter().map(|c| (c.lower(0), c.lower(1))).collect();
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(corners, vec![(0.375, 0.375), (0.375, 0.5), (0.5, 0.375), (0.5, 0.5)]);
        assert!(cells.iter().all(|c| c.side() == 0.125));
    }

    #[test]
    fn grid_approx_interval_example() {
        let cells = grid_approx(&Region::Cube { lower: vec![0.4], side: 0.2 }, 1.0).unwrap();
        let lowers: Vec<f64> = cells.iter().map(|c| c.lower(0)).collect();
        assert_eq!(lowers, vec![0.375, 0.5]);
    }

    #[test]
    fn grid_approx_of_a_point_is_one_deep_cube() {
        let cells = grid_approx(&Region::ball(&[0.3, 0.6], 0.0), 1.0).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].level, MAX_LEVEL);
        assert!(cells[0].contains_point(&[0.3, 0.6]));
    }

    #[test]
    fn halving_delta_moves_at_most_one_level() {
        let r = Region::ball(&[0.41, 0.52, 0.6], 0.0731);
        let mut delta = 1.0;
        for _ in 0..10 {
            let a = grid_level(&r, delta);
            let b = grid_level(&r, delta / 2.0);
            assert_eq!(b, a + 1);
            delta /= 2.0;
        }
    }

    #[test]
    fn lift_and_product_norm() {
        let u = lift(&Ball::new(vec![0.3, 0.4], 0.1).unwrap());
        assert_eq!(u, LiftedPoint { spatial: vec![0.3, 0.4], last: 0.1 });
        assert_eq!(product_norm(&LiftedPoint { spatial: vec![3.0, 4.0], last: -2.0 }), 7.0);
        let q = [0.0, 0.0];
        let b = Ball::new(vec![3.0, 4.0], 1.0).unwrap();
        let p = product_norm(&lift_point(&q).sub(&lift(&b)));
        assert_eq!(p, 6.0);
        assert!(p >= b.distance(&q) && p <= b.distance(&q) + 2.0 * b.radius);
    }

    #[test]
    fn packing_constant_defaults_and_override() {
        assert_eq!(packing_constant(1, None).unwrap(), 3);
        assert_eq!(packing_constant(2, None).unwrap(), 9);
        assert_eq!(packing_constant(2, Some(5)).unwrap(), 5);
        assert!(packing_constant(2, Some(1)).is_err());
    }

    #[test]
    fn lca_and_containment() {
        let a = CanonicalCube::new(12, vec![1]).unwrap();
        let b = CanonicalCube::new(12, vec![3 << 10]).unwrap();
        assert_eq!(CanonicalCube::lca(&a, &b), CanonicalCube::root(1));
        let c = CanonicalCube::new(3, vec![2, 5]).unwrap();
        let d = CanonicalCube::new(5, vec![9, 22]).unwrap();
        assert!(c.contains(&d));
        assert_eq!(CanonicalCube::lca(&c, &d), c);
        assert_eq!(d.ancestor(3), c);
        assert_eq!(d.parent().unwrap().parent().unwrap(), c);
    }
}
