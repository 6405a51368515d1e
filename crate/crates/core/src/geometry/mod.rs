//! Hausdorff-family distances over finite sets of pixel coordinates.
//!
//! For point sets `A` and `B`:
//!
//! - directed Hausdorff: `h(A,B) = max_{a∈A} min_{b∈B} ||a − b||`
//! - Hausdorff: `H(A,B) = max(h(A,B), h(B,A))`
//! - directed modified Hausdorff: `h_mod(A,B) = (1/|A|) Σ_{a∈A} min_{b∈B} ||a − b||`
//! - modified Hausdorff: `max(h_mod(A,B), h_mod(B,A))`
//!
//! All nearest-neighbour selection happens on integer keys (squared
//! distances for the Euclidean norm), so min/max choices are exact and the
//! square root is taken once per selected value. The brute-force routines
//! and the [`DistanceGrid`] lookups therefore agree bit-for-bit.

mod grid;

pub use grid::DistanceGrid;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("distance requested on an empty point set")]
    EmptySet,
    #[error("point ({x}, {y}) lies outside the {width}x{height} grid")]
    OutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
}

impl GeometryError {
    pub fn code(&self) -> &'static str {
        match self {
            GeometryError::EmptySet => "EMPTY_SET",
            GeometryError::OutOfBounds { .. } => "OUT_OF_BOUNDS",
        }
    }
}

/// Integer pixel coordinate: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Point { x, y }
    }

    fn row_major_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.row_major_key().cmp(&other.row_major_key())
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A set of distinct points kept sorted by `(y, x)`.
///
/// Construction sorts and deduplicates, so two sets holding the same points
/// compare equal and iterate identically. An empty set can be built but every
/// distance routine rejects it with [`GeometryError::EmptySet`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    pub fn new(mut points: Vec<Point>) -> Self {
        points.sort_unstable();
        points.dedup();
        PointSet { points }
    }

    /// Wraps points already in strictly increasing `(y, x)` order.
    ///
    /// Returns `None` when the order is violated.
    pub fn from_sorted(points: Vec<Point>) -> Option<Self> {
        if points.windows(2).all(|w| w[0] < w[1]) {
            Some(PointSet { points })
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.points.binary_search(&p).is_ok()
    }

    /// Smallest `(width, height)` grid that contains every point.
    pub fn extent(&self) -> (u32, u32) {
        let w = self.points.iter().map(|p| p.x + 1).max().unwrap_or(0);
        // sorted by row, so the last point has the largest y
        let h = self.points.last().map(|p| p.y + 1).unwrap_or(0);
        (w, h)
    }

    /// Shifts every point by `(dx, dy)`; `None` if any coordinate would leave `u32`.
    pub fn translated(&self, dx: i64, dy: i64) -> Option<PointSet> {
        let points = self
            .points
            .iter()
            .map(|p| {
                let x = u32::try_from(p.x as i64 + dx).ok()?;
                let y = u32::try_from(p.y as i64 + dy).ok()?;
                Some(Point::new(x, y))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(PointSet::new(points))
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: u32) -> PointSet {
        PointSet::new(
            self.points
                .iter()
                .map(|p| Point::new(p.x * factor, p.y * factor))
                .collect(),
        )
    }

    fn non_empty(&self) -> Result<&Self, GeometryError> {
        if self.points.is_empty() {
            Err(GeometryError::EmptySet)
        } else {
            Ok(self)
        }
    }
}

impl FromIterator<Point> for PointSet {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        PointSet::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a PointSet {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Euclidean,
    Manhattan,
    Chebyshev,
}

impl NormKind {
    /// Integer comparison key for `||a − b||`: the squared distance for
    /// [`NormKind::Euclidean`], the distance itself otherwise. Monotone in
    /// the true distance.
    #[inline]
    pub fn key(self, a: Point, b: Point) -> u64 {
        let dx = (a.x as i64 - b.x as i64).unsigned_abs();
        let dy = (a.y as i64 - b.y as i64).unsigned_abs();
        match self {
            NormKind::Euclidean => dx * dx + dy * dy,
            NormKind::Manhattan => dx + dy,
            NormKind::Chebyshev => dx.max(dy),
        }
    }

    /// Converts a key produced by [`NormKind::key`] into a distance.
    #[inline]
    pub fn key_to_distance(self, key: u64) -> f64 {
        match self {
            NormKind::Euclidean => (key as f64).sqrt(),
            NormKind::Manhattan | NormKind::Chebyshev => key as f64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Euclidean => "euclidean",
            NormKind::Manhattan => "manhattan",
            NormKind::Chebyshev => "chebyshev",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(NormKind::Euclidean),
            "manhattan" | "l1" => Ok(NormKind::Manhattan),
            "chebyshev" | "linf" => Ok(NormKind::Chebyshev),
            other => Err(format!("unknown norm '{other}'")),
        }
    }
}

pub fn point_distance(a: Point, b: Point, norm: NormKind) -> f64 {
    norm.key_to_distance(norm.key(a, b))
}

fn nearest_key(a: Point, b: &PointSet, norm: NormKind) -> u64 {
    let mut best = u64::MAX;
    for &q in b.points() {
        let k = norm.key(a, q);
        if k < best {
            best = k;
            if best == 0 {
                break;
            }
        }
    }
    best
}

/// `max_{a∈A} min_{b∈B} ||a − b||`, by exhaustive search.
pub fn directed_hausdorff(a: &PointSet, b: &PointSet, norm: NormKind) -> Result<f64, GeometryError> {
    let (a, b) = (a.non_empty()?, b.non_empty()?);
    let worst = a.iter().map(|&p| nearest_key(p, b, norm)).max().unwrap_or(0);
    Ok(norm.key_to_distance(worst))
}

pub fn hausdorff(a: &PointSet, b: &PointSet, norm: NormKind) -> Result<f64, GeometryError> {
    let forward = directed_hausdorff(a, b, norm)?;
    let backward = directed_hausdorff(b, a, norm)?;
    Ok(forward.max(backward))
}

/// Mean over `A` of the distance to the nearest point of `B`.
///
/// Per-point distances are summed in `A`'s `(y, x)` order, then divided by `|A|`.
pub fn modified_directed_hausdorff(
    a: &PointSet,
    b: &PointSet,
    norm: NormKind,
) -> Result<f64, GeometryError> {
    let (a, b) = (a.non_empty()?, b.non_empty()?);
    let sum: f64 = a
        .iter()
        .map(|&p| norm.key_to_distance(nearest_key(p, b, norm)))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `max(h_mod(A,B), h_mod(B,A))`. Symmetric but not a metric.
pub fn modified_hausdorff(a: &PointSet, b: &PointSet, norm: NormKind) -> Result<f64, GeometryError> {
    let forward = modified_directed_hausdorff(a, b, norm)?;
    let backward = modified_directed_hausdorff(b, a, norm)?;
    Ok(forward.max(backward))
}

pub fn build_distance_grid(
    b: &PointSet,
    width: u32,
    height: u32,
    norm: NormKind,
) -> Result<DistanceGrid, GeometryError> {
    DistanceGrid::build(b, width, height, norm)
}

/// Grid-accelerated [`directed_hausdorff`] from `a` to the grid's reference set.
pub fn directed_hausdorff_fast(a: &PointSet, grid: &DistanceGrid) -> Result<f64, GeometryError> {
    let a = a.non_empty()?;
    let mut worst = 0u64;
    for &p in a.points() {
        worst = worst.max(grid.key_at(p)?);
    }
    Ok(grid.norm().key_to_distance(worst))
}

/// Grid-accelerated [`modified_directed_hausdorff`]; same summation order.
pub fn modified_directed_hausdorff_fast(a: &PointSet, grid: &DistanceGrid) -> Result<f64, GeometryError> {
    let a = a.non_empty()?;
    let norm = grid.norm();
    let mut sum = 0.0f64;
    for &p in a.points() {
        sum += norm.key_to_distance(grid.key_at(p)?);
    }
    Ok(sum / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(u32, u32)]) -> PointSet {
        points.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn point_distance_examples() {
        let o = Point::new(0, 0);
        let p = Point::new(3, 4);
        assert_eq!(point_distance(o, p, NormKind::Euclidean), 5.0);
        assert_eq!(point_distance(o, p, NormKind::Manhattan), 7.0);
        assert_eq!(point_distance(o, p, NormKind::Chebyshev), 4.0);
        for norm in [NormKind::Euclidean, NormKind::Manhattan, NormKind::Chebyshev] {
            assert_eq!(point_distance(Point::new(7, 2), Point::new(7, 2), norm), 0.0);
            assert_eq!(point_distance(p, o, norm), point_distance(o, p, norm));
        }
    }

    #[test]
    fn point_set_sorts_and_dedups() {
        let s = set(&[(5, 1), (0, 2), (3, 1), (5, 1)]);
        assert_eq!(s.points(), &[Point::new(3, 1), Point::new(5, 1), Point::new(0, 2)]);
        assert_eq!(s.extent(), (6, 3));
        assert!(PointSet::from_sorted(vec![Point::new(1, 0), Point::new(0, 0)]).is_none());
    }

    #[test]
    fn worked_two_point_example() {
        let a = set(&[(0, 0), (10, 0)]);
        let b = set(&[(0, 0)]);
        let e = NormKind::Euclidean;
        assert_eq!(directed_hausdorff(&a, &b, e).unwrap(), 10.0);
        assert_eq!(directed_hausdorff(&b, &a, e).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &b, e).unwrap(), 10.0);
        assert_eq!(modified_directed_hausdorff(&a, &b, e).unwrap(), 5.0);
        assert_eq!(modified_hausdorff(&a, &b, e).unwrap(), 5.0);
    }

    #[test]
    fn singletons_reduce_to_point_distance() {
        let a = set(&[(0, 0)]);
        let b = set(&[(3, 4)]);
        assert_eq!(directed_hausdorff(&a, &b, NormKind::Euclidean).unwrap(), 5.0);
        assert_eq!(modified_directed_hausdorff(&a, &b, NormKind::Euclidean).unwrap(), 5.0);
    }

    #[test]
    fn identical_sets_are_at_zero() {
        let a = set(&[(1, 2), (4, 4), (9, 0)]);
        for norm in [NormKind::Euclidean, NormKind::Manhattan, NormKind::Chebyshev] {
            assert_eq!(directed_hausdorff(&a, &a, norm).unwrap(), 0.0);
            assert_eq!(hausdorff(&a, &a, norm).unwrap(), 0.0);
            assert_eq!(modified_directed_hausdorff(&a, &a, norm).unwrap(), 0.0);
            assert_eq!(modified_hausdorff(&a, &a, norm).unwrap(), 0.0);
        }
    }

    #[test]
    fn empty_sets_are_rejected() {
        let a = set(&[(1, 1)]);
        let empty = PointSet::default();
        let e = NormKind::Euclidean;
        assert_eq!(directed_hausdorff(&empty, &a, e), Err(GeometryError::EmptySet));
        assert_eq!(directed_hausdorff(&a, &empty, e), Err(GeometryError::EmptySet));
        assert_eq!(hausdorff(&a, &empty, e), Err(GeometryError::EmptySet));
        assert_eq!(modified_directed_hausdorff(&empty, &a, e), Err(GeometryError::EmptySet));
        assert_eq!(modified_hausdorff(&empty, &empty, e), Err(GeometryError::EmptySet));
        let grid = build_distance_grid(&a, 4, 4, e).unwrap();
        assert_eq!(directed_hausdorff_fast(&empty, &grid), Err(GeometryError::EmptySet));
    }

    #[test]
    fn fast_path_on_worked_example() {
        let a = set(&[(0, 0), (10, 0)]);
        let b = set(&[(0, 0)]);
        let grid = build_distance_grid(&b, 16, 16, NormKind::Euclidean).unwrap();
        assert_eq!(directed_hausdorff_fast(&a, &grid).unwrap(), 10.0);
        assert_eq!(modified_directed_hausdorff_fast(&a, &grid).unwrap(), 5.0);
        assert_eq!(directed_hausdorff_fast(&b, &grid).unwrap(), 0.0);
    }

    #[test]
    fn fast_path_rejects_points_outside_grid() {
        let b = set(&[(0, 0)]);
        let grid = build_distance_grid(&b, 8, 8, NormKind::Euclidean).unwrap();
        let err = directed_hausdorff_fast(&set(&[(8, 0)]), &grid).unwrap_err();
        assert_eq!(err.code(), "OUT_OF_BOUNDS");
    }

    #[test]
    fn norm_parses() {
        assert_eq!("L1".parse::<NormKind>().unwrap(), NormKind::Manhattan);
        assert_eq!(" Euclidean ".parse::<NormKind>().unwrap(), NormKind::Euclidean);
        assert!("l3".parse::<NormKind>().is_err());
        assert_eq!(NormKind::default(), NormKind::Euclidean);
    }
}
