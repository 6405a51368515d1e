#![allow(dead_code)]

use hannot_core::geometry::{NormKind, Point, PointSet};
use proptest::prelude::*;

/// Exhaustive nearest-point distances from every point of `a` to `b`, in
/// `a`'s `(y, x)` order. Euclidean minima are taken on squared integers and
/// rooted once.
pub fn nearest_distances(a: &PointSet, b: &PointSet, norm: NormKind) -> Vec<f64> {
    a.points()
        .iter()
        .map(|p| {
            let best = b
                .points()
                .iter()
                .map(|q| {
                    let dx = p.x as i64 - q.x as i64;
                    let dy = p.y as i64 - q.y as i64;
                    match norm {
                        NormKind::Euclidean => dx * dx + dy * dy,
                        NormKind::Manhattan => dx.abs() + dy.abs(),
                        NormKind::Chebyshev => dx.abs().max(dy.abs()),
                    }
                })
                .min()
                .expect("non-empty reference set");
            match norm {
                NormKind::Euclidean => (best as f64).sqrt(),
                _ => best as f64,
            }
        })
        .collect()
}

pub fn oracle_directed(a: &PointSet, b: &PointSet, norm: NormKind) -> f64 {
    nearest_distances(a, b, norm).into_iter().fold(0.0, f64::max)
}

pub fn oracle_hausdorff(a: &PointSet, b: &PointSet, norm: NormKind) -> f64 {
    oracle_directed(a, b, norm).max(oracle_directed(b, a, norm))
}

pub fn oracle_modified_directed(a: &PointSet, b: &PointSet, norm: NormKind) -> f64 {
    let mut sum = 0.0;
    for d in nearest_distances(a, b, norm) {
        sum += d;
    }
    sum / a.len() as f64
}

pub fn oracle_modified(a: &PointSet, b: &PointSet, norm: NormKind) -> f64 {
    oracle_modified_directed(a, b, norm).max(oracle_modified_directed(b, a, norm))
}

pub fn point_set(max_coord: u32, max_len: usize) -> impl Strategy<Value = PointSet> {
    prop::collection::vec((0..max_coord, 0..max_coord), 1..=max_len)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

pub fn any_norm() -> impl Strategy<Value = NormKind> {
    prop_oneof![
        Just(NormKind::Euclidean),
        Just(NormKind::Manhattan),
        Just(NormKind::Chebyshev)
    ]
}
