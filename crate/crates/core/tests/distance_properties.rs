mod common;

use common::*;
use hannot_core::geometry::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn brute_force_and_grid_match_oracle(a in point_set(64, 60), b in point_set(64, 60), norm in any_norm()) {
        let grid = build_distance_grid(&b, 64, 64, norm).unwrap();
        let h = oracle_directed(&a, &b, norm);
        let m = oracle_modified_directed(&a, &b, norm);
        prop_assert_eq!(directed_hausdorff(&a, &b, norm).unwrap().to_bits(), h.to_bits());
        prop_assert_eq!(directed_hausdorff_fast(&a, &grid).unwrap().to_bits(), h.to_bits());
        prop_assert_eq!(modified_directed_hausdorff(&a, &b, norm).unwrap().to_bits(), m.to_bits());
        prop_assert_eq!(modified_directed_hausdorff_fast(&a, &grid).unwrap().to_bits(), m.to_bits());
        prop_assert_eq!(hausdorff(&a, &b, norm).unwrap().to_bits(), oracle_hausdorff(&a, &b, norm).to_bits());
        prop_assert_eq!(modified_hausdorff(&a, &b, norm).unwrap().to_bits(), oracle_modified(&a, &b, norm).to_bits());
    }

    #[test]
    fn grid_cells_match_per_cell_scan(b in point_set(48, 30), norm in any_norm()) {
        let grid = build_distance_grid(&b, 48, 48, norm).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                let cell: PointSet = [Point::new(x, y)].into_iter().collect();
                prop_assert_eq!(grid.value_at(Point::new(x, y)).unwrap(), oracle_directed(&cell, &b, norm));
            }
        }
    }

    #[test]
    fn symmetry_is_exact(a in point_set(100, 40), b in point_set(100, 40), norm in any_norm()) {
        prop_assert_eq!(hausdorff(&a, &b, norm).unwrap().to_bits(), hausdorff(&b, &a, norm).unwrap().to_bits());
        prop_assert_eq!(
            modified_hausdorff(&a, &b, norm).unwrap().to_bits(),
            modified_hausdorff(&b, &a, norm).unwrap().to_bits()
        );
    }

    #[test]
    fn identity(a in point_set(100, 40), norm in any_norm()) {
        prop_assert_eq!(hausdorff(&a, &a, norm).unwrap(), 0.0);
        prop_assert_eq!(modified_hausdorff(&a, &a, norm).unwrap(), 0.0);
    }

    #[test]
    fn zero_only_for_equal_sets(a in point_set(8, 6), b in point_set(8, 6)) {
        let e = NormKind::Euclidean;
        prop_assert_eq!(hausdorff(&a, &b, e).unwrap() == 0.0, a == b);
        prop_assert_eq!(modified_hausdorff(&a, &b, e).unwrap() == 0.0, a == b);
    }

    #[test]
    fn triangle_inequality(a in point_set(100, 30), b in point_set(100, 30), c in point_set(100, 30), norm in any_norm()) {
        let ac = hausdorff(&a, &c, norm).unwrap();
        let ab = hausdorff(&a, &b, norm).unwrap();
        let bc = hausdorff(&b, &c, norm).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn domination_chain(a in point_set(100, 40), b in point_set(100, 40), norm in any_norm()) {
        let m = modified_directed_hausdorff(&a, &b, norm).unwrap();
        let h = directed_hausdorff(&a, &b, norm).unwrap();
        let big = hausdorff(&a, &b, norm).unwrap();
        prop_assert!(m <= h);
        prop_assert!(h <= big);
        prop_assert!(modified_hausdorff(&a, &b, norm).unwrap() <= big);
    }

    #[test]
    fn translation_invariance(a in point_set(60, 30), b in point_set(60, 30), dx in 0i64..40, dy in 0i64..40, norm in any_norm()) {
        let ta = a.translated(dx, dy).unwrap();
        let tb = b.translated(dx, dy).unwrap();
        prop_assert_eq!(directed_hausdorff(&a, &b, norm).unwrap(), directed_hausdorff(&ta, &tb, norm).unwrap());
        prop_assert_eq!(hausdorff(&a, &b, norm).unwrap(), hausdorff(&ta, &tb, norm).unwrap());
        prop_assert_eq!(modified_directed_hausdorff(&a, &b, norm).unwrap(), modified_directed_hausdorff(&ta, &tb, norm).unwrap());
        prop_assert_eq!(modified_hausdorff(&a, &b, norm).unwrap(), modified_hausdorff(&ta, &tb, norm).unwrap());
        let grid = build_distance_grid(&b, 60, 60, norm).unwrap();
        let tgrid = build_distance_grid(&tb, 100, 100, norm).unwrap();
        prop_assert_eq!(directed_hausdorff_fast(&a, &grid).unwrap(), directed_hausdorff_fast(&ta, &tgrid).unwrap());
    }

    #[test]
    fn growing_the_target_never_increases_directed(a in point_set(80, 30), b in point_set(80, 30), extra in point_set(80, 30), norm in any_norm()) {
        let grown: PointSet = b.iter().chain(extra.iter()).copied().collect();
        prop_assert!(directed_hausdorff(&a, &grown, norm).unwrap() <= directed_hausdorff(&a, &b, norm).unwrap());
    }
}

#[test]
fn modified_hausdorff_is_not_a_metric() {
    // why no triangle inequality is asserted for the modified variant
    let set = |xs: &[u32]| -> PointSet { xs.iter().map(|&x| Point::new(x, 0)).collect() };
    let a = set(&[1, 9, 10]);
    let b = set(&[0, 1, 9]);
    let c = set(&[0]);
    let e = NormKind::Euclidean;
    let ac = modified_hausdorff(&a, &c, e).unwrap();
    let ab = modified_hausdorff(&a, &b, e).unwrap();
    let bc = modified_hausdorff(&b, &c, e).unwrap();
    assert!(ac > ab + bc, "{ac} {ab} {bc}");
    assert!(hausdorff(&a, &c, e).unwrap() <= hausdorff(&a, &b, e).unwrap() + hausdorff(&b, &c, e).unwrap());
}
