use std::f64::consts::PI;

use mimo_placement::placement::{random_feasible_geometry, restart_rng, ula_geometry};
use mimo_placement::scenario::{ArrayGeometry, PlacementConstraints, Point, TargetParams};
use mimo_placement::sdp::{doa_spread, place_single_target, rotate_solution};
use proptest::prelude::*;

fn target(theta: f64) -> TargetParams {
    TargetParams { cell: 28, theta, beta: 0.33, xi: 3.0, zeta: 3.0 }
}

fn doa_direction(theta: f64) -> Point {
    Point::new(theta.cos(), -theta.sin())
}

fn min_ratio(count: usize) -> f64 {
    match count {
        0..=3 => 1.0,
        4 => 2f64.sqrt(),
        _ => (1.0 + 5f64.sqrt()) / 2.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // The best achievable spread does not depend on where the target is.
    #[test]
    fn optimal_spread_is_doa_independent(theta in -PI..PI) {
        let c = PlacementConstraints::for_wavelength(0.3);
        let template = ArrayGeometry::separate(vec![Point::zeros(); 2], vec![Point::zeros(); 2]);
        let sol = place_single_target(&target(theta), &template, &c, 1e-8, 1).unwrap();
        prop_assert!((sol.achieved_cost - 1.44).abs() < 1e-6);
        prop_assert!(c.max_violation(&sol.geometry) < 1e-8);
    }

    #[test]
    fn rotating_the_array_follows_the_doa(theta in -PI..PI, shift in -PI..PI) {
        let g = ula_geometry(4, 0.3);
        let before = doa_spread(&g, doa_direction(theta));
        let after = doa_spread(&rotate_solution(&g, -shift), doa_direction(theta + shift));
        prop_assert!((before - after).abs() < 1e-12);
    }

    // Either a layout inside the rings or an error. The smallest workable
    // outer/inner ratio is 1 up to three points, sqrt(2) for four (square)
    // and the golden ratio for five (pentagon); the search may give up a
    // little above that.
    #[test]
    fn random_layouts_respect_the_rings(seed in 0u64..10_000, count in 2usize..6, d in 0.1..0.5f64, ratio in 1.05..3.0f64) {
        let c = PlacementConstraints::uniform(d, d * ratio);
        match random_feasible_geometry(&ula_geometry(count, 0.3), &c, &mut restart_rng(seed, 0)) {
            Ok(g) => {
                prop_assert!(c.max_violation(&g) < 1e-8);
                prop_assert!(g.centroid_sum().norm() < 1e-9);
            }
            Err(_) => prop_assert!(ratio < 1.1 * min_ratio(count), "count {count} ratio {ratio}"),
        }
    }
}
