use tmsurf_core::compare::{bound_compare, oracle_robin_constant};
use tmsurf_core::extremal::{continuation, MaximizeOptions};
use tmsurf_core::green::solve_green;
use tmsurf_core::{build_flat_torus, build_sphere, Geometry, GreenOptions};

#[test]
fn torus_path_stays_below_bound() {
    let m = build_flat_torus(32).unwrap();
    let path = continuation(&m, 0.0, 2.0, &[1.0, 0.5], &MaximizeOptions::default()).unwrap();
    let green = solve_green(&m, path[0].x_eps, 0.0, 2.0, &GreenOptions::default()).unwrap();
    let r = bound_compare(&m, &path, &green, 1e-9).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.violations.is_empty());
    assert!(r.rows.iter().all(|row| !row.crossing && row.gap > 0.0));
    assert!(r.oracle_relative_difference.unwrap() < 0.05);
    let empty = bound_compare(&m, &[], &green, 0.0).unwrap();
    assert!(empty.rows.is_empty() && empty.violations.is_empty());
}

#[test]
fn oracle_only_at_alpha_zero_on_built_in_surfaces() {
    assert!(oracle_robin_constant(Geometry::Embedded).is_none());
    let m = build_sphere(3).unwrap();
    let g = solve_green(&m, 0, 0.5, 2.0, &GreenOptions::default()).unwrap();
    let r = bound_compare(&m, &[], &g, 0.0).unwrap();
    assert!(r.a_oracle.is_none());
    let small = build_flat_torus(8).unwrap();
    assert!(bound_compare(&small, &[], &g, 0.0).is_err());
}
