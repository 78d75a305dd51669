use std::f64::consts::PI;

use tmsurf_core::green::oracle::{sphere_robin_constant, torus_green, torus_robin_constant};
use tmsurf_core::green::{radial_profile, solve_green, upper_bound, GreenOptions};
use tmsurf_core::{build_flat_torus, build_sphere};

/// Robin constant of the unit square torus from the Kronecker limit formula,
/// `A = −log(2π η(i)²)/(2π)`, with `η` from its product expansion.
fn eta_product_robin() -> f64 {
    let q = (-2.0 * PI).exp();
    let mut log_eta = -2.0 * PI / 24.0;
    for n in 1..50 {
        log_eta += (1.0 - q.powi(n)).ln();
    }
    -((2.0 * PI).ln() + 2.0 * log_eta) / (2.0 * PI)
}

#[test]
fn oracles_agree() {
    let a = eta_product_robin();
    assert!((a - (-0.208_577_793_243_501_34)).abs() < 1e-14, "{a}");
    assert!((torus_robin_constant() - a).abs() < 1e-12);
}

#[test]
fn torus_robin_constant_n128() {
    let m = build_flat_torus(128).unwrap();
    let g = solve_green(&m, 0, 0.0, 2.0, &GreenOptions::default()).unwrap();
    let a = g.a_x0.unwrap();
    let oracle = eta_product_robin();
    assert!((a - oracle).abs() / oracle.abs() < 0.05, "{a} vs {oracle}");
    let b = g.stability_fit.as_ref().unwrap().a_x0;
    assert!((a - b).abs() / a.abs() < 0.02, "{a} vs {b}");
    assert!(g.equation_residual < 1e-8);
    let ub = upper_bound(&m, &g).unwrap();
    let ub_oracle = 1.0 + PI * (1.0 + 4.0 * PI * oracle).exp();
    assert!((ub - ub_oracle).abs() / ub_oracle < 0.05);
}

#[test]
fn torus_green_matches_lattice_sum_away_from_source() {
    let m = build_flat_torus(64).unwrap();
    let g = solve_green(&m, 0, 0.0, 2.0, &GreenOptions::default()).unwrap();
    let c = m.vertices()[0];
    let mut worst: f64 = 0.0;
    for (i, q) in m.vertices().iter().enumerate() {
        let d = [q[0] - c[0], q[1] - c[1]];
        let dw = [d[0] - d[0].round(), d[1] - d[1].round()];
        if (dw[0] * dw[0] + dw[1] * dw[1]).sqrt() < 0.2 {
            continue;
        }
        worst = worst.max((g.g[i] - torus_green(d)).abs());
    }
    assert!(worst < 2e-3, "{worst}");
}

#[test]
fn translation_invariance() {
    let n = 32;
    let m = build_flat_torus(n).unwrap();
    let opts = GreenOptions::default();
    let a = solve_green(&m, 0, 0.0, 2.0, &opts).unwrap();
    // vertex (i, j) sits at index j·n + i
    let (si, sj) = (5usize, 11usize);
    let b = solve_green(&m, sj * n + si, 0.0, 2.0, &opts).unwrap();
    for j in 0..n {
        for i in 0..n {
            let moved = ((j + sj) % n) * n + (i + si) % n;
            assert!((a.g[j * n + i] - b.g[moved]).abs() < 1e-8);
        }
    }
}

#[test]
fn small_alpha_is_continuous() {
    let m = build_flat_torus(32).unwrap();
    let opts = GreenOptions::default();
    let g0 = solve_green(&m, 0, 0.0, 2.0, &opts).unwrap();
    for p in [2.0, 3.0] {
        let g1 = solve_green(&m, 0, 1e-4, p, &opts).unwrap();
        let d: f64 =
            g0.g.values()
                .iter()
                .zip(g1.g.values())
                .zip(m.mass())
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        assert!(d < 1e-2, "{d}");
        assert!(g1.equation_residual < 1e-8);
        assert!(!g1.iteration_history.is_empty());
    }
}

#[test]
fn alpha_beyond_eigenvalue_fails_to_converge() {
    let m = build_flat_torus(16).unwrap();
    let opts = GreenOptions {
        max_iter: 200,
        ..Default::default()
    };
    let err = solve_green(&m, 0, 100.0, 2.0, &opts).unwrap_err();
    assert!(matches!(err, tmsurf_core::Error::NonConvergence { .. }), "{err}");
}

#[test]
fn sphere_robin_constant_level5() {
    let m = build_sphere(5).unwrap();
    let g = solve_green(&m, 0, 0.0, 2.0, &GreenOptions::default()).unwrap();
    let a = g.a_x0.unwrap();
    let oracle = sphere_robin_constant();
    assert!((a - oracle).abs() < 0.05 * oracle.abs(), "{a} vs {oracle}");
}

#[test]
fn sigma_is_small_near_source() {
    let m = build_flat_torus(128).unwrap();
    let g = solve_green(&m, 0, 0.0, 2.0, &GreenOptions::default()).unwrap();
    let fit = g.fit.as_ref().unwrap();
    let inner = g.sigma_samples.first().unwrap();
    assert!(inner.0 >= fit.r_inner);
    assert!(inner.1.abs() < 1e-3, "{inner:?}");
    let prof = radial_profile(&m, &g, 0.1).unwrap();
    assert!(prof.windows(2).all(|w| w[0].0 <= w[1].0));
}
