use std::f64::consts::PI;

use tmsurf_core::blowup::*;
use tmsurf_core::calculus::grad_norm_sq;
use tmsurf_core::extremal::{continuation, ElCoefficients, MaximizeOptions};
use tmsurf_core::green::solve_green;
use tmsurf_core::surface::chart::chart_coordinates;
use tmsurf_core::testfn::build_part_iii_family;
use tmsurf_core::{build_flat_torus, build_graded_torus, Field, FunctionalParams, GreenOptions, SurfaceMesh};

/// Graded torus around the origin with `f(|y|)` sampled at the vertices.
fn radial_field(r_scale: f64, f: impl Fn(f64) -> f64) -> (SurfaceMesh, usize, Field) {
    let g = build_graded_torus(32, [0.0, 0.0], r_scale / 10.0).unwrap();
    let c = g.mesh.vertices()[g.center_vertex];
    let u = g.mesh.interpolate(|q| {
        let y = chart_coordinates(g.mesh.geometry(), c, q).unwrap();
        f(y[0].hypot(y[1]))
    });
    (g.mesh, g.center_vertex, u)
}

/// Coefficients whose `r_ε` is `r` for the given `c`, with `α_ε = 4π`.
fn coefficients_for(c: f64, r: f64) -> ElCoefficients {
    ElCoefficients {
        alpha_eps: 4.0 * PI,
        beta_eps: 1.0,
        gamma_eps: 0.0,
        lambda_eps: c * c * (4.0 * PI * c * c).exp() * r * r,
        mu_eps: 0.0,
    }
}

#[test]
fn synthetic_bubble_profile() {
    let (c, r) = (3.0, 0.01);
    let (mesh, center, u) = radial_field(r, |d| c + bubble_value([d / r, 0.0]) / c);
    let coeffs = coefficients_for(c, r);
    assert!((compute_r_eps(&coeffs, c).unwrap() - r).abs() < 1e-15);
    let t = rescaled_profiles(&mesh, &u, &coeffs, 5.0, 20, 8).unwrap();
    assert_eq!(u.argmax(), center);
    assert_eq!(t.samples[0].psi, 1.0);
    assert_eq!(t.samples[0].phi, 0.0);
    assert!(t.max_phi_deviation < 1e-3, "{}", t.max_phi_deviation);
    assert!(t.identity_residual <= 4.0 * f64::EPSILON);
    for s in &t.samples {
        assert!(s.psi_deviation <= s.phi.abs() / (c * c) * (1.0 + 1e-12) + 1e-15);
    }
    assert!(!t.window_clipped);
    let big = rescaled_profiles(&mesh, &u, &coeffs, 1e4, 4, 4).unwrap();
    assert!(big.window_clipped && !big.warnings.is_empty());

    let (total, near) = scaled_measure_mass(&mesh, &u, &coeffs, center, 10.0 * r).unwrap();
    assert!(near > 0.9, "{near}");
    assert!((total - 1.0).abs() < 0.1, "{total}");
    let (_, all) = scaled_measure_mass(&mesh, &u, &coeffs, center, 10.0).unwrap();
    assert_eq!(all, 1.0);
}

#[test]
fn concentration_of_clamped_bubble() {
    // energy of φ(·/r) inside radius s·r: (1/4π)(log(1+πs²) + 1/(1+πs²) − 1)
    let e = |s: f64| ((PI * s * s).ln_1p() + 1.0 / (1.0 + PI * s * s) - 1.0) / (4.0 * PI);
    let r = 0.01;
    let (mesh, center, u) = radial_field(r, |d| bubble_value([d.min(5.0 * r) / r, 0.0]));
    let f = concentration_profile(&mesh, &u, center, &[r, 2.0 * r, 10.0 * r, 2.0]).unwrap();
    assert!((f[0] - e(1.0) / e(5.0)).abs() < 0.02, "{} vs {}", f[0], e(1.0) / e(5.0));
    assert!((f[1] - e(2.0) / e(5.0)).abs() < 0.02);
    assert!(f[2] > 0.9);
    assert_eq!(f[3], 1.0);
    assert!(f.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn fourier_mode_does_not_concentrate() {
    let m = build_flat_torus(64).unwrap();
    let u = m.interpolate(|q| (2.0 * PI * q[0]).cos());
    let f = concentration_profile(&m, &u, 0, &[0.1, 0.3, 1.0]).unwrap();
    assert!(f[0] < 0.2, "{}", f[0]);
    assert_eq!(f[2], 1.0);
    assert!(concentration_profile(&m, &u, 0, &[0.2, 0.1]).is_err());
}

#[test]
fn truncation_energies_are_nested() {
    let m = build_flat_torus(32).unwrap();
    let path = continuation(&m, 0.0, 2.0, &[0.5], &MaximizeOptions::default()).unwrap();
    let u = path[0].u_eps.field();
    let levels: Vec<f64> = (1..=20).map(|k| k as f64 / 20.0).collect();
    let e = truncation_energy(&m, u, path[0].c_eps, &levels).unwrap();
    assert!(e.windows(2).all(|w| w[1] >= w[0]));
    assert!((e[19] - grad_norm_sq(&m, u)).abs() < 1e-15);
    assert!((e[19] - 1.0).abs() < 1e-8);
    // the clamp tends to min(u, 0), whose energy vanishes only under concentration
    let tiny = truncation_energy(&m, u, path[0].c_eps, &[1e-9]).unwrap();
    let negative = grad_norm_sq(&m, &u.map(|v| v.min(0.0)));
    assert!((tiny[0] - negative).abs() < 1e-6);
    assert!(e[0] > negative);
    assert!(truncation_energy(&m, u, path[0].c_eps, &[1.5]).is_err());
}

#[test]
fn path_trends_and_report() {
    let m = build_flat_torus(32).unwrap();
    let path = continuation(&m, 0.0, 2.0, &[1.0, 0.5, 0.2, 0.1], &MaximizeOptions::default()).unwrap();
    let reports: Vec<_> = path
        .iter()
        .map(|r| blowup_report(&m, r, &BlowupOptions::default()).unwrap())
        .collect();
    for w in reports.windows(2) {
        assert!(w[1].c_eps > w[0].c_eps);
        assert!(w[1].r_eps_sq_c4 < w[0].r_eps_sq_c4);
    }
    for b in &reports {
        assert!(b.r_eps > 0.0);
        assert!(b.profile.identity_residual <= 4.0 * f64::EPSILON);
        assert!(b.concentration.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(b.concentration.iter().all(|&(_, f)| (0.0..=1.0).contains(&f)));
        let last = b.truncation_energies.last().unwrap();
        assert_eq!(last.0, 1.0);
        assert!((last.1 - 1.0).abs() < 1e-8);
    }
    let table = l6_identity_check(&m, &path);
    assert_eq!(table.len(), 4);
    assert!(table.iter().all(|r| r.j_minus_area > 0.0 && r.lambda_over_c2 > 0.0));
    assert!(l6_identity_check(&m, &[]).is_empty());
}

#[test]
fn energy_limit_ratio_on_part_iii_family() {
    let eps = 1e-2;
    let g = build_graded_torus(64, [0.0, 0.0], eps / 8.0).unwrap();
    let green = solve_green(&g.mesh, g.center_vertex, 0.0, 2.0, &GreenOptions::default()).unwrap();
    let fam = build_part_iii_family(&g.mesh, &green, 0.0, 2.0, eps).unwrap();
    let row = energy_limit_row(
        &g.mesh,
        fam.field.field(),
        &FunctionalParams::new(0.0, 4.0 * PI, 2.0).unwrap(),
    )
    .unwrap();
    assert!((0.5..=2.0).contains(&row.ratio), "{row:?}");
}
