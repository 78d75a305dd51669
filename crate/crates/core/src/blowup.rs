//! Blow-up diagnostics for maximizers: concentration of energy, rescaled
//! profiles against the bubble `φ(x) = −(1/4π)log(1+π|x|²)`, truncation
//! energies, the scaled measure and the `J − Area ~ λ_ε/c_ε²` identity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calculus::{grad_norm_sq, lp_norm, FunctionalParams};
use crate::error::{Error, Result};
use crate::extremal::{ElCoefficients, MaximizerResult};
use crate::field::Field;
use crate::logexp::ScaledSum;
use crate::surface::chart::{chart_point, chart_radius_limit, distances_from, surface_distance, Locator};
use crate::surface::quadrature::for_each_point;
use crate::surface::{QuadratureRule, SurfaceMesh};

/// `φ(x) = −(1/4π)log(1+π|x|²)`, the normalized solution of
/// `−Δφ = e^{8πφ}` in the plane.
pub fn bubble_value(x: [f64; 2]) -> f64 {
    -(PI * (x[0] * x[0] + x[1] * x[1])).ln_1p() / (4.0 * PI)
}

// 7-point Gauss and 15-point Kronrod nodes on [-1, 1] (non-negative half).
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XK[i]) + f(c + h * XK[i]);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]`.
pub fn adaptive_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn go(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        go(f, a, m, 0.5 * tol, depth + 1) + go(f, m, b, 0.5 * tol, depth + 1)
    }
    go(&f, a, b, tol, 0)
}

/// `∫_{R²} e^{8π(1+β)φ}|x|^{2β} dx` over `|x| ≤ r_max` (`∞` allowed).
///
/// Closed form `Γ(1+β)²/(π^β Γ(2+2β))` for the full plane, equal to 1 only
/// at `β = 0`.
pub fn bubble_moment(beta: f64, r_max: f64) -> Result<f64> {
    if !(beta > -1.0) {
        return Err(Error::param("beta", "moment needs beta > −1"));
    }
    if !(r_max > 0.0) {
        return Err(Error::param("r_max", "must be positive"));
    }
    let density = |r: f64| 2.0 * PI * r.powf(1.0 + 2.0 * beta) * (-2.0 * (1.0 + beta) * (PI * r * r).ln_1p()).exp();
    if r_max.is_finite() {
        return Ok(adaptive_integral(density, 0.0, r_max, 1e-13));
    }
    // r = s/(1−s) maps [0, 1) onto [0, ∞)
    Ok(adaptive_integral(
        |s| {
            let r = s / (1.0 - s);
            density(r) / ((1.0 - s) * (1.0 - s))
        },
        0.0,
        1.0,
        1e-13,
    ))
}

/// `∫_{R²} e^{8πφ} dx`, which is 1.
pub fn bubble_mass_check() -> f64 {
    bubble_moment(0.0, f64::INFINITY).expect("fixed valid arguments")
}

/// `log r_ε² = log λ_ε − log β_ε − 2 log c_ε − α_ε c_ε²`.
pub fn log_r_eps_sq(coefficients: &ElCoefficients, c_eps: f64) -> Result<f64> {
    if !(c_eps > 0.0) {
        return Err(Error::param("c_eps", format!("must be positive, got {c_eps}")));
    }
    if !(coefficients.lambda_eps > 0.0 && coefficients.beta_eps > 0.0) {
        return Err(Error::param("coefficients", "need lambda_eps > 0 and beta_eps > 0"));
    }
    Ok(coefficients.lambda_eps.ln()
        - coefficients.beta_eps.ln()
        - 2.0 * c_eps.ln()
        - coefficients.alpha_eps * c_eps * c_eps)
}

/// `r_ε = √(λ_ε/(β_ε c_ε² e^{α_ε c_ε²}))`, evaluated through its logarithm.
/// Underflows to 0 only when `r_ε < 10⁻³⁰⁸`; see [`log_r_eps_sq`].
pub fn compute_r_eps(coefficients: &ElCoefficients, c_eps: f64) -> Result<f64> {
    Ok((0.5 * log_r_eps_sq(coefficients, c_eps)?).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    /// Rescaled planar coordinate.
    pub x: [f64; 2],
    pub radius: f64,
    pub u: f64,
    /// `ū_ε(x̄_ε + r_ε x)/c_ε`.
    pub psi: f64,
    /// `c_ε(ū_ε(x̄_ε + r_ε x) − c_ε)`.
    pub phi: f64,
    pub bubble: f64,
    pub psi_deviation: f64,
    pub phi_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub c_eps: f64,
    pub r_eps: f64,
    pub window: f64,
    pub window_clipped: bool,
    pub warnings: Vec<String>,
    pub samples: Vec<ProfileSample>,
    pub max_phi_deviation: f64,
    /// Largest `|ψ_ε − (1 + φ_ε/c_ε²)|`.
    pub identity_residual: f64,
}

/// Samples `ψ_ε` and `φ_ε` on `|x| ≤ window` along `rays` directions, at
/// `radial` equispaced radii each, around the maximum vertex of `u`.
pub fn rescaled_profiles(
    mesh: &SurfaceMesh,
    u: &Field,
    coefficients: &ElCoefficients,
    window: f64,
    radial: usize,
    rays: usize,
) -> Result<ProfileTable> {
    mesh.check_field(u)?;
    if !(window > 0.0) || radial == 0 || rays == 0 {
        return Err(Error::param(
            "window",
            "need window > 0 and at least one radius and ray",
        ));
    }
    let limit = chart_radius_limit(mesh.geometry())
        .ok_or_else(|| Error::UnsupportedGeometry("rescaled profiles need an isothermal chart".into()))?;
    let x_eps = u.argmax();
    let c = u[x_eps];
    let r_eps = compute_r_eps(coefficients, c)?;
    let mut warnings = Vec::new();
    let mut window_used = window;
    if r_eps * window > 0.9 * limit {
        window_used = 0.9 * limit / r_eps;
        warnings.push(format!(
            "window {window} clipped to {window_used} to stay inside the chart"
        ));
    }
    let loc = Locator::new(mesh)?;
    let center = mesh.vertices()[x_eps];
    let sample = |x: [f64; 2], val: f64| {
        let psi = val / c;
        let phi = c * (val - c);
        let bubble = bubble_value(x);
        ProfileSample {
            x,
            radius: x[0].hypot(x[1]),
            u: val,
            psi,
            phi,
            bubble,
            psi_deviation: (psi - 1.0).abs(),
            phi_deviation: (phi - bubble).abs(),
        }
    };
    let mut samples = vec![sample([0.0, 0.0], c)];
    for k in 1..=radial {
        let r = window_used * k as f64 / radial as f64;
        for j in 0..rays {
            let th = 2.0 * PI * j as f64 / rays as f64;
            let x = [r * th.cos(), r * th.sin()];
            let q = chart_point(mesh.geometry(), center, [r_eps * x[0], r_eps * x[1]])?;
            let val = loc
                .interpolate(u, q)
                .ok_or_else(|| Error::InvalidInput(format!("rescaled point {x:?} not on the mesh")))?;
            samples.push(sample(x, val));
        }
    }
    let max_phi_deviation = samples.iter().map(|s| s.phi_deviation).fold(0.0, f64::max);
    let identity_residual = samples
        .iter()
        .map(|s| (s.psi - (1.0 + s.phi / (c * c))).abs())
        .fold(0.0, f64::max);
    Ok(ProfileTable {
        c_eps: c,
        r_eps,
        window: window_used,
        window_clipped: window_used < window,
        warnings,
        samples,
        max_phi_deviation,
        identity_residual,
    })
}

/// Distance from vertex `center` to every quadrature point of `rule`,
/// indexed `triangle · points + k`. Exact on built-in surfaces; on user
/// meshes the vertex edge-path distances are interpolated.
fn point_distances(mesh: &SurfaceMesh, center: usize, rule: &QuadratureRule) -> Vec<f64> {
    let np = rule.points.len();
    let mut out = Vec::with_capacity(mesh.num_triangles() * np);
    let geometry = mesh.geometry();
    let c = mesh.vertices()[center];
    let vertex_d = (!geometry.has_chart()).then(|| distances_from(mesh, center));
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let corners = mesh.corners(t);
        for b in &rule.points {
            let d = match &vertex_d {
                Some(vd) => b[0] * vd[tri[0]] + b[1] * vd[tri[1]] + b[2] * vd[tri[2]],
                None => {
                    let p: [f64; 3] =
                        std::array::from_fn(|k| b[0] * corners[0][k] + b[1] * corners[1][k] + b[2] * corners[2][k]);
                    surface_distance(geometry, c, p).unwrap_or(f64::INFINITY)
                }
            };
            out.push(d);
        }
    }
    out
}

/// Fraction of `∫|∇u|²` inside the geodesic ball of each radius around
/// vertex `center`. Each triangle's (constant) energy density is split by
/// the share of its quadrature weight inside the ball.
pub fn concentration_profile(mesh: &SurfaceMesh, u: &Field, center: usize, radii: &[f64]) -> Result<Vec<f64>> {
    mesh.check_field(u)?;
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("radii", "must be positive and increasing"));
    }
    let energy = triangle_energies(mesh, u);
    let total: f64 = energy.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("field has no Dirichlet energy".into()));
    }
    let rule = QuadratureRule::dunavant7().subdivided();
    let d = point_distances(mesh, center, &rule);
    let np = rule.points.len();
    let farthest = d.iter().copied().fold(0.0, f64::max);
    Ok(radii
        .iter()
        .map(|&r| {
            if r >= farthest {
                return 1.0;
            }
            let inside: f64 = energy
                .iter()
                .enumerate()
                .map(|(t, e)| {
                    let share: f64 = (0..np).filter(|&k| d[t * np + k] <= r).map(|k| rule.weights[k]).sum();
                    e * share
                })
                .sum();
            (inside / total).clamp(0.0, 1.0)
        })
        .collect())
}

/// `|∇u|²·area` per triangle.
fn triangle_energies(mesh: &SurfaceMesh, u: &Field) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let c = mesh.corners(t);
            let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            let (e1, e2) = (sub(c[1], c[0]), sub(c[2], c[0]));
            let (g11, g12, g22) = (dot(e1, e1), dot(e1, e2), dot(e2, e2));
            let (f1, f2) = (u[tri[1]] - u[tri[0]], u[tri[2]] - u[tri[0]]);
            let det = g11 * g22 - g12 * g12;
            // |∇u|² = fᵀ G⁻¹ f for the Gram matrix G of the edge vectors
            let q = (g22 * f1 * f1 - 2.0 * g12 * f1 * f2 + g11 * f2 * f2) / det;
            q * mesh.areas()[t]
        })
        .collect()
}

/// Dirichlet energy of `min(β·c_ε, u)` for each level `β`.
pub fn truncation_energy(mesh: &SurfaceMesh, u: &Field, c_eps: f64, beta_levels: &[f64]) -> Result<Vec<f64>> {
    mesh.check_field(u)?;
    if !(c_eps > 0.0) {
        return Err(Error::param("c_eps", "must be positive"));
    }
    if beta_levels.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
        return Err(Error::param("beta_levels", "levels must lie in (0, 1]"));
    }
    Ok(beta_levels
        .iter()
        .map(|&b| grad_norm_sq(mesh, &u.map(|v| v.min(b * c_eps))))
        .collect())
}

/// Total mass of `(β_ε/λ_ε)c_ε u e^{α_ε u²} dv_g` and the share inside the
/// ball of `radius` around vertex `center`. `λ_ε` is recomputed from `u`
/// with the same quadrature, all sums in shifted exponential form.
pub fn scaled_measure_mass(
    mesh: &SurfaceMesh,
    u: &Field,
    coefficients: &ElCoefficients,
    center: usize,
    radius: f64,
) -> Result<(f64, f64)> {
    mesh.check_field(u)?;
    let rule = QuadratureRule::dunavant7();
    let d = point_distances(mesh, center, &rule);
    let np = rule.points.len();
    let a = coefficients.alpha_eps;
    let (mut lam, mut all, mut near) = (ScaledSum::new(), ScaledSum::new(), ScaledSum::new());
    let mut idx = 0;
    for_each_point(mesh, u, &rule, |t, v, w, _| {
        let e = a * v * v;
        lam.add(w * v * v, e);
        all.add(w * v, e);
        if d[t * np + idx % np] <= radius {
            near.add(w * v, e);
        }
        idx += 1;
        Ok(())
    })?;
    let c = u[u.argmax()];
    let total = coefficients.beta_eps * c * all.ratio(&lam);
    Ok((total, near.ratio(&all)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLimitRow {
    pub eps: f64,
    pub j_minus_area: f64,
    pub lambda_over_c2: f64,
    pub ratio: f64,
}

/// `J − Area` against `λ_ε/c_ε²` along a maximizer path.
pub fn l6_identity_check(mesh: &SurfaceMesh, path: &[MaximizerResult]) -> Vec<EnergyLimitRow> {
    path.iter()
        .map(|r| {
            let jm = r.j_value - mesh.total_area();
            let lc = r.coefficients.lambda_eps / (r.c_eps * r.c_eps);
            EnergyLimitRow {
                eps: r.eps,
                j_minus_area: jm,
                lambda_over_c2: lc,
                ratio: jm / lc,
            }
        })
        .collect()
}

/// The same comparison for an arbitrary admissible field, with
/// `λ̂ = ∫u² e^{β(1+α‖u‖_p²)u²}` and `ĉ = max|u|`.
pub fn energy_limit_row(mesh: &SurfaceMesh, u: &Field, params: &FunctionalParams) -> Result<EnergyLimitRow> {
    params.validate()?;
    mesh.check_field(u)?;
    let n = lp_norm(mesh, u, params.p)?;
    let a = params.beta * (1.0 + params.alpha * n * n);
    let (mut j, mut lam) = (ScaledSum::new(), ScaledSum::new());
    for_each_point(mesh, u, &QuadratureRule::dunavant7(), |_, v, w, _| {
        j.add(w, a * v * v);
        lam.add(w * v * v, a * v * v);
        Ok(())
    })?;
    let c = u.max_abs();
    let jm = j.value() - mesh.total_area();
    let lc = lam.value() / (c * c);
    Ok(EnergyLimitRow {
        eps: crate::extremal::CRITICAL_BETA - params.beta,
        j_minus_area: jm,
        lambda_over_c2: lc,
        ratio: jm / lc,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupOptions {
    /// Rescaled window `R` for the profile table.
    pub window: f64,
    pub radial_samples: usize,
    pub rays: usize,
    /// Ball radii for the concentration profile; empty picks a default set.
    pub radii: Vec<f64>,
    pub beta_levels: Vec<f64>,
    /// Ball radius for the scaled measure, in units of `r_ε`.
    pub mass_radius_factor: f64,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        Self {
            window: 5.0,
            radial_samples: 20,
            rays: 8,
            radii: Vec::new(),
            beta_levels: (1..=10).map(|k| k as f64 / 10.0).collect(),
            mass_radius_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub eps: f64,
    pub c_eps: f64,
    pub x_eps: usize,
    pub x_eps_point: [f64; 3],
    pub r_eps: f64,
    pub log_r_eps_sq: f64,
    /// `r_ε² c_ε⁴`.
    pub r_eps_sq_c4: f64,
    /// `(radius, energy fraction in B_radius(x_ε))`.
    pub concentration: Vec<(f64, f64)>,
    pub lambda_over_c2: f64,
    pub profile: ProfileTable,
    /// `(β, ‖∇min(βc_ε, u_ε)‖₂²)`.
    pub truncation_energies: Vec<(f64, f64)>,
    pub scaled_measure_total: f64,
    pub scaled_measure_near_fraction: f64,
    pub mass_radius: f64,
}

pub fn blowup_report(mesh: &SurfaceMesh, result: &MaximizerResult, opts: &BlowupOptions) -> Result<BlowupReport> {
    let u = result.u_eps.field();
    mesh.check_field(u)?;
    let x = u.argmax();
    let c = u[x];
    let coeffs = &result.coefficients;
    let log_r2 = log_r_eps_sq(coeffs, c)?;
    let r_eps = (0.5 * log_r2).exp();
    let mut radii = opts.radii.clone();
    if radii.is_empty() {
        let s = mesh.total_area().sqrt();
        radii = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0].iter().map(|k| k * s).collect();
    }
    let fractions = concentration_profile(mesh, u, x, &radii)?;
    let trunc = truncation_energy(mesh, u, c, &opts.beta_levels)?;
    let mass_radius = opts.mass_radius_factor * r_eps;
    let (total, near) = scaled_measure_mass(mesh, u, coeffs, x, mass_radius)?;
    Ok(BlowupReport {
        eps: result.eps,
        c_eps: c,
        x_eps: x,
        x_eps_point: mesh.vertices()[x],
        r_eps,
        log_r_eps_sq: log_r2,
        r_eps_sq_c4: (log_r2 + 4.0 * c.ln()).exp(),
        concentration: radii.into_iter().zip(fractions).collect(),
        lambda_over_c2: coeffs.lambda_eps / (c * c),
        profile: rescaled_profiles(mesh, u, coeffs, opts.window, opts.radial_samples, opts.rays)?,
        truncation_energies: opts.beta_levels.iter().copied().zip(trunc).collect(),
        scaled_measure_total: total,
        scaled_measure_near_fraction: near,
        mass_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(lambda: f64, beta: f64, alpha: f64) -> ElCoefficients {
        ElCoefficients {
            alpha_eps: alpha,
            beta_eps: beta,
            gamma_eps: 0.0,
            lambda_eps: lambda,
            mu_eps: 0.0,
        }
    }

    #[test]
    fn bubble_values() {
        assert_eq!(bubble_value([0.0, 0.0]), 0.0);
        assert!((bubble_value([1.0, 0.0]) + (1.0 + PI).ln() / (4.0 * PI)).abs() < 1e-16);
        let mut prev = 0.0;
        for k in 1..100 {
            let v = bubble_value([0.1 * k as f64, 0.0]);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn bubble_mass_is_one() {
        assert!((bubble_mass_check() - 1.0).abs() < 1e-10);
        // ∫_{|x|≤R} = 1 − 1/(1+πR²)
        let t = bubble_moment(0.0, 1e3).unwrap();
        assert!(t >= 1.0 - 1e-3);
        assert!((t - (1.0 - 1.0 / (1.0 + PI * 1e6))).abs() < 1e-10);
    }

    #[test]
    fn bubble_moment_closed_form() {
        // Γ(1+β)²/(π^β Γ(2+2β)) at β = 1 and β = 1/2
        let m1 = bubble_moment(1.0, f64::INFINITY).unwrap();
        assert!((m1 - 1.0 / (6.0 * PI)).abs() < 1e-9, "{m1}");
        let mh = bubble_moment(0.5, f64::INFINITY).unwrap();
        assert!((mh - PI.sqrt() / 8.0).abs() < 1e-9, "{mh}");
    }

    #[test]
    fn r_eps_plug_in() {
        assert_eq!(compute_r_eps(&coeffs(1.0, 1.0, 0.0), 1.0).unwrap(), 1.0);
        let a = compute_r_eps(&coeffs(1.3, 0.8, 2.0), 0.7).unwrap();
        let b = compute_r_eps(&coeffs(2.6, 0.8, 2.0), 0.7).unwrap();
        assert!((b * b / (a * a) - 2.0).abs() < 1e-14);
        let l = log_r_eps_sq(&coeffs(1.0, 1.0, 1e4), 1.0).unwrap();
        assert_eq!(l, -1e4);
        assert!(compute_r_eps(&coeffs(1.0, 1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn adaptive_integral_polynomial() {
        let v = adaptive_integral(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, 1e-14);
        assert!((v - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
    }
}
