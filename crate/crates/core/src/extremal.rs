//! Maximizers of the subcritical functional `J^α_{4π−ε}` over
//! `H = {∫u = 0, ‖∇u‖₂ ≤ 1}` and their Euler–Lagrange data.
//!
//! Ascent runs on the sphere `‖∇u‖₂ = 1` inside the mean-zero space, with
//! the `K` inner product. The gradient is the Sobolev gradient `K⁺g` made
//! tangent to the sphere; directions come from limited-memory BFGS, and the
//! first step (or any step after a reset) is the power step
//! `u ← K⁺g/‖K⁺g‖_K`. Steps are backtracked on `J`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calculus::{
    evaluate_functional, grad_norm_sq, lp_norm, mean_zero_project, random_admissible, value_and_gradient,
};
use crate::calculus::{AdmissibleField, FunctionalParams};
use crate::eigen::inverse_power_iteration;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::surface::chart::distances_from;
use crate::surface::quadrature::{load_vector, QuadratureRule};
use crate::surface::SurfaceMesh;

/// Critical exponent `4π`.
pub const CRITICAL_BETA: f64 = 4.0 * PI;

/// Euler–Lagrange scalars of a field `u` for the exponent `4π − ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElCoefficients {
    /// `(4π−ε)(1 + α‖u‖_p²)`.
    pub alpha_eps: f64,
    /// `(1 + α‖u‖_p²)/(1 + 2α‖u‖_p²)`.
    pub beta_eps: f64,
    /// `α/(1 + 2α‖u‖_p²)`.
    pub gamma_eps: f64,
    /// `∫ u² e^{α_ε u²}`.
    pub lambda_eps: f64,
    /// `(β_ε ∫ u e^{α_ε u²} + λ_ε γ_ε ‖u‖_p^{2−p} ∫|u|^{p−2}u) / Area`.
    pub mu_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximizeOptions {
    /// Seeded random starts.
    pub restarts: usize,
    pub seed: u64,
    /// Stop when the tangent Sobolev gradient, relative to its radial
    /// component `⟨K⁺g, u⟩_K`, falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Bubble starts at these widths, relative to `√Area`, centered at the
    /// maximum point of the best non-bubble start.
    pub bubble_scales: Vec<f64>,
    /// `λ_p` of the surface; required for `α > 0` unless `permissive`.
    pub lambda_p: Option<f64>,
    /// Skip the `α < λ_p` precondition.
    pub permissive: bool,
    /// Extra starts tried before the others, e.g. a previous maximizer.
    pub warm_starts: Vec<Field>,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            seed: 0,
            grad_tol: 1e-8,
            max_iter: 100_000,
            bubble_scales: vec![0.2, 0.05],
            lambda_p: None,
            permissive: false,
            warm_starts: Vec::new(),
        }
    }
}

/// Outcome of one start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub label: String,
    pub j_value: f64,
    pub iterations: usize,
    pub tangent_norm: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximizerResult {
    pub u_eps: AdmissibleField,
    pub j_value: f64,
    pub coefficients: ElCoefficients,
    pub el_residual: f64,
    pub iterations: usize,
    pub eps: f64,
    /// Tangent Sobolev gradient norm relative to `⟨K⁺g, u⟩_K`.
    pub tangent_norm: f64,
    /// `c_ε = max|u_ε|`, attained with a positive sign.
    pub c_eps: f64,
    /// Vertex where `|u_ε|` is largest.
    pub x_eps: usize,
    pub x_eps_point: [f64; 3],
    pub best_start: String,
    pub starts: Vec<StartSummary>,
    /// `J` after each iteration of the winning start.
    pub history: Vec<f64>,
    pub max_edge_length: f64,
}

/// Trajectory of a single ascent.
#[derive(Clone, Debug)]
pub struct Ascent {
    pub u: Field,
    pub j_value: f64,
    pub iterations: usize,
    pub tangent_norm: f64,
    pub converged: bool,
    /// `J` at the start followed by `J` after each accepted step.
    pub history: Vec<f64>,
}

fn eps_of(params: &FunctionalParams) -> Result<f64> {
    params.validate()?;
    let eps = CRITICAL_BETA - params.beta;
    if !(eps > 0.0) {
        return Err(Error::param(
            "beta",
            format!("subcritical problem needs beta < 4π, got {}", params.beta),
        ));
    }
    Ok(eps)
}

/// Scales a mean-zero field to `‖∇u‖₂ = 1`.
fn to_sphere(mesh: &SurfaceMesh, u: &Field) -> Option<Field> {
    let v = mean_zero_project(mesh, u);
    let e = grad_norm_sq(mesh, &v);
    if !(e > 0.0) || !e.is_finite() {
        return None;
    }
    Some(v.scaled(1.0 / e.sqrt()))
}

/// Tangent Sobolev gradient at `u` (with `‖∇u‖ = 1`) and its `K`-norm.
fn tangent_gradient(mesh: &SurfaceMesh, u: &Field, g: &Field) -> Result<(Field, f64, f64)> {
    let d = Field::new(mesh.solve_laplace(g.values())?);
    let k = mesh.stiffness();
    let du = k.bilinear(d.values(), u.values());
    let t = d.axpy(-du, u);
    let tn = k.quad_form(t.values()).max(0.0).sqrt();
    Ok((t, tn, du))
}

/// Stored curvature pairs of the quasi-Newton ascent.
const MEMORY: usize = 8;

/// Decreases of `J` up to this relative size are attributed to roundoff.
const ROUNDOFF_SLACK: f64 = 1e-12;

/// `K`-orthogonal projection onto the tangent space at `u`.
fn project_tangent(mesh: &SurfaceMesh, u: &Field, v: &Field) -> Field {
    let c = mesh.stiffness().bilinear(u.values(), v.values());
    mean_zero_project(mesh, &v.axpy(-c, u))
}

/// L-BFGS two-loop recursion in the `K` inner product; returns the
/// quasi-Newton ascent direction for the tangent gradient `t`.
fn lbfgs_direction(mesh: &SurfaceMesh, u: &Field, t: &Field, pairs: &[(Field, Field, f64)]) -> Option<Field> {
    let k = mesh.stiffness();
    let (_, y_last, rho_last) = pairs.last()?;
    let gamma = 1.0 / (rho_last * k.quad_form(y_last.values()));
    let mut q = t.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let s = project_tangent(mesh, u, s);
        let a = rho * k.bilinear(s.values(), q.values());
        q = q.axpy(-a, &project_tangent(mesh, u, y));
        alphas.push(a);
    }
    let mut r = q.scaled(gamma);
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let (s, y) = (project_tangent(mesh, u, s), project_tangent(mesh, u, y));
        let b = rho * k.bilinear(y.values(), r.values());
        r = r.axpy(a - b, &s);
    }
    let r = project_tangent(mesh, u, &r);
    (k.bilinear(r.values(), t.values()) > 0.0).then_some(r)
}

/// Projected quasi-Newton ascent of `J` on `‖∇u‖₂ = 1` from `start`.
/// A zero start is replaced by the first `p = 2` eigenfunction, the
/// direction in which `J` grows fastest from its global minimum `J(0) = Area`.
pub fn ascend_from(
    mesh: &SurfaceMesh,
    start: &Field,
    params: &FunctionalParams,
    opts: &MaximizeOptions,
) -> Result<Ascent> {
    eps_of(params)?;
    mesh.check_field(start)?;
    let rule = QuadratureRule::dunavant7();
    let k = mesh.stiffness();
    let mut history = Vec::new();
    let mut u = match to_sphere(mesh, start) {
        Some(u) if start.max_abs() > 0.0 => u,
        _ => {
            history.push(mesh.total_area());
            let (_, v) = inverse_power_iteration(mesh, opts.seed ^ 0x5eed, 1e-10, 10_000)?;
            to_sphere(mesh, &v).ok_or_else(|| Error::InvalidInput("degenerate eigenfunction".into()))?
        }
    };
    let (mut val, g) = value_and_gradient(mesh, &u, params, &rule)?;
    history.push(val.j);
    let (mut t, mut tn, mut du) = tangent_gradient(mesh, &u, &g)?;
    let mut pairs: Vec<(Field, Field, f64)> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if tn < opts.grad_tol * du.abs() {
            converged = true;
            break;
        }
        iterations += 1;
        // quasi-Newton step at unit length, else the power step
        let (dir, mut tau) = match lbfgs_direction(mesh, &u, &t, &pairs) {
            Some(d) => (d, 1.0),
            None => (t.clone(), if du > 0.0 { 1.0 / du } else { 1.0 / tn }),
        };
        let slope = k.bilinear(dir.values(), t.values());
        let slack = ROUNDOFF_SLACK * val.j.abs();
        let mut accepted = None;
        for _ in 0..50 {
            if let Some(trial) = to_sphere(mesh, &u.axpy(tau, &dir)) {
                match value_and_gradient(mesh, &trial, params, &rule) {
                    Ok((tv, tg)) if tv.j - val.j >= 1e-4 * tau * slope - slack => {
                        accepted = Some((trial, tv, tg));
                        break;
                    }
                    Ok(_) | Err(Error::Overflow { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            tau *= 0.5;
        }
        let Some((nu, nv, ng)) = accepted else {
            if pairs.is_empty() {
                // no ascent at working precision
                break;
            }
            pairs.clear();
            continue;
        };
        let (nt, ntn, ndu) = tangent_gradient(mesh, &nu, &ng)?;
        // curvature pair for the concave model of J
        let s_vec = project_tangent(mesh, &nu, &nu.axpy(-1.0, &u));
        let y_vec = project_tangent(mesh, &nu, &t).axpy(-1.0, &nt);
        let sy = k.bilinear(s_vec.values(), y_vec.values());
        if sy > 1e-12 * k.quad_form(s_vec.values()).sqrt() * k.quad_form(y_vec.values()).sqrt() {
            pairs.push((s_vec, y_vec, 1.0 / sy));
            if pairs.len() > MEMORY {
                pairs.remove(0);
            }
        }
        u = nu;
        val = nv;
        t = nt;
        tn = ntn;
        du = ndu;
        history.push(val.j);
    }
    Ok(Ascent {
        u,
        j_value: val.j,
        iterations,
        tangent_norm: tn / du.abs(),
        converged,
        history,
    })
}

/// `−log(1 + d²/r²)` in the surface distance `d` from `center`, on the sphere.
pub fn bubble_start(mesh: &SurfaceMesh, center: usize, width: f64) -> Result<Field> {
    if center >= mesh.num_vertices() {
        return Err(Error::param("center", format!("vertex {center} out of range")));
    }
    if !(width > 0.0) {
        return Err(Error::param("width", "must be positive"));
    }
    let d = distances_from(mesh, center);
    let u = Field::new(d.iter().map(|x| -(1.0 + x * x / (width * width)).ln()).collect());
    to_sphere(mesh, &u).ok_or_else(|| Error::InvalidInput("degenerate bubble start".into()))
}

fn check_alpha(params: &FunctionalParams, opts: &MaximizeOptions) -> Result<()> {
    if params.alpha == 0.0 || opts.permissive {
        return Ok(());
    }
    match opts.lambda_p {
        None => Err(Error::param(
            "lambda_p",
            "alpha > 0 needs lambda_p to check alpha < lambda_p (or permissive mode)",
        )),
        Some(l) if params.alpha >= l => Err(Error::param(
            "alpha",
            format!("must be below lambda_p = {l}, got {}", params.alpha),
        )),
        Some(_) => Ok(()),
    }
}

/// Maximizes `J^α_{4π−ε}` over `H`, with `ε = 4π − params.beta`.
pub fn maximize_subcritical(
    mesh: &SurfaceMesh,
    params: &FunctionalParams,
    opts: &MaximizeOptions,
) -> Result<MaximizerResult> {
    let eps = eps_of(params)?;
    check_alpha(params, opts)?;
    if !(opts.grad_tol > 0.0) {
        return Err(Error::param("grad_tol", "must be positive"));
    }
    let mut starts: Vec<(String, Field)> = opts
        .warm_starts
        .iter()
        .enumerate()
        .map(|(i, f)| (format!("warm:{i}"), f.clone()))
        .collect();
    let (_, eig) = inverse_power_iteration(mesh, opts.seed ^ 0x5eed, 1e-10, 10_000)?;
    starts.push(("eigen".into(), eig));
    for k in 0..opts.restarts as u64 {
        let s = opts.seed.wrapping_add(k);
        starts.push((format!("random:{s}"), random_admissible(mesh, s)?.into_field()));
    }

    let mut runs: Vec<(String, Ascent)> = Vec::new();
    for (label, s) in &starts {
        runs.push((label.clone(), ascend_from(mesh, s, params, opts)?));
    }
    if !opts.bubble_scales.is_empty() {
        let lead = best_run(&runs).map(|i| runs[i].1.u.argmax_abs()).unwrap_or(0);
        for &w in &opts.bubble_scales {
            let s = bubble_start(mesh, lead, w * mesh.total_area().sqrt())?;
            runs.push((format!("bubble:{w}"), ascend_from(mesh, &s, params, opts)?));
        }
    }
    let summaries: Vec<StartSummary> = runs
        .iter()
        .map(|(l, a)| StartSummary {
            label: l.clone(),
            j_value: a.j_value,
            iterations: a.iterations,
            tangent_norm: a.tangent_norm,
            converged: a.converged,
        })
        .collect();
    let Some(i) = best_run(&runs) else {
        let (_, a) = runs
            .into_iter()
            .max_by(|a, b| a.1.j_value.total_cmp(&b.1.j_value))
            .expect("at least the eigen start");
        return Err(Error::NonConvergence {
            solver: "subcritical ascent",
            iterations: a.iterations,
            residual: a.tangent_norm,
            best_value: a.j_value,
            best: Some(Box::new(a.u)),
        });
    };
    let (label, a) = runs.swap_remove(i);
    finish(mesh, params, eps, a, label, summaries)
}

/// Index of the converged run with the largest `J`; earlier runs win ties.
fn best_run(runs: &[(String, Ascent)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (_, a)) in runs.iter().enumerate() {
        if !a.converged {
            continue;
        }
        let better = best.is_none_or(|b| a.j_value > runs[b].1.j_value * (1.0 + 1e-12));
        if better {
            best = Some(i);
        }
    }
    best
}

fn finish(
    mesh: &SurfaceMesh,
    params: &FunctionalParams,
    eps: f64,
    a: Ascent,
    label: String,
    starts: Vec<StartSummary>,
) -> Result<MaximizerResult> {
    // J is even; fix the sign so that the largest value is positive
    let mut a = a;
    if a.u[a.u.argmax_abs()] < 0.0 {
        a.u = a.u.scaled(-1.0);
    }
    let coefficients = el_coefficients(mesh, &a.u, params)?;
    let el_residual = el_residual(mesh, &a.u, &coefficients, params)?;
    let x_eps = a.u.argmax_abs();
    Ok(MaximizerResult {
        c_eps: a.u.max_abs(),
        x_eps,
        x_eps_point: mesh.vertices()[x_eps],
        u_eps: AdmissibleField::new(mesh, a.u)?,
        j_value: a.j_value,
        coefficients,
        el_residual,
        iterations: a.iterations,
        eps,
        tangent_norm: a.tangent_norm,
        best_start: label,
        starts,
        history: a.history,
        max_edge_length: mesh.max_edge_length(),
    })
}

/// Euler–Lagrange scalars of `u` for `ε = 4π − params.beta`.
pub fn el_coefficients(mesh: &SurfaceMesh, u: &Field, params: &FunctionalParams) -> Result<ElCoefficients> {
    let eps = eps_of(params)?;
    let rule = QuadratureRule::dunavant7();
    let val = evaluate_functional(mesh, u, params, &rule)?;
    let n2 = val.norm_p * val.norm_p;
    let (alpha, p) = (params.alpha, params.p);
    let alpha_eps = (CRITICAL_BETA - eps) * (1.0 + alpha * n2);
    let beta_eps = (1.0 + alpha * n2) / (1.0 + 2.0 * alpha * n2);
    let gamma_eps = alpha / (1.0 + 2.0 * alpha * n2);
    let lambda_eps = val.u2_exp;
    let u_exp: f64 = load_vector(mesh, u, &rule, |v| v * (alpha_eps * v * v).exp())?
        .iter()
        .sum();
    let pw = if val.norm_p > 0.0 {
        val.norm_p.powf(2.0 - p) * power_integral(mesh, u, p)
    } else {
        0.0
    };
    let mu_eps = (beta_eps * u_exp + lambda_eps * gamma_eps * pw) / mesh.total_area();
    Ok(ElCoefficients {
        alpha_eps,
        beta_eps,
        gamma_eps,
        lambda_eps,
        mu_eps,
    })
}

/// `∫|u|^{p−2}u` with the lumped mass.
fn power_integral(mesh: &SurfaceMesh, u: &Field, p: f64) -> f64 {
    u.values()
        .iter()
        .zip(mesh.mass())
        .map(|(v, m)| m * v.signum() * v.abs().powf(p - 1.0))
        .sum()
}

/// `K u − b(u)`, where `b(u)` is the discrete right-hand side of the
/// Euler–Lagrange equation: the exponential term as a load vector with the
/// quadrature used for `J`, the `L^p` term and the multiplier lumped.
pub fn el_residual_vector(
    mesh: &SurfaceMesh,
    u: &Field,
    c: &ElCoefficients,
    params: &FunctionalParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    mesh.check_field(u)?;
    if !(c.lambda_eps > 0.0) {
        return Err(Error::InvalidInput(
            "Euler–Lagrange residual needs lambda_eps > 0".into(),
        ));
    }
    let rule = QuadratureRule::dunavant7();
    let a = c.alpha_eps;
    let mut b = load_vector(mesh, u, &rule, |v| v * (a * v * v).exp())?;
    let np = lp_norm(mesh, u, params.p)?;
    let pc = if np > 0.0 {
        c.gamma_eps * np.powf(2.0 - params.p)
    } else {
        0.0
    };
    let ml = c.mu_eps / c.lambda_eps;
    for ((bi, mi), ui) in b.iter_mut().zip(mesh.mass()).zip(u.values()) {
        *bi = c.beta_eps / c.lambda_eps * *bi + pc * mi * ui.signum() * ui.abs().powf(params.p - 1.0) - ml * mi;
    }
    let ku = mesh.stiffness().mul_vec(u.values());
    let r = ku.iter().zip(&b).map(|(x, y)| x - y).collect();
    Ok((r, b))
}

/// `‖K u − b(u)‖₂ / ‖b(u)‖₂`; see [`el_residual_vector`].
pub fn el_residual(mesh: &SurfaceMesh, u: &Field, c: &ElCoefficients, params: &FunctionalParams) -> Result<f64> {
    let (r, b) = el_residual_vector(mesh, u, c, params)?;
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(r.iter().map(|x| x * x).sum::<f64>().sqrt() / nb)
}

/// Maximizers along a strictly decreasing list of `ε`, each warm-started
/// from the previous maximizer and from a bubble at its maximum point.
pub fn continuation(
    mesh: &SurfaceMesh,
    alpha: f64,
    p: f64,
    eps_list: &[f64],
    opts: &MaximizeOptions,
) -> Result<Vec<MaximizerResult>> {
    if eps_list.is_empty() {
        return Err(Error::param("eps", "empty list"));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && *e < CRITICAL_BETA)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps", "must be strictly decreasing values in (0, 4π)"));
    }
    let mut out: Vec<MaximizerResult> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let params = FunctionalParams::new(alpha, CRITICAL_BETA - eps, p)?;
        let mut o = opts.clone();
        if let Some(prev) = out.last() {
            let mut warm = vec![prev.u_eps.field().clone()];
            for &w in &opts.bubble_scales {
                warm.push(bubble_start(mesh, prev.x_eps, 0.5 * w * mesh.total_area().sqrt())?);
            }
            warm.extend(o.warm_starts);
            o.warm_starts = warm;
        }
        out.push(maximize_subcritical(mesh, &params, &o)?);
    }
    Ok(out)
}
