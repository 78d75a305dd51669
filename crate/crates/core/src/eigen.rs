//! The nonlinear eigenvalue `λ_p = inf ‖∇u‖₂² / ‖u‖_p²` over mean-zero fields.
//!
//! Descent on `R(u) = uᵀKu / ‖u‖_p²` preconditioned by the stiffness
//! pseudo-inverse: `d = −K⁺P∇R`, where `P` removes the constant component.
//! For `p = 2` a unit step of one half is exactly one inverse power step, so
//! the method reduces to inverse iteration on `(K, M)`. Steps are
//! backtracked on `R` and followed by mean-zero projection and `L^p`
//! renormalization.

use serde::{Deserialize, Serialize};

use crate::calculus::{grad_norm_sq, lp_norm, mean, mean_zero_project, random_admissible};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::surface::SurfaceMesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Seeded random starts; the `p = 2` eigenvector is always added.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Relative change of `R` over `window` iterations that counts as converged.
    pub rel_tol: f64,
    pub window: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iter: 20_000,
            rel_tol: 1e-10,
            window: 20,
        }
    }
}

/// Ties between restarts closer than this go to the earlier start.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenResult {
    pub p: f64,
    pub lambda_p: f64,
    /// Minimizer scaled so that `‖∇v0‖₂ = 1` and `λ_p‖v0‖_p² = 1`; its
    /// largest-magnitude value is positive.
    pub v0: Field,
    /// `(iteration, R)` along the winning start.
    pub rayleigh_history: Vec<(usize, f64)>,
    /// Number of starts tried (random starts plus the `p = 2` start).
    pub restarts_used: usize,
    /// Final quotient of every start, in start order.
    pub start_values: Vec<f64>,
    /// Index of the winning start; the last index is the `p = 2` start.
    pub best_start: usize,
    /// `p = 2` eigenvalue from inverse power iteration.
    pub lambda_2_inverse_power: f64,
}

/// `‖∇u‖₂² / ‖u‖_p²` after mean-zero projection.
pub fn rayleigh_quotient(mesh: &SurfaceMesh, u: &Field, p: f64) -> Result<f64> {
    let v = mean_zero_project(mesh, u);
    let n = lp_norm(mesh, &v, p)?;
    if !(v.max_abs() > 1e-12 * u.max_abs()) || !(n > 0.0) {
        return Err(Error::InvalidInput("Rayleigh quotient of a constant field".into()));
    }
    Ok(grad_norm_sq(mesh, &v) / (n * n))
}

/// Smallest positive eigenpair of `K v = λ M v` by inverse iteration.
/// The vector is `M`-normalized with zero mean.
pub fn inverse_power_iteration(mesh: &SurfaceMesh, seed: u64, tol: f64, max_iter: usize) -> Result<(f64, Field)> {
    let m = mesh.mass();
    let mut v = random_admissible(mesh, seed)?.into_field();
    let mut lambda = f64::INFINITY;
    for it in 0..max_iter {
        let rhs: Vec<f64> = v.values().iter().zip(m).map(|(a, b)| a * b).collect();
        let w = mesh.solve_laplace(&rhs)?;
        let mnorm = w.iter().zip(m).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
        let w: Vec<f64> = w.iter().map(|a| a / mnorm).collect();
        let new_lambda = mesh.stiffness().quad_form(&w);
        let kw = mesh.stiffness().mul_vec(&w);
        let res = kw
            .iter()
            .zip(&w)
            .zip(m)
            .map(|((k, x), mi)| (k - new_lambda * mi * x).powi(2))
            .sum::<f64>()
            .sqrt()
            / kw.iter().map(|k| k * k).sum::<f64>().sqrt();
        v = Field::new(w);
        let change = (lambda - new_lambda).abs() / new_lambda;
        lambda = new_lambda;
        if res < tol || (change < 1e-15 && it > 3) {
            return Ok((lambda, v));
        }
    }
    Err(Error::NonConvergence {
        solver: "inverse power iteration",
        iterations: max_iter,
        residual: lambda,
        best_value: lambda,
        best: Some(Box::new(v)),
    })
}

/// Initial trial step; with it a descent step is one nonlinear inverse
/// power step `u ← K⁺P(M|u|^{p−2}u)`. Larger steps were tried and zigzag.
const INVERSE_POWER_STEP: f64 = 0.5;

struct Descent {
    u: Field,
    value: f64,
    history: Vec<(usize, f64)>,
}

fn descend(mesh: &SurfaceMesh, start: &Field, p: f64, opts: &EigenOptions) -> Result<Descent> {
    let mass = mesh.mass();
    let k = mesh.stiffness();
    let normalize = |u: &Field| -> Result<Field> {
        let v = mean_zero_project(mesh, u);
        let n = lp_norm(mesh, &v, p)?;
        Ok(v.scaled(1.0 / n))
    };
    let mut u = normalize(start)?;
    let mut r = grad_norm_sq(mesh, &u);
    let mut history = vec![(0, r)];
    for it in 1..=opts.max_iter {
        // ∇R at ‖u‖_p = 1: 2(Ku − R·M|u|^{p−2}u)
        let ku = k.mul_vec(u.values());
        let grad: Vec<f64> = ku
            .iter()
            .zip(u.values())
            .zip(mass)
            .map(|((kv, &ui), mi)| 2.0 * (kv - r * mi * ui.signum() * ui.abs().powf(p - 1.0)))
            .collect();
        let w = mesh.solve_laplace(&grad)?;
        let slope: f64 = -grad.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let d = Field::new(w).scaled(-1.0);
        let mut tau = INVERSE_POWER_STEP;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = normalize(&u.axpy(tau, &d))?;
            let rt = grad_norm_sq(mesh, &trial);
            if rt <= r + 1e-4 * tau * slope {
                accepted = Some((trial, rt));
                break;
            }
            tau *= 0.5;
        }
        let Some((nu, nr)) = accepted else {
            // no descent possible at working precision
            history.push((it, r));
            break;
        };
        u = nu;
        r = nr;
        history.push((it, r));
        if history.len() > opts.window {
            let old = history[history.len() - 1 - opts.window].1;
            if (old - r).abs() <= opts.rel_tol * r {
                return Ok(Descent { u, value: r, history });
            }
        }
    }
    let converged = history.len() > opts.window && {
        let old = history[history.len() - 1 - opts.window].1;
        (old - r).abs() <= opts.rel_tol * r
    };
    if converged || history.last().map(|h| h.0) != Some(opts.max_iter) {
        return Ok(Descent { u, value: r, history });
    }
    let old = history[history.len() - 1 - opts.window.min(history.len() - 1)].1;
    Err(Error::NonConvergence {
        solver: "Rayleigh quotient descent",
        iterations: opts.max_iter,
        residual: (old - r).abs() / r,
        best_value: r,
        best: Some(Box::new(u)),
    })
}

/// Computes `λ_p` and a minimizer `v0` by multi-start preconditioned descent.
pub fn compute_lambda_p(mesh: &SurfaceMesh, p: f64, opts: &EigenOptions) -> Result<EigenResult> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::param("p", format!("λ_p needs p > 1, got {p}")));
    }
    if !(opts.rel_tol > 0.0) || opts.window == 0 {
        return Err(Error::param("rel_tol", "tolerance and window must be positive"));
    }
    let (lambda2, v2) = inverse_power_iteration(mesh, opts.seed ^ 0x5eed, 1e-10, 10_000)?;
    let mut starts: Vec<Field> = (0..opts.restarts as u64)
        .map(|s| random_admissible(mesh, opts.seed.wrapping_add(s)).map(|f| f.into_field()))
        .collect::<Result<_>>()?;
    starts.push(v2);

    let mut best: Option<(usize, Descent)> = None;
    let mut start_values = Vec::with_capacity(starts.len());
    let mut last_err = None;
    for (i, s) in starts.iter().enumerate() {
        match descend(mesh, s, p, opts) {
            Ok(d) => {
                start_values.push(d.value);
                let better = best.as_ref().is_none_or(|(_, b)| d.value < b.value - TIE_TOL * b.value);
                if better {
                    best = Some((i, d));
                }
            }
            Err(e) => {
                start_values.push(f64::NAN);
                last_err = Some(e);
            }
        }
    }
    let Some((best_start, d)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::InvalidInput("no starts".into())));
    };
    // scale to ‖∇v0‖ = 1, largest-magnitude value positive
    let mut v0 = d.u.scaled(1.0 / grad_norm_sq(mesh, &d.u).sqrt());
    if v0[v0.argmax_abs()] < 0.0 {
        v0 = v0.scaled(-1.0);
    }
    debug_assert!(mean(mesh, &v0).abs() < 1e-10);
    let lambda_p = rayleigh_quotient(mesh, &v0, p)?;
    Ok(EigenResult {
        p,
        lambda_p,
        v0,
        rayleigh_history: d.history,
        restarts_used: starts.len(),
        start_values,
        best_start,
        lambda_2_inverse_power: lambda2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_flat_torus, build_sphere};
    use std::f64::consts::PI;

    #[test]
    fn quotient_is_scale_and_sign_invariant() {
        let m = build_flat_torus(16).unwrap();
        let u = random_admissible(&m, 4).unwrap().into_field();
        for p in [1.5, 2.0, 3.0] {
            let a = rayleigh_quotient(&m, &u, p).unwrap();
            assert!((rayleigh_quotient(&m, &u.scaled(3.0), p).unwrap() - a).abs() < 1e-13 * a);
            assert_eq!(rayleigh_quotient(&m, &u.scaled(-1.0), p).unwrap(), a);
            let shifted = u.map(|v| v + 7.0);
            assert!((rayleigh_quotient(&m, &shifted, p).unwrap() - a).abs() < 1e-10 * a);
        }
    }

    #[test]
    fn quotient_of_constant_is_an_error() {
        let m = build_flat_torus(4).unwrap();
        assert!(matches!(
            rayleigh_quotient(&m, &Field::constant(16, 2.0), 2.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn fourier_mode_quotient() {
        let m = build_flat_torus(64).unwrap();
        let u = m.interpolate(|x| (2.0 * PI * x[0]).cos());
        let r = rayleigh_quotient(&m, &u, 2.0).unwrap();
        assert!((r - 4.0 * PI * PI).abs() / (4.0 * PI * PI) < 0.02);
    }

    #[test]
    fn p2_matches_inverse_power() {
        let m = build_sphere(2).unwrap();
        let res = compute_lambda_p(
            &m,
            2.0,
            &EigenOptions {
                restarts: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((res.lambda_p - res.lambda_2_inverse_power).abs() / res.lambda_p < 1e-6);
        let v = &res.v0;
        assert!((grad_norm_sq(&m, v) - 1.0).abs() < 1e-8);
        let n = lp_norm(&m, v, 2.0).unwrap();
        assert!((res.lambda_p * n * n - 1.0).abs() < 1e-8);
        assert_eq!(res.restarts_used, 4);
    }

    #[test]
    fn rejects_bad_p() {
        let m = build_flat_torus(4).unwrap();
        assert!(compute_lambda_p(&m, 1.0, &EigenOptions::default()).is_err());
    }
}
