//! Green functions with the `L^p` lower-order term and their Robin constants.
//!
//! `ΔG = δ_{x0} + α‖G‖_p^{2−p}|G|^{p−2}G − (1/Area)(1 + α‖G‖_p^{2−p}∫|G|^{p−2}G)`
//! with `∫G = 0`. Near the source `G = −(1/2π)log r + A_{x0} + σ(x)` in the
//! isothermal chart, with `σ(x0) = 0`; the Robin constant `A_{x0}` is read off
//! by least squares on an annulus of chart radii.

pub mod oracle;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calculus::{integral, lp_norm};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::surface::chart::chart_coordinates;
use crate::surface::SurfaceMesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenOptions {
    /// Weight of the new iterate in the damped fixed point.
    pub damping: f64,
    /// Stop when successive iterates differ by less than this in `L²`.
    pub tol: f64,
    pub max_iter: usize,
    /// Fit annulus in units of the local spacing `h` at `x0`.
    pub annulus: (f64, f64),
    /// Second annulus used to check the stability of the fit.
    pub stability_annulus: (f64, f64),
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 1000,
            annulus: (3.0, 10.0),
            stability_annulus: (4.0, 12.0),
        }
    }
}

/// Least-squares fit of `G + (1/2π)log r ≈ A + b·y + c|y|²` on an annulus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobinFit {
    pub a_x0: f64,
    /// `[A, b₁, b₂, c]`.
    pub coefficients: [f64; 4],
    pub r_inner: f64,
    pub r_outer: f64,
    pub h: f64,
    pub samples: usize,
    pub rms_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenDecomposition {
    pub g: Field,
    pub x0: usize,
    pub alpha: f64,
    pub p: f64,
    /// Robin constant from the primary annulus; `None` without a chart.
    pub a_x0: Option<f64>,
    pub fit: Option<RobinFit>,
    pub stability_fit: Option<RobinFit>,
    /// `(r, σ)` at the vertices of the primary annulus, sorted by `r`.
    pub sigma_samples: Vec<(f64, f64)>,
    pub l2_norm: f64,
    pub lp_norm: f64,
    /// `‖K G − RHS(G)‖₂` of the discrete equation.
    pub equation_residual: f64,
    /// `L²` differences of successive fixed-point iterates.
    pub iteration_history: Vec<f64>,
    /// `p < 2` makes `|G|^{p−2}` singular at the zero set of `G`.
    pub experimental: bool,
}

/// Discrete right-hand side of the Green equation at `g`.
fn rhs(mesh: &SurfaceMesh, g: &Field, x0: usize, alpha: f64, p: f64) -> Result<Vec<f64>> {
    let mass = mesh.mass();
    let area = mesh.total_area();
    let mut b: Vec<f64> = mass.iter().map(|m| -m / area).collect();
    b[x0] += 1.0;
    if alpha > 0.0 {
        let n = lp_norm(mesh, g, p)?;
        if n > 0.0 {
            let c = alpha * n.powf(2.0 - p);
            let pw: Vec<f64> = g.values().iter().map(|v| v.signum() * v.abs().powf(p - 1.0)).collect();
            let total: f64 = pw.iter().zip(mass).map(|(a, m)| a * m).sum();
            for ((bi, mi), wi) in b.iter_mut().zip(mass).zip(&pw) {
                *bi += c * mi * wi - mi / area * c * total;
            }
        }
    }
    Ok(b)
}

fn l2_diff(mesh: &SurfaceMesh, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(mesh.mass())
        .map(|((x, y), m)| m * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Solves the Green equation with source at vertex `x0` and fits the
/// Robin constant when the surface has a chart.
pub fn solve_green(
    mesh: &SurfaceMesh,
    x0: usize,
    alpha: f64,
    p: f64,
    opts: &GreenOptions,
) -> Result<GreenDecomposition> {
    if x0 >= mesh.num_vertices() {
        return Err(Error::param("x0", format!("vertex {x0} out of range")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("must be finite and ≥ 0, got {alpha}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::param("p", format!("must be > 1, got {p}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::param("damping", "must lie in (0, 1]"));
    }
    let mut g = Field::new(mesh.solve_laplace(&rhs(mesh, &Field::zeros(mesh.num_vertices()), x0, 0.0, p)?)?);
    let mut history = Vec::new();
    if alpha > 0.0 {
        let mut converged = false;
        for _ in 0..opts.max_iter {
            let next = mesh.solve_laplace(&rhs(mesh, &g, x0, alpha, p)?)?;
            let mixed: Vec<f64> = g
                .values()
                .iter()
                .zip(&next)
                .map(|(a, b)| (1.0 - opts.damping) * a + opts.damping * b)
                .collect();
            let d = l2_diff(mesh, g.values(), &mixed);
            history.push(d);
            g = Field::new(mixed);
            if !d.is_finite() {
                break;
            }
            if d < opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                solver: "Green fixed point",
                iterations: history.len(),
                residual: history.last().copied().unwrap_or(f64::NAN),
                best_value: history.last().copied().unwrap_or(f64::NAN),
                best: Some(Box::new(g)),
            });
        }
    }
    let b = rhs(mesh, &g, x0, alpha, p)?;
    let kg = mesh.stiffness().mul_vec(g.values());
    let equation_residual = kg.iter().zip(&b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
    let (fit, stability_fit, sigma_samples) = if mesh.geometry().has_chart() {
        let fit = robin_fit(mesh, &g, x0, opts.annulus)?;
        let stab = robin_fit(mesh, &g, x0, opts.stability_annulus)?;
        let samples = sigma_samples(mesh, &g, x0, &fit)?;
        (Some(fit), Some(stab), samples)
    } else {
        (None, None, Vec::new())
    };
    Ok(GreenDecomposition {
        l2_norm: lp_norm(mesh, &g, 2.0)?,
        lp_norm: lp_norm(mesh, &g, p)?,
        a_x0: fit.as_ref().map(|f| f.a_x0),
        fit,
        stability_fit,
        sigma_samples,
        g,
        x0,
        alpha,
        p,
        equation_residual,
        iteration_history: history,
        experimental: p < 2.0,
    })
}

/// `(y, |y|)` of every vertex in the chart centered at `x0`.
fn chart_samples(mesh: &SurfaceMesh, x0: usize) -> Result<Vec<([f64; 2], f64)>> {
    let c = mesh.vertices()[x0];
    mesh.vertices()
        .iter()
        .map(|&q| {
            let y = chart_coordinates(mesh.geometry(), c, q).unwrap_or([f64::INFINITY; 2]);
            Ok((y, (y[0] * y[0] + y[1] * y[1]).sqrt()))
        })
        .collect()
}

/// Fits `G + (1/2π)log r` on the chart annulus `[a·h, b·h]` around `x0`,
/// where `h` is the mean edge length at `x0`.
pub fn robin_fit(mesh: &SurfaceMesh, g: &Field, x0: usize, annulus: (f64, f64)) -> Result<RobinFit> {
    if !mesh.geometry().has_chart() {
        return Err(Error::UnsupportedGeometry("Robin fit needs an isothermal chart".into()));
    }
    let (a, b) = annulus;
    if !(a > 0.0 && b > a) {
        return Err(Error::param(
            "annulus",
            format!("need 0 < inner < outer, got ({a}, {b})"),
        ));
    }
    let h = mesh.local_spacing(x0);
    let (r0, r1) = (a * h, b * h);
    let pts = chart_samples(mesh, x0)?;
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    let mut rows = Vec::new();
    for (i, (y, r)) in pts.iter().enumerate() {
        if *r < r0 || *r > r1 {
            continue;
        }
        let phi = [1.0, y[0] / h, y[1] / h, r * r / (h * h)];
        let t = g[i] + r.ln() / (2.0 * PI);
        for j in 0..4 {
            for k in 0..4 {
                ata[j][k] += phi[j] * phi[k];
            }
            atb[j] += phi[j] * t;
        }
        rows.push((phi, t));
    }
    if rows.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "Robin fit needs at least 8 vertices in the annulus [{r0:.3e}, {r1:.3e}], found {}",
            rows.len()
        )));
    }
    let coef = solve4(ata, atb).ok_or_else(|| Error::InvalidInput("degenerate annulus samples".into()))?;
    let rms = (rows
        .iter()
        .map(|(phi, t)| {
            let f: f64 = phi.iter().zip(&coef).map(|(x, c)| x * c).sum();
            (f - t).powi(2)
        })
        .sum::<f64>()
        / rows.len() as f64)
        .sqrt();
    Ok(RobinFit {
        a_x0: coef[0],
        coefficients: [coef[0], coef[1] / h, coef[2] / h, coef[3] / (h * h)],
        r_inner: r0,
        r_outer: r1,
        h,
        samples: rows.len(),
        rms_residual: rms,
    })
}

fn sigma_samples(mesh: &SurfaceMesh, g: &Field, x0: usize, fit: &RobinFit) -> Result<Vec<(f64, f64)>> {
    let pts = chart_samples(mesh, x0)?;
    let mut out: Vec<(f64, f64)> = pts
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| *r >= fit.r_inner && *r <= fit.r_outer)
        .map(|(i, (_, r))| (*r, g[i] + r.ln() / (2.0 * PI) - fit.a_x0))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// `(r, G, σ)` at every vertex with chart radius in `(0, r_max]`, sorted by `r`.
pub fn radial_profile(mesh: &SurfaceMesh, green: &GreenDecomposition, r_max: f64) -> Result<Vec<(f64, f64, f64)>> {
    let a = green
        .a_x0
        .ok_or_else(|| Error::UnsupportedGeometry("radial profile needs a Robin constant".into()))?;
    let pts = chart_samples(mesh, green.x0)?;
    let mut out: Vec<(f64, f64, f64)> = pts
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| *r > 0.0 && *r <= r_max)
        .map(|(i, (_, r))| (*r, green.g[i], green.g[i] + r.ln() / (2.0 * PI) - a))
        .collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    Ok(out)
}

/// `Area + π·e^{1+4πA}`.
pub fn bound_from_robin(area: f64, a_x0: f64) -> f64 {
    area + PI * (1.0 + 4.0 * PI * a_x0).exp()
}

/// Upper bound `Area(Σ) + π e^{1+4πA_{x0}}` for the critical functional in
/// the concentrating regime.
pub fn upper_bound(mesh: &SurfaceMesh, green: &GreenDecomposition) -> Result<f64> {
    let a = green
        .a_x0
        .ok_or_else(|| Error::UnsupportedGeometry("upper bound needs a Robin constant".into()))?;
    Ok(bound_from_robin(mesh.total_area(), a))
}

/// Mean of `G`, which the gauge keeps at zero.
pub fn green_mean(mesh: &SurfaceMesh, green: &GreenDecomposition) -> f64 {
    integral(mesh, &green.g) / mesh.total_area()
}

/// Gaussian elimination with partial pivoting on a 4×4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_flat_torus, build_sphere, Geometry};

    #[test]
    fn bound_plug_in() {
        assert!((bound_from_robin(1.0, 0.0) - (1.0 + PI * 1f64.exp())).abs() < 1e-14);
        assert!((bound_from_robin(2.0, -1.0 / (4.0 * PI)) - (2.0 + PI)).abs() < 1e-14);
    }

    #[test]
    fn compatibility_of_source() {
        let m = build_flat_torus(8).unwrap();
        let b = rhs(&m, &Field::zeros(64), 3, 0.0, 2.0).unwrap();
        assert!(b.iter().sum::<f64>().abs() < 1e-15);
        let g = m.interpolate(|x| (2.0 * PI * x[0]).sin());
        let b = rhs(&m, &g, 3, 0.5, 3.0).unwrap();
        assert!(b.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn solves_discrete_equation() {
        let m = build_sphere(3).unwrap();
        for (alpha, p) in [(0.0, 2.0), (0.5, 2.0), (0.3, 3.0)] {
            let gr = solve_green(&m, 7, alpha, p, &GreenOptions::default()).unwrap();
            assert!(gr.equation_residual < 1e-8, "{alpha} {p}: {}", gr.equation_residual);
            assert!(green_mean(&m, &gr).abs() < 1e-12);
            assert!(gr.a_x0.is_some());
        }
    }

    #[test]
    fn user_mesh_gets_green_without_robin() {
        let s = build_sphere(2).unwrap();
        let m = SurfaceMesh::from_parts(Geometry::Embedded, s.vertices().to_vec(), s.triangles().to_vec()).unwrap();
        let gr = solve_green(&m, 0, 0.0, 2.0, &GreenOptions::default()).unwrap();
        assert!(gr.a_x0.is_none());
        assert!(matches!(upper_bound(&m, &gr), Err(Error::UnsupportedGeometry(_))));
        assert!(matches!(
            robin_fit(&m, &gr.g, 0, (3.0, 10.0)),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn solve4_matches_known_solution() {
        let a = [
            [4.0, 1.0, 0.0, 2.0],
            [1.0, 3.0, 1.0, 0.0],
            [0.0, 1.0, 5.0, 1.0],
            [2.0, 0.0, 1.0, 6.0],
        ];
        let x = [1.0, -2.0, 0.5, 3.0];
        let b: Vec<f64> = a.iter().map(|r| r.iter().zip(&x).map(|(p, q)| p * q).sum()).collect();
        let y = solve4(a, [b[0], b[1], b[2], b[3]]).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
