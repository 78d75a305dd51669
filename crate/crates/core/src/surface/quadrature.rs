//! Symmetric triangle quadrature for nonlinear integrands of P1 fields.
//!
//! The default rule is the 7-point degree-5 rule of Dunavant. Its
//! four-fold subdivided version (28 points) serves as a reference when
//! estimating quadrature error.

use serde::Serialize;

use super::SurfaceMesh;
use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub name: &'static str,
    /// Polynomial degree integrated exactly on one (sub)triangle.
    pub degree: u32,
    /// Barycentric coordinates of the points.
    pub points: Vec<[f64; 3]>,
    /// Weights relative to triangle area; they sum to 1.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn dunavant7() -> Self {
        let s15 = 15f64.sqrt();
        let a = (6.0 - s15) / 21.0;
        let b = (6.0 + s15) / 21.0;
        let wa = (155.0 - s15) / 1200.0;
        let wb = (155.0 + s15) / 1200.0;
        let third = 1.0 / 3.0;
        Self {
            name: "dunavant-7",
            degree: 5,
            points: vec![
                [third, third, third],
                [1.0 - 2.0 * a, a, a],
                [a, 1.0 - 2.0 * a, a],
                [a, a, 1.0 - 2.0 * a],
                [1.0 - 2.0 * b, b, b],
                [b, 1.0 - 2.0 * b, b],
                [b, b, 1.0 - 2.0 * b],
            ],
            weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb],
        }
    }

    /// Same rule applied on the four midpoint subtriangles.
    pub fn subdivided(&self) -> Self {
        let corners = |k: usize| {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            e
        };
        let mid = |i: usize, j: usize| {
            let mut e = [0.0; 3];
            e[i] = 0.5;
            e[j] = 0.5;
            e
        };
        let subs = [
            [corners(0), mid(0, 1), mid(0, 2)],
            [mid(0, 1), corners(1), mid(1, 2)],
            [mid(0, 2), mid(1, 2), corners(2)],
            [mid(1, 2), mid(0, 2), mid(0, 1)],
        ];
        let mut points = Vec::with_capacity(4 * self.points.len());
        let mut weights = Vec::with_capacity(4 * self.points.len());
        for s in &subs {
            for (p, &w) in self.points.iter().zip(&self.weights) {
                let mut q = [0.0; 3];
                for (d, qd) in q.iter_mut().enumerate() {
                    *qd = (0..3).map(|k| p[k] * s[k][d]).sum();
                }
                points.push(q);
                weights.push(0.25 * w);
            }
        }
        Self {
            name: "dunavant-7x4",
            degree: self.degree,
            points,
            weights,
        }
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::dunavant7()
    }
}

/// Calls `visit(triangle, u(x), weight·area, barycentric)` at every
/// quadrature point of the mesh.
pub fn for_each_point(
    mesh: &SurfaceMesh,
    u: &Field,
    rule: &QuadratureRule,
    mut visit: impl FnMut(usize, f64, f64, &[f64; 3]) -> Result<()>,
) -> Result<()> {
    mesh.check_field(u)?;
    let uv = u.values();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.areas()[t];
        let (u0, u1, u2) = (uv[tri[0]], uv[tri[1]], uv[tri[2]]);
        for (b, &w) in rule.points.iter().zip(&rule.weights) {
            let val = b[0] * u0 + b[1] * u1 + b[2] * u2;
            visit(t, val, w * area, b)?;
        }
    }
    Ok(())
}

/// Per-triangle integrals of `f(u)` over the P1 interpolant.
pub fn triangle_integrals(
    mesh: &SurfaceMesh,
    u: &Field,
    rule: &QuadratureRule,
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mesh.num_triangles()];
    for_each_point(mesh, u, rule, |t, v, w, _| {
        let y = f(v);
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand { triangle: t });
        }
        out[t] += w * y;
        Ok(())
    })?;
    Ok(out)
}

/// `∫ f(u) dv` with the default rule.
pub fn nonlinear_quadrature(mesh: &SurfaceMesh, u: &Field, f: impl Fn(f64) -> f64) -> Result<f64> {
    integrate_with(mesh, u, &QuadratureRule::dunavant7(), f)
}

pub fn integrate_with(mesh: &SurfaceMesh, u: &Field, rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> Result<f64> {
    Ok(triangle_integrals(mesh, u, rule, f)?.iter().sum())
}

/// Load vector `bᵢ = ∫ f(u) φᵢ dv`.
pub fn load_vector(mesh: &SurfaceMesh, u: &Field, rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let mut b = vec![0.0; mesh.num_vertices()];
    let tris = mesh.triangles();
    for_each_point(mesh, u, rule, |t, v, w, bary| {
        let y = f(v);
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand { triangle: t });
        }
        for k in 0..3 {
            b[tris[t][k]] += w * y * bary[k];
        }
        Ok(())
    })?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_flat_torus, build_sphere};
    use std::f64::consts::PI;

    fn monomial_integral(rule: &QuadratureRule, e: [i32; 3]) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0].powi(e[0]) * p[1].powi(e[1]) * p[2].powi(e[2]))
            .sum()
    }

    fn factorial(n: i32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn exact_through_degree_five() {
        // ∫_T λ₀^a λ₁^b λ₂^c = 2|T| a! b! c! / (a+b+c+2)!
        for rule in [QuadratureRule::dunavant7(), QuadratureRule::dunavant7().subdivided()] {
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            for a in 0..=5 {
                for b in 0..=(5 - a) {
                    let c = 5 - a - b;
                    for e in [[a, b, 0], [a, b, c]] {
                        let exact = 2.0 * factorial(e[0]) * factorial(e[1]) * factorial(e[2])
                            / factorial(e[0] + e[1] + e[2] + 2);
                        let q = monomial_integral(&rule, e);
                        assert!((q - exact).abs() < 1e-15, "{e:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn exponential_of_zero_gives_area() {
        let m = build_sphere(2).unwrap();
        let v = nonlinear_quadrature(&m, &Field::zeros(m.num_vertices()), f64::exp).unwrap();
        assert!((v - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn zero_mean_linear_integrand() {
        let m = build_flat_torus(16).unwrap();
        let u = m.interpolate(|x| (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos());
        let v = nonlinear_quadrature(&m, &u, |t| t).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn cosine_squared() {
        let m = build_flat_torus(64).unwrap();
        let u = m.interpolate(|x| (2.0 * PI * x[0]).cos());
        let v = nonlinear_quadrature(&m, &u, |t| t * t).unwrap();
        assert!((v - 0.5).abs() < 0.005, "{v}");
    }

    #[test]
    fn non_finite_is_reported() {
        let m = build_flat_torus(4).unwrap();
        let u = Field::constant(m.num_vertices(), 1.0);
        let err = nonlinear_quadrature(&m, &u, |_| f64::INFINITY).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { triangle: 0 }));
    }

    #[test]
    fn load_vector_sums_to_integral() {
        let m = build_sphere(2).unwrap();
        let u = m.interpolate(|x| x[2]);
        let rule = QuadratureRule::dunavant7();
        let b = load_vector(&m, &u, &rule, |t| (t * t).exp()).unwrap();
        let total = integrate_with(&m, &u, &rule, |t| (t * t).exp()).unwrap();
        assert!((b.iter().sum::<f64>() - total).abs() < 1e-12);
    }
}
