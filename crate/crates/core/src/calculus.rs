//! Norms, projections and the functional
//! `J^α_β(u) = ∫ exp(β u² (1 + α‖u‖_p²)) dv`.
//!
//! Constraints and `L^p` norms use the lumped mass; exponential integrands use
//! the triangle rule of [`crate::surface::quadrature`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::sparse::{pcg, CgOptions, SparseOperator};
use crate::surface::quadrature::{for_each_point, QuadratureRule};
use crate::surface::SurfaceMesh;

/// Admissibility tolerance on `|mean|`, relative to total area.
pub const MEAN_TOL: f64 = 1e-10;
/// Admissibility tolerance on `‖∇u‖₂² − 1`.
pub const ENERGY_TOL: f64 = 1e-10;
/// Largest exponent accepted inside `exp` before an overflow error.
pub const MAX_EXPONENT: f64 = 700.0;

/// Parameters `(α, β, p)` of `J^α_β` with the `L^p` norm in the exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalParams {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

impl FunctionalParams {
    pub fn new(alpha: f64, beta: f64, p: f64) -> Result<Self> {
        let fp = Self { alpha, beta, p };
        fp.validate()?;
        Ok(fp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::param(
                "alpha",
                format!("must be finite and ≥ 0, got {}", self.alpha),
            ));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::param(
                "beta",
                format!("must be finite and > 0, got {}", self.beta),
            ));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::param("p", format!("must be finite and > 1, got {}", self.p)));
        }
        Ok(())
    }
}

/// Discrete mean `Σ Mᵢuᵢ / Area`.
pub fn mean(mesh: &SurfaceMesh, u: &Field) -> f64 {
    integral(mesh, u) / mesh.total_area()
}

/// `∫ u dv` with the lumped mass.
pub fn integral(mesh: &SurfaceMesh, u: &Field) -> f64 {
    mesh.mass().iter().zip(u.values()).map(|(m, v)| m * v).sum()
}

/// `u − mean(u)`.
pub fn mean_zero_project(mesh: &SurfaceMesh, u: &Field) -> Field {
    let m = mean(mesh, u);
    u.map(|v| v - m)
}

/// `(Σ Mᵢ|uᵢ|^p)^{1/p}`.
pub fn lp_norm(mesh: &SurfaceMesh, u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param("p", format!("L^p norm needs finite p ≥ 1, got {p}")));
    }
    mesh.check_field(u)?;
    let scale = u.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = mesh
        .mass()
        .iter()
        .zip(u.values())
        .map(|(m, v)| m * (v.abs() / scale).powf(p))
        .sum();
    Ok(scale * s.powf(1.0 / p))
}

/// Dirichlet energy `uᵀKu = ∫|∇u|²`.
pub fn grad_norm_sq(mesh: &SurfaceMesh, u: &Field) -> f64 {
    mesh.stiffness().quad_form(u.values())
}

/// Element of the admissible set: mean zero and `‖∇u‖₂ ≤ 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibleField {
    field: Field,
    grad_norm_sq: f64,
    mean: f64,
}

impl AdmissibleField {
    /// Checks membership without modifying the field.
    pub fn new(mesh: &SurfaceMesh, field: Field) -> Result<Self> {
        mesh.check_field(&field)?;
        let m = mean(mesh, &field);
        let e = grad_norm_sq(mesh, &field);
        if m.abs() > MEAN_TOL * mesh.total_area() {
            return Err(Error::InvalidInput(format!("field has mean {m:e}, not zero")));
        }
        if e > 1.0 + ENERGY_TOL {
            return Err(Error::InvalidInput(format!("field has Dirichlet energy {e} > 1")));
        }
        Ok(Self {
            field,
            grad_norm_sq: e,
            mean: m,
        })
    }

    /// Projects to mean zero and scales to unit Dirichlet energy.
    pub fn normalize(mesh: &SurfaceMesh, u: &Field) -> Result<Self> {
        mesh.check_field(u)?;
        let v = mean_zero_project(mesh, u);
        let e = grad_norm_sq(mesh, &v);
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::InvalidInput("field is constant and cannot be normalized".into()));
        }
        let v = v.scaled(1.0 / e.sqrt());
        // one more projection removes round-off drift of the mean
        let v = mean_zero_project(mesh, &v);
        Self::new(mesh, v)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn into_field(self) -> Field {
        self.field
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.grad_norm_sq
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// `J`, the auxiliary integral `∫u² e^{E}` and the exponent factor
/// `s = 1 + α‖u‖_p²` of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub j: f64,
    pub u2_exp: f64,
    pub norm_p: f64,
    pub exponent_factor: f64,
    pub max_exponent: f64,
}

fn exponent_guard(mesh: &SurfaceMesh, u: &Field, coef: f64) -> Result<f64> {
    let i = u.argmax_abs();
    let e = coef * u[i] * u[i];
    if !(e <= MAX_EXPONENT) {
        let triangle = mesh.triangles().iter().position(|t| t.contains(&i)).unwrap_or(0);
        return Err(Error::Overflow { triangle, exponent: e });
    }
    Ok(e)
}

pub fn evaluate_functional(
    mesh: &SurfaceMesh,
    u: &Field,
    params: &FunctionalParams,
    rule: &QuadratureRule,
) -> Result<FunctionalValue> {
    params.validate()?;
    mesh.check_field(u)?;
    let norm_p = lp_norm(mesh, u, params.p)?;
    let s = 1.0 + params.alpha * norm_p * norm_p;
    let coef = params.beta * s;
    let max_exponent = exponent_guard(mesh, u, coef)?;
    let (mut j, mut u2) = (0.0, 0.0);
    for_each_point(mesh, u, rule, |_, v, w, _| {
        let e = (coef * v * v).exp();
        j += w * e;
        u2 += w * v * v * e;
        Ok(())
    })?;
    Ok(FunctionalValue {
        j,
        u2_exp: u2,
        norm_p,
        exponent_factor: s,
        max_exponent,
    })
}

/// `J^α_β(u)` with the default quadrature rule.
#[allow(non_snake_case)]
pub fn evaluate_J(mesh: &SurfaceMesh, u: &Field, params: &FunctionalParams) -> Result<f64> {
    Ok(evaluate_functional(mesh, u, params, &QuadratureRule::dunavant7())?.j)
}

/// Derivative of the discrete `J` with respect to the vertex values:
/// `⟨g, v⟩ = D_v J` for every field `v`.
///
/// `gᵢ = ∫ 2βs·u e^{βsu²} φᵢ + 2αβ‖u‖_p^{2−p} Mᵢ|uᵢ|^{p−2}uᵢ ∫ u² e^{βsu²}`.
/// The first term is the consistent load of the pointwise derivative, so
/// `g ≈ M·(L² gradient)`; see [`l2_gradient`].
pub fn functional_gradient(mesh: &SurfaceMesh, u: &Field, params: &FunctionalParams) -> Result<Field> {
    Ok(value_and_gradient(mesh, u, params, &QuadratureRule::dunavant7())?.1)
}

pub fn value_and_gradient(
    mesh: &SurfaceMesh,
    u: &Field,
    params: &FunctionalParams,
    rule: &QuadratureRule,
) -> Result<(FunctionalValue, Field)> {
    params.validate()?;
    mesh.check_field(u)?;
    let norm_p = lp_norm(mesh, u, params.p)?;
    let s = 1.0 + params.alpha * norm_p * norm_p;
    let coef = params.beta * s;
    let max_exponent = exponent_guard(mesh, u, coef)?;
    let tris = mesh.triangles();
    let mut g = vec![0.0; mesh.num_vertices()];
    let (mut j, mut u2) = (0.0, 0.0);
    for_each_point(mesh, u, rule, |t, v, w, b| {
        let e = (coef * v * v).exp();
        j += w * e;
        u2 += w * v * v * e;
        let d = w * 2.0 * coef * v * e;
        for k in 0..3 {
            g[tris[t][k]] += d * b[k];
        }
        Ok(())
    })?;
    if params.alpha > 0.0 && norm_p > 0.0 {
        let p = params.p;
        let c = 2.0 * params.alpha * params.beta * norm_p.powf(2.0 - p) * u2;
        for ((gi, &mi), &ui) in g.iter_mut().zip(mesh.mass()).zip(u.values()) {
            *gi += c * mi * ui.signum() * ui.abs().powf(p - 1.0);
        }
    }
    Ok((
        FunctionalValue {
            j,
            u2_exp: u2,
            norm_p,
            exponent_factor: s,
            max_exponent,
        },
        Field::new(g),
    ))
}

/// `M⁻¹g`: the gradient with respect to the lumped `L²` inner product.
pub fn l2_gradient(mesh: &SurfaceMesh, g: &Field) -> Field {
    Field::new(g.values().iter().zip(mesh.mass()).map(|(v, m)| v / m).collect())
}

/// Default correlation area of random smooth fields, relative to total area.
pub const SMOOTHING_FRACTION: f64 = 0.01;

/// Seeded smooth random admissible field: white noise filtered by
/// `(M + sK)⁻¹M` with `s = 0.01·Area`, projected and normalized.
pub fn random_admissible(mesh: &SurfaceMesh, seed: u64) -> Result<AdmissibleField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..mesh.num_vertices())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let z = smooth(mesh, &w, SMOOTHING_FRACTION * mesh.total_area())?;
    AdmissibleField::normalize(mesh, &Field::new(z))
}

/// `count` fields with seeds `base_seed, base_seed+1, …`.
pub fn random_admissible_set(mesh: &SurfaceMesh, base_seed: u64, count: usize) -> Result<Vec<AdmissibleField>> {
    (0..count as u64)
        .map(|k| random_admissible(mesh, base_seed.wrapping_add(k)))
        .collect()
}

fn smooth(mesh: &SurfaceMesh, w: &[f64], s: f64) -> Result<Vec<f64>> {
    let a = SparseOperator::diagonal(mesh.mass()).add_scaled(mesh.stiffness(), s);
    let rhs: Vec<f64> = w.iter().zip(mesh.mass()).map(|(x, m)| x * m).collect();
    let opts = CgOptions {
        rel_tol: 1e-10,
        ..CgOptions::default()
    };
    Ok(pcg(&a, &rhs, None, opts, false)?.0)
}
