//! Explicit test-function families probing the critical functional.
//!
//! Part (i): for `α ≥ λ_p` the family `m_ε` built from the minimizer `v₀`
//! of `λ_p` drives `J^α_{4π}` up without bound as `ε → 0`.
//! Part (iii): for small `α` the blow-up family `v_ε` built from the Green
//! function beats the upper bound `Area + πe^{1+4πA_{x0}}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calculus::{evaluate_functional, grad_norm_sq, lp_norm, mean, AdmissibleField, FunctionalParams};
use crate::eigen::{compute_lambda_p, EigenOptions, EigenResult};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::green::{bound_from_robin, solve_green, upper_bound, GreenDecomposition, GreenOptions};
use crate::surface::chart::{chart_coordinates, chart_point, chart_radius_limit, transfer, Locator};
use crate::surface::{build_graded_torus, Geometry, QuadratureRule, SurfaceMesh};

/// Upper clip for the Part-(i) radius `δ`, which grows like `(−log ε)^{3/4}`.
pub const DELTA_MAX: f64 = 0.2;
/// Innermost graded spacing relative to `ε`.
pub const H_MIN_FACTOR: f64 = 0.125;
/// Coarsest admissible local spacing at the center, relative to `ε`.
pub const RESOLUTION_FACTOR: f64 = 0.25;
/// Samples per radial section in the driver reports.
pub const SECTION_SAMPLES: usize = 40;

/// `α` given directly or as a multiple of `λ_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AlphaSpec {
    Value(f64),
    LambdaTimes(f64),
}

impl AlphaSpec {
    pub fn resolve(self, lambda_p: f64) -> f64 {
        match self {
            Self::Value(a) => a,
            Self::LambdaTimes(k) => k * lambda_p,
        }
    }
}

impl std::str::FromStr for AlphaSpec {
    type Err = Error;

    /// Accepts `0.3`, `lambda_p` or `0.001*lambda_p`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || {
            Error::param(
                "alpha",
                format!("expected a number, `lambda_p` or `<k>*lambda_p`, got `{s}`"),
            )
        };
        if s == "lambda_p" {
            return Ok(Self::LambdaTimes(1.0));
        }
        if let Some(k) = s.strip_suffix("*lambda_p") {
            let k: f64 = k.trim().parse().map_err(|_| bad())?;
            return Ok(Self::LambdaTimes(k));
        }
        s.parse::<f64>().map(Self::Value).map_err(|_| bad())
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Chart radius of every vertex around vertex `center`; points outside the
/// chart get `+∞`.
fn radii(mesh: &SurfaceMesh, center: usize) -> Vec<f64> {
    let c = mesh.vertices()[center];
    mesh.vertices()
        .iter()
        .map(|&q| {
            chart_coordinates(mesh.geometry(), c, q)
                .map(|y| (y[0] * y[0] + y[1] * y[1]).sqrt())
                .unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Largest gradient norm of the P1 interpolant of `f` over all triangles.
fn max_gradient(mesh: &SurfaceMesh, f: &Field) -> f64 {
    let tris = mesh.triangles();
    (0..mesh.num_triangles())
        .map(|t| {
            let c = mesh.corners(t);
            let tri = tris[t];
            let e1: Vec<f64> = (0..3).map(|k| c[1][k] - c[0][k]).collect();
            let e2: Vec<f64> = (0..3).map(|k| c[2][k] - c[0][k]).collect();
            let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let (g11, g12, g22) = (d(&e1, &e1), d(&e1, &e2), d(&e2, &e2));
            let (f1, f2) = (f[tri[1]] - f[tri[0]], f[tri[2]] - f[tri[0]]);
            let det = g11 * g22 - g12 * g12;
            let a = (g22 * f1 - g12 * f2) / det;
            let b = (g11 * f2 - g12 * f1) / det;
            (a * a * g11 + 2.0 * a * b * g12 + b * b * g22).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

fn check_resolution(mesh: &SurfaceMesh, center: usize, eps: f64) -> Result<()> {
    let h = mesh.local_spacing(center);
    let required = RESOLUTION_FACTOR * eps;
    if h > required {
        return Err(Error::Resolution { required, actual: h });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param("eps", format!("must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    for &e in eps_list {
        check_eps(e)?;
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps", "list must be strictly decreasing"));
    }
    Ok(())
}

/// `|J(rule) − J(subdivided rule)|`, the recorded quadrature error.
fn quadrature_tolerance(mesh: &SurfaceMesh, u: &Field, params: &FunctionalParams) -> Result<f64> {
    let rule = QuadratureRule::dunavant7();
    let a = evaluate_functional(mesh, u, params, &rule)?.j;
    let b = evaluate_functional(mesh, u, params, &rule.subdivided())?.j;
    Ok((a - b).abs())
}

/// Values of `u` along the chart ray `y = (r, 0)` from vertex `center`, at
/// `count` logarithmically spaced radii in `[r_min, r_max]`.
pub fn radial_section(
    mesh: &SurfaceMesh,
    u: &Field,
    center: usize,
    r_min: f64,
    r_max: f64,
    count: usize,
) -> Result<Vec<(f64, f64)>> {
    mesh.check_field(u)?;
    if !(r_min > 0.0 && r_max > r_min) || count < 2 {
        return Err(Error::param("radial_section", "need 0 < r_min < r_max and count ≥ 2"));
    }
    let loc = Locator::new(mesh)?;
    let c = mesh.vertices()[center];
    let mut out = Vec::with_capacity(count + 1);
    out.push((0.0, u[center]));
    for k in 0..count {
        let r = r_min * (r_max / r_min).powf(k as f64 / (count - 1) as f64);
        let q = chart_point(mesh.geometry(), c, [r, 0.0])?;
        let v = loc
            .interpolate(u, q)
            .ok_or_else(|| Error::InvalidInput(format!("chart point at r = {r} not on the mesh")))?;
        out.push((r, v));
    }
    Ok(out)
}

// ---------------------------------------------------------------- part (i)

/// Scales of the Part-(i) family. `δ = t⁻¹√(−log ε)` is clipped at
/// [`DELTA_MAX`] so that the cutoff annulus stays inside the chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartIFamilyParams {
    pub eps: f64,
    pub t_eps: f64,
    /// Center vertex, a positive maximum point of `v₀`.
    pub x0: usize,
    pub delta: f64,
    /// `t⁻¹√(−log ε)` before clipping.
    pub delta_nominal: f64,
    /// The cutoff `η` rises from 0 at `δ` to 1 at `2δ` (cubic smoothstep).
    pub eta_inner: f64,
    pub eta_outer: f64,
}

/// Asymptotic side conditions on `t_ε`, evaluated at the chosen `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartIConstraints {
    /// `−t² log ε`, meant to be large.
    pub t2_log: f64,
    /// `t² √(−log ε)`, meant to be small.
    pub t2_sqrt_log: f64,
    /// `−t² log ε ≥ 10`.
    pub t2_log_large: bool,
    /// `t² √(−log ε) ≤ 0.1`.
    pub t2_sqrt_log_small: bool,
    pub delta_clipped: bool,
}

impl PartIFamilyParams {
    /// Default `t_ε = (−log ε)^{−1/4}`.
    pub fn new(eps: f64, x0: usize) -> Result<Self> {
        check_eps(eps)?;
        Self::with_t(eps, (-eps.ln()).powf(-0.25), x0)
    }

    pub fn with_t(eps: f64, t_eps: f64, x0: usize) -> Result<Self> {
        check_eps(eps)?;
        if !(t_eps > 0.0) {
            return Err(Error::param("t_eps", "must be positive"));
        }
        let l = -eps.ln();
        let delta_nominal = l.sqrt() / t_eps;
        let delta = delta_nominal.min(DELTA_MAX);
        if delta <= eps {
            return Err(Error::param("eps", format!("needs δ = {delta} > ε")));
        }
        Ok(Self {
            eps,
            t_eps,
            x0,
            delta,
            delta_nominal,
            eta_inner: delta,
            eta_outer: 2.0 * delta,
        })
    }

    pub fn constraints(&self) -> PartIConstraints {
        let l = -self.eps.ln();
        let t2 = self.t_eps * self.t_eps;
        PartIConstraints {
            t2_log: t2 * l,
            t2_sqrt_log: t2 * l.sqrt(),
            t2_log_large: t2 * l >= 10.0,
            t2_sqrt_log_small: t2 * l.sqrt() <= 0.1,
            delta_clipped: self.delta < self.delta_nominal,
        }
    }

    /// `√(−log ε / 2π)`, the core plateau value.
    pub fn core_value(&self) -> f64 {
        (-self.eps.ln() / (2.0 * PI)).sqrt()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIFamily {
    /// `m_ε = v*_ε / ‖∇v*_ε‖₂`.
    pub field: AdmissibleField,
    pub params: PartIFamilyParams,
    /// The three-zone field `v_ε` before projection.
    pub raw: Field,
    /// `v̄₀(x_δ)` at the chart point `(δ, 0)`.
    pub v0_x_delta: f64,
    pub grad_norm_sq: f64,
    /// `‖v*_ε‖₂²`, the normalizer written in the source construction.
    pub l2_norm_sq: f64,
    /// `1 − 2√(2π/(−log ε))·t·v̄₀(x_δ) + t²`.
    pub energy_leading: f64,
    /// `2π(t v̄₀(x_δ) − √(−log ε/2π))²/(log δ − log ε) + t²`.
    pub energy_two_term: f64,
    /// `max|∇η|·δ`, bounded by 2.
    pub eta_gradient_times_delta: f64,
}

/// Builds `m_ε` around `params.x0` from the minimizer `v₀` of `eigen`,
/// which must live on `mesh`.
pub fn build_part_i_family(mesh: &SurfaceMesh, eigen: &EigenResult, params: &PartIFamilyParams) -> Result<PartIFamily> {
    mesh.check_field(&eigen.v0)?;
    let x0 = params.x0;
    if x0 >= mesh.num_vertices() {
        return Err(Error::param("x0", format!("vertex {x0} out of range")));
    }
    let limit = chart_radius_limit(mesh.geometry())
        .ok_or_else(|| Error::UnsupportedGeometry("Part (i) family needs an isothermal chart".into()))?;
    if 2.0 * params.delta >= limit {
        return Err(Error::param(
            "delta",
            format!("2δ = {} leaves the chart", 2.0 * params.delta),
        ));
    }
    let v0 = &eigen.v0;
    if !(v0[x0] > 0.0) {
        return Err(Error::param("x0", format!("needs v0(x0) > 0, got {}", v0[x0])));
    }
    check_resolution(mesh, x0, params.eps)?;
    let loc = Locator::new(mesh)?;
    let c = mesh.vertices()[x0];
    let q = chart_point(mesh.geometry(), c, [params.delta, 0.0])?;
    let vd = loc
        .interpolate(v0, q)
        .ok_or_else(|| Error::InvalidInput("x_δ not found on the mesh".into()))?;

    let (eps, t, delta) = (params.eps, params.t_eps, params.delta);
    let a = params.core_value();
    let (ld, le) = (delta.ln(), eps.ln());
    let rho = radii(mesh, x0);
    let eta = Field::new(rho.iter().map(|&r| smoothstep((r - delta) / delta)).collect());
    let raw = Field::new(
        rho.iter()
            .enumerate()
            .map(|(i, &r)| {
                if r < eps {
                    a
                } else if r <= delta {
                    let lr = r.ln();
                    (a * (ld - lr) - t * vd * (le - lr)) / (ld - le)
                } else {
                    t * (vd + eta[i] * (v0[i] - vd))
                }
            })
            .collect(),
    );
    let m = mean(mesh, &raw);
    let vstar = raw.map(|v| v - m);
    let e = grad_norm_sq(mesh, &vstar);
    let l2 = lp_norm(mesh, &vstar, 2.0)?.powi(2);
    let field = AdmissibleField::new(mesh, vstar.scaled(1.0 / e.sqrt()))?;
    let eta_slope = max_gradient(mesh, &eta) * delta;
    if eta_slope > 2.0 {
        return Err(Error::InvalidInput(format!(
            "cutoff slope |∇η|·δ = {eta_slope} exceeds 2"
        )));
    }
    let l = -le;
    Ok(PartIFamily {
        field,
        params: *params,
        raw,
        v0_x_delta: vd,
        grad_norm_sq: e,
        l2_norm_sq: l2,
        energy_leading: 1.0 - 2.0 * (2.0 * PI / l).sqrt() * t * vd + t * t,
        energy_two_term: 2.0 * PI * (t * vd - a).powi(2) / (ld - le) + t * t,
        eta_gradient_times_delta: eta_slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartIOptions {
    pub eigen: EigenOptions,
    /// Build a graded torus per `ε`; otherwise the base mesh is used as is.
    pub graded: bool,
    pub h_min_factor: f64,
    /// Also evaluate the `α = 0` control against the upper bound.
    pub control: bool,
    pub green: GreenOptions,
}

impl Default for PartIOptions {
    fn default() -> Self {
        Self {
            eigen: EigenOptions::default(),
            graded: true,
            h_min_factor: H_MIN_FACTOR,
            control: true,
            green: GreenOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIRow {
    pub eps: f64,
    pub family: PartIFamilyParams,
    pub constraints: PartIConstraints,
    pub v0_x_delta: f64,
    pub core_value: f64,
    pub j_value: f64,
    pub tol_quad: f64,
    /// `e^{t√(−log ε)·v₀(x₀)}`, the growth predictor up to a constant.
    pub predictor: f64,
    pub grad_norm_sq: f64,
    pub l2_norm_sq: f64,
    pub energy_leading: f64,
    pub energy_two_term: f64,
    pub j_control: Option<f64>,
    pub control_below_bound: Option<bool>,
    pub mesh_vertices: usize,
    pub h_min: f64,
    pub mesh_hash: String,
    /// `(r, v_ε)` along the chart ray `(r, 0)` from the center.
    pub section: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIReport {
    pub p: f64,
    pub lambda_p: Option<f64>,
    pub alpha: Option<f64>,
    pub x0_point: Option<[f64; 3]>,
    pub v0_x0: Option<f64>,
    pub robin_constant: Option<f64>,
    /// `Area + πe^{1+4πA}` at `x₀`, from the base mesh.
    pub bound: Option<f64>,
    pub rows: Vec<PartIRow>,
    /// `J` strictly increases along the list.
    pub monotone: bool,
    pub violations: Vec<String>,
}

/// Side length of a uniform torus mesh, if `mesh` is one.
fn torus_side(mesh: &SurfaceMesh) -> Option<usize> {
    if mesh.geometry() != Geometry::Torus {
        return None;
    }
    let n = (mesh.num_vertices() as f64).sqrt().round() as usize;
    (n * n == mesh.num_vertices()).then_some(n)
}

/// Mesh resolving scale `eps` around `center`: a graded torus when
/// possible, else `base` itself with vertex `center_vertex`.
fn resolved_mesh(
    base: &SurfaceMesh,
    center_vertex: usize,
    eps: f64,
    graded: bool,
    h_factor: f64,
) -> Result<(SurfaceMesh, usize, f64)> {
    if graded {
        let n = torus_side(base)
            .ok_or_else(|| Error::UnsupportedGeometry("graded meshes are built for uniform torus bases only".into()))?;
        let c = base.vertices()[center_vertex];
        let h_min = h_factor * eps;
        let g = build_graded_torus(n, [c[0], c[1]], h_min)?;
        Ok((g.mesh, g.center_vertex, g.h_min.min(g.h_base)))
    } else {
        let h = base.local_spacing(center_vertex);
        Ok((base.clone(), center_vertex, h))
    }
}

/// Section of a family member from `ε/10` to the chart edge.
fn section_of(mesh: &SurfaceMesh, raw: &Field, center: usize, eps: f64) -> Result<Vec<(f64, f64)>> {
    let r_max = chart_radius_limit(mesh.geometry()).map_or(0.45, |l| (0.9 * l).min(0.45));
    radial_section(mesh, raw, center, eps / 10.0, r_max, SECTION_SAMPLES)
}

/// Evaluates `J^α_{4π}(m_ε)` along `eps_list` in the regime `α ≥ λ_p`.
pub fn part_i_divergence_report(
    base: &SurfaceMesh,
    alpha: AlphaSpec,
    p: f64,
    eps_list: &[f64],
    opts: &PartIOptions,
) -> Result<PartIReport> {
    check_eps_list(eps_list)?;
    if eps_list.is_empty() {
        return Ok(PartIReport {
            p,
            lambda_p: None,
            alpha: None,
            x0_point: None,
            v0_x0: None,
            robin_constant: None,
            bound: None,
            rows: Vec::new(),
            monotone: true,
            violations: Vec::new(),
        });
    }
    let eigen = compute_lambda_p(base, p, &opts.eigen)?;
    let lambda = eigen.lambda_p;
    let a = alpha.resolve(lambda);
    if !(a >= lambda * (1.0 - 1e-12)) {
        return Err(Error::param(
            "alpha",
            format!("Part (i) needs alpha ≥ lambda_p = {lambda}, got {a}"),
        ));
    }
    let x0 = eigen.v0.argmax();
    let green = solve_green(base, x0, 0.0, 2.0, &opts.green)?;
    let bound = upper_bound(base, &green)?;
    let params = FunctionalParams::new(a, 4.0 * PI, p)?;
    let control = FunctionalParams::new(0.0, 4.0 * PI, p)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (mesh, center, h_min) = resolved_mesh(base, x0, eps, opts.graded, opts.h_min_factor)?;
        let mut local = eigen.clone();
        if opts.graded {
            local.v0 = transfer(base, &eigen.v0, &mesh)?;
        }
        let fp = PartIFamilyParams::new(eps, center)?;
        let fam = build_part_i_family(&mesh, &local, &fp)?;
        let u = fam.field.field();
        let j = evaluate_functional(&mesh, u, &params, &QuadratureRule::dunavant7())?.j;
        let (j_control, below) = if opts.control {
            let jc = evaluate_functional(&mesh, u, &control, &QuadratureRule::dunavant7())?.j;
            (Some(jc), Some(jc < bound))
        } else {
            (None, None)
        };
        let l = -eps.ln();
        rows.push(PartIRow {
            eps,
            constraints: fp.constraints(),
            family: fp,
            v0_x_delta: fam.v0_x_delta,
            core_value: fam.raw[center],
            j_value: j,
            tol_quad: quadrature_tolerance(&mesh, u, &params)?,
            predictor: (fp.t_eps * l.sqrt() * local.v0[center]).exp(),
            grad_norm_sq: fam.grad_norm_sq,
            l2_norm_sq: fam.l2_norm_sq,
            energy_leading: fam.energy_leading,
            energy_two_term: fam.energy_two_term,
            j_control,
            control_below_bound: below,
            mesh_vertices: mesh.num_vertices(),
            h_min,
            mesh_hash: mesh.content_hash(),
            section: section_of(&mesh, &fam.raw, center, eps)?,
        });
    }
    let mut violations = Vec::new();
    for w in rows.windows(2) {
        if !(w[1].j_value > w[0].j_value) {
            violations.push(format!(
                "J decreased from {} at eps = {} to {} at eps = {}",
                w[0].j_value, w[0].eps, w[1].j_value, w[1].eps
            ));
        }
    }
    for r in &rows {
        if r.control_below_bound == Some(false) {
            violations.push(format!(
                "alpha = 0 control J = {} exceeds the bound {bound} at eps = {}",
                r.j_control.unwrap_or(f64::NAN),
                r.eps
            ));
        }
    }
    Ok(PartIReport {
        p,
        lambda_p: Some(lambda),
        alpha: Some(a),
        x0_point: Some(base.vertices()[x0]),
        v0_x0: Some(eigen.v0[x0]),
        robin_constant: green.a_x0,
        bound: Some(bound),
        monotone: rows.windows(2).all(|w| w[1].j_value > w[0].j_value),
        rows,
        violations,
    })
}

// -------------------------------------------------------------- part (iii)

/// Constants of the Part-(iii) family: `R = −log ε`, `B = 1/4π` and `c²`
/// from exact matching at `r = Rε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartIIIFamilyParams {
    pub eps: f64,
    pub r_big: f64,
    pub b: f64,
    pub c_sq: f64,
    /// `(1/4π)log π − B − (1/2π)log ε + A`, the expansion of `c²`.
    pub c_sq_expansion: f64,
    /// `c² − c_sq_expansion`, of order `R⁻²`.
    pub c_sq_defect: f64,
    /// `√(c² + α‖G‖_p²)`.
    pub scale: f64,
    pub a_x0: f64,
    pub g_lp_norm: f64,
    pub g_l2_norm: f64,
    /// The cutoff `ξ` falls from 1 at `Rε` to 0 at `2Rε` (cubic smoothstep).
    pub xi_inner: f64,
    pub xi_outer: f64,
}

impl PartIIIFamilyParams {
    pub fn new(eps: f64, a_x0: f64, alpha: f64, g_lp_norm: f64, g_l2_norm: f64) -> Result<Self> {
        check_eps(eps)?;
        let r = -eps.ln();
        let re = r * eps;
        let b = 1.0 / (4.0 * PI);
        let c_sq = -re.ln() / (2.0 * PI) + a_x0 + (1.0 + PI * r * r).ln() / (4.0 * PI) - b;
        if !(c_sq > 0.0) {
            return Err(Error::param(
                "eps",
                format!("c² = {c_sq} is not positive; eps too large"),
            ));
        }
        let expansion = PI.ln() / (4.0 * PI) - b - eps.ln() / (2.0 * PI) + a_x0;
        Ok(Self {
            eps,
            r_big: r,
            b,
            c_sq,
            c_sq_expansion: expansion,
            c_sq_defect: c_sq - expansion,
            scale: (c_sq + alpha * g_lp_norm * g_lp_norm).sqrt(),
            a_x0,
            g_lp_norm,
            g_l2_norm,
            xi_inner: re,
            xi_outer: 2.0 * re,
        })
    }

    /// Inner-zone profile before division by the scale.
    pub fn inner(&self, r: f64) -> f64 {
        self.c_sq - (1.0 + PI * r * r / (self.eps * self.eps)).ln() / (4.0 * PI) + self.b
    }

    /// `−(1/2π)log r + A`, the singular part of `G` plus the Robin constant.
    pub fn singular(&self, r: f64) -> f64 {
        -r.ln() / (2.0 * PI) + self.a_x0
    }

    /// `(4π‖G‖₂²/c²)(1 − πα²‖G‖_p⁴e^{1+4πA}/‖G‖₂²)`.
    pub fn predicted_margin(&self, alpha: f64) -> f64 {
        let g2 = self.g_l2_norm * self.g_l2_norm;
        let gp4 = self.g_lp_norm.powi(4);
        4.0 * PI * g2 / self.c_sq * (1.0 - PI * alpha * alpha * gp4 * (1.0 + 4.0 * PI * self.a_x0).exp() / g2)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIIIFamily {
    /// `(v_ε − v*_ε)/‖∇v_ε‖₂`.
    pub field: AdmissibleField,
    pub params: PartIIIFamilyParams,
    /// The three-zone field `v_ε` before projection.
    pub raw: Field,
    /// `|inner(Rε) − middle(Rε)|` with the constants as solved.
    pub interface_mismatch: f64,
    /// `‖∇v_ε‖₂² − 1` before renormalization.
    pub energy_defect: f64,
    /// `v*_ε`, the mean of `v_ε`.
    pub mean_shift: f64,
    /// `max|∇ξ|·Rε`.
    pub xi_gradient_times_reps: f64,
}

/// Builds the blow-up family around `green.x0`.
pub fn build_part_iii_family(
    mesh: &SurfaceMesh,
    green: &GreenDecomposition,
    alpha: f64,
    p: f64,
    eps: f64,
) -> Result<PartIIIFamily> {
    mesh.check_field(&green.g)?;
    let a_x0 = green
        .a_x0
        .ok_or_else(|| Error::UnsupportedGeometry("Part (iii) family needs a Robin constant".into()))?;
    if green.alpha != alpha || green.p != p {
        return Err(Error::param(
            "green",
            format!(
                "solved for (alpha, p) = ({}, {}), family asks ({alpha}, {p})",
                green.alpha, green.p
            ),
        ));
    }
    let fp = PartIIIFamilyParams::new(eps, a_x0, alpha, green.lp_norm, green.l2_norm)?;
    let limit = chart_radius_limit(mesh.geometry()).unwrap_or(0.0);
    if fp.xi_outer >= limit {
        return Err(Error::param("eps", format!("2Rε = {} leaves the chart", fp.xi_outer)));
    }
    let x0 = green.x0;
    check_resolution(mesh, x0, eps)?;
    let re = fp.xi_inner;
    let rho = radii(mesh, x0);
    let g = &green.g;
    let xi = Field::new(rho.iter().map(|&r| 1.0 - smoothstep((r - re) / re)).collect());
    let raw = Field::new(
        rho.iter()
            .enumerate()
            .map(|(i, &r)| {
                let v = if r <= re {
                    fp.inner(r)
                } else if r < 2.0 * re {
                    let tau = g[i] + r.ln() / (2.0 * PI) - a_x0;
                    g[i] - xi[i] * tau
                } else {
                    g[i]
                };
                v / fp.scale
            })
            .collect(),
    );
    let m = mean(mesh, &raw);
    let shifted = raw.map(|v| v - m);
    let e = grad_norm_sq(mesh, &shifted);
    let xi_slope = max_gradient(mesh, &xi) * re;
    if xi_slope > 2.0 {
        return Err(Error::InvalidInput(format!(
            "cutoff slope |∇ξ|·Rε = {xi_slope} exceeds 2"
        )));
    }
    Ok(PartIIIFamily {
        field: AdmissibleField::new(mesh, shifted.scaled(1.0 / e.sqrt()))?,
        interface_mismatch: (fp.inner(re) - fp.singular(re)).abs() / fp.scale,
        energy_defect: e - 1.0,
        mean_shift: m,
        xi_gradient_times_reps: xi_slope,
        params: fp,
        raw,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIIICheck {
    pub eps: f64,
    pub alpha: f64,
    pub p: f64,
    /// `J^α_{4π}` with the `L^p` norm in the exponent.
    pub j_value: f64,
    /// The same with the `L²` norm in the exponent.
    pub j_value_l2_variant: f64,
    pub bound: f64,
    /// `j_value − bound`.
    pub margin: f64,
    pub predicted_margin: f64,
    pub tol_quad: f64,
    /// `j_value ≥ bound − tol_quad`.
    pub pass: bool,
    /// `j_value > bound`.
    pub strict: bool,
    pub family: PartIIIFamilyParams,
    pub energy_defect: f64,
    pub interface_mismatch: f64,
    pub mean_shift: f64,
    /// `10·(Rε)²·|log ε|`.
    pub mean_shift_bound: f64,
}

/// Evaluates the Part-(iii) family against `Area + πe^{1+4πA_{x0}}`.
pub fn part_iii_check(
    mesh: &SurfaceMesh,
    green: &GreenDecomposition,
    alpha: f64,
    p: f64,
    eps: f64,
) -> Result<PartIIICheck> {
    Ok(check_with_family(mesh, green, alpha, p, eps)?.0)
}

fn check_with_family(
    mesh: &SurfaceMesh,
    green: &GreenDecomposition,
    alpha: f64,
    p: f64,
    eps: f64,
) -> Result<(PartIIICheck, PartIIIFamily)> {
    let fam = build_part_iii_family(mesh, green, alpha, p, eps)?;
    let u = fam.field.field();
    let params = FunctionalParams::new(alpha, 4.0 * PI, p)?;
    let rule = QuadratureRule::dunavant7();
    let j = evaluate_functional(mesh, u, &params, &rule)?.j;
    let j2 = evaluate_functional(mesh, u, &FunctionalParams { p: 2.0, ..params }, &rule)?.j;
    let tol_quad = quadrature_tolerance(mesh, u, &params)?;
    let bound = bound_from_robin(mesh.total_area(), fam.params.a_x0);
    let re = fam.params.xi_inner;
    let check = PartIIICheck {
        eps,
        alpha,
        p,
        j_value: j,
        j_value_l2_variant: j2,
        bound,
        margin: j - bound,
        predicted_margin: fam.params.predicted_margin(alpha),
        tol_quad,
        pass: j >= bound - tol_quad,
        strict: j > bound,
        family: fam.params,
        energy_defect: fam.energy_defect,
        interface_mismatch: fam.interface_mismatch,
        mean_shift: fam.mean_shift,
        mean_shift_bound: 10.0 * re * re * eps.ln().abs(),
    };
    Ok((check, fam))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartIIIOptions {
    pub graded: bool,
    pub h_min_factor: f64,
    pub green: GreenOptions,
}

impl Default for PartIIIOptions {
    fn default() -> Self {
        Self {
            graded: true,
            h_min_factor: H_MIN_FACTOR,
            green: GreenOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIIIRow {
    pub check: PartIIICheck,
    pub robin_fit_rms: f64,
    pub green_residual: f64,
    pub mesh_vertices: usize,
    pub h_min: f64,
    pub mesh_hash: String,
    /// `(r, v_ε)` along the chart ray `(r, 0)` from the center.
    pub section: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartIIIReport {
    pub alpha: f64,
    pub p: f64,
    pub rows: Vec<PartIIIRow>,
    /// Margins increase as `ε` decreases.
    pub margin_increasing: bool,
    pub all_pass: bool,
}

/// Runs [`part_iii_check`] along `eps_list`, centered at vertex `x0` of
/// `base`, on a resolution-matched mesh for each `ε`.
pub fn part_iii_report(
    base: &SurfaceMesh,
    x0: usize,
    alpha: f64,
    p: f64,
    eps_list: &[f64],
    opts: &PartIIIOptions,
) -> Result<PartIIIReport> {
    check_eps_list(eps_list)?;
    if x0 >= base.num_vertices() {
        return Err(Error::param("x0", format!("vertex {x0} out of range")));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (mesh, center, h_min) = resolved_mesh(base, x0, eps, opts.graded, opts.h_min_factor)?;
        let green = solve_green(&mesh, center, alpha, p, &opts.green)?;
        let (check, fam) = check_with_family(&mesh, &green, alpha, p, eps)?;
        rows.push(PartIIIRow {
            section: section_of(&mesh, &fam.raw, center, eps)?,
            check,
            robin_fit_rms: green.fit.as_ref().map_or(f64::NAN, |f| f.rms_residual),
            green_residual: green.equation_residual,
            mesh_vertices: mesh.num_vertices(),
            h_min,
            mesh_hash: mesh.content_hash(),
        });
    }
    Ok(PartIIIReport {
        alpha,
        p,
        margin_increasing: rows.windows(2).all(|w| w[1].check.margin > w[0].check.margin),
        all_pass: rows.iter().all(|r| r.check.pass),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_spec_parsing() {
        assert_eq!("0.5".parse::<AlphaSpec>().unwrap(), AlphaSpec::Value(0.5));
        assert_eq!("lambda_p".parse::<AlphaSpec>().unwrap(), AlphaSpec::LambdaTimes(1.0));
        assert_eq!(
            "1e-3*lambda_p".parse::<AlphaSpec>().unwrap(),
            AlphaSpec::LambdaTimes(1e-3)
        );
        assert!("lambda".parse::<AlphaSpec>().is_err());
        assert_eq!(AlphaSpec::LambdaTimes(2.0).resolve(3.0), 6.0);
    }

    #[test]
    fn part_i_params() {
        let p = PartIFamilyParams::new(1e-2, 0).unwrap();
        let l = -(1e-2f64).ln();
        assert!((p.t_eps - l.powf(-0.25)).abs() < 1e-15);
        assert_eq!(p.delta, DELTA_MAX);
        assert!(p.delta_nominal > p.delta);
        let c = p.constraints();
        assert!(c.delta_clipped);
        assert!((c.t2_log - l.sqrt()).abs() < 1e-12);
        assert!((p.core_value() - (l / (2.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(PartIFamilyParams::new(1.5, 0).is_err());
    }

    #[test]
    fn part_iii_constants_match_at_interface() {
        for eps in [3e-2, 1e-2, 3e-3, 1e-3, 1e-4] {
            let p = PartIIIFamilyParams::new(eps, -0.2, 0.0, 0.1, 0.06).unwrap();
            let re = p.xi_inner;
            assert!((p.inner(re) - p.singular(re)).abs() < 1e-12);
            // (1/4π)log((1+πR²)/(πR²)) ≤ 1/(4π²R²)
            assert!(p.c_sq_defect > 0.0);
            assert!(p.c_sq_defect <= 1.0 / (4.0 * PI * PI * p.r_big * p.r_big));
        }
    }

    #[test]
    fn predicted_margin_at_alpha_zero() {
        let p = PartIIIFamilyParams::new(1e-2, -0.2, 0.0, 0.1, 0.06).unwrap();
        assert!((p.predicted_margin(0.0) - 4.0 * PI * 0.06 * 0.06 / p.c_sq).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_slope_is_bounded() {
        let n = 10_000;
        let max = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                (smoothstep(x + 1.0 / n as f64) - smoothstep(x)) * n as f64
            })
            .fold(0.0, f64::max);
        assert!(max <= 1.5 + 1e-9);
    }
}
