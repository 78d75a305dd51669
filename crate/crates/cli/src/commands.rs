//! One function per subcommand. Each returns the payload, the optional CSV
//! table and any property violation to report after writing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tmsurf_core::blowup::{
    blowup_report, bubble_mass_check, l6_identity_check, BlowupOptions, BlowupReport, EnergyLimitRow,
};
use tmsurf_core::compare::{bound_compare, oracle_robin_constant};
use tmsurf_core::eigen::{compute_lambda_p, EigenOptions};
use tmsurf_core::extremal::{continuation, MaximizeOptions, MaximizerResult};
use tmsurf_core::green::{radial_profile, solve_green, upper_bound, GreenDecomposition, GreenOptions};
use tmsurf_core::surface::chart::chart_radius_limit;
use tmsurf_core::surface::io;
use tmsurf_core::testfn::{part_i_divergence_report, part_iii_report, AlphaSpec, PartIIIOptions, PartIOptions};
use tmsurf_core::{build_flat_torus, build_sphere, FunctionalParams, Geometry, SurfaceMesh};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{num, read_envelope, OracleValue, Table};

pub struct Outcome {
    pub mesh_hash: Option<String>,
    pub oracles: Vec<OracleValue>,
    pub payload: Value,
    pub table: Option<Table>,
    pub violation: Option<String>,
}

impl Outcome {
    fn new(mesh: &SurfaceMesh, payload: impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            mesh_hash: Some(mesh.content_hash()),
            oracles: Vec::new(),
            payload: serde_json::to_value(payload)?,
            table: None,
            violation: None,
        })
    }
}

pub const SURFACE_KEYS: &[&str] = &["surface", "n", "mesh"];

/// `torus` (side `n`, default 32), `sphere` (level `n`, default 3) or
/// `file` (path `mesh`).
pub fn build_mesh(s: &Settings) -> Result<SurfaceMesh, CliError> {
    let kind = s.get("surface").unwrap_or("torus");
    Ok(match kind {
        "torus" => build_flat_torus(s.value("n", 32usize)?)?,
        "sphere" => build_sphere(s.value("n", 3usize)?)?,
        "file" => io::read(s.required("mesh")?)?,
        other => return Err(s.invalid("surface", format!("expected torus, sphere or file, got `{other}`"))),
    })
}

fn p_value(s: &Settings) -> Result<f64, CliError> {
    let p = s.value("p", 2.0)?;
    FunctionalParams::new(0.0, 1.0, p)?;
    Ok(p)
}

fn alpha_spec(s: &Settings, default: &str) -> Result<AlphaSpec, CliError> {
    let raw = s.get("alpha").unwrap_or(default);
    let spec: AlphaSpec = raw
        .parse()
        .map_err(|e: tmsurf_core::Error| CliError::Config(e.to_string()))?;
    let ok = match spec {
        AlphaSpec::Value(a) | AlphaSpec::LambdaTimes(a) => a >= 0.0 && a.is_finite(),
    };
    s.check("alpha", ok, format!("must be finite and ≥ 0, got `{raw}`"))?;
    Ok(spec)
}

fn eigen_options(s: &Settings) -> Result<EigenOptions, CliError> {
    let d = EigenOptions::default();
    Ok(EigenOptions {
        restarts: s.value("restarts", d.restarts)?,
        seed: s.value("seed", d.seed)?,
        max_iter: s.value("max-iter", d.max_iter)?,
        rel_tol: s.positive("tol", d.rel_tol)?,
        window: d.window,
    })
}

fn needs_lambda(spec: AlphaSpec) -> bool {
    !matches!(spec, AlphaSpec::Value(a) if a == 0.0)
}

/// `λ_p` from the `lambda-p` key, or computed on `mesh` with default
/// eigen options and the configured seed.
fn lambda_p(s: &Settings, mesh: &SurfaceMesh, p: f64) -> Result<f64, CliError> {
    if let Some(l) = s.optional::<f64>("lambda-p")? {
        s.check("lambda-p", l > 0.0, "must be positive")?;
        return Ok(l);
    }
    let opts = EigenOptions {
        seed: s.value("seed", 0u64)?,
        ..Default::default()
    };
    Ok(compute_lambda_p(mesh, p, &opts)?.lambda_p)
}

pub const LAMBDA_KEYS: &[&str] = &["p", "restarts", "seed", "max-iter", "tol"];

pub fn lambda(s: &Settings) -> Result<Outcome, CliError> {
    let mesh = build_mesh(s)?;
    let p = p_value(s)?;
    let r = compute_lambda_p(&mesh, p, &eigen_options(s)?)?;
    let mut out = Outcome::new(&mesh, &r)?;
    if p == 2.0 && s.get("surface").unwrap_or("torus") != "file" {
        out.oracles.push(match mesh.geometry() {
            Geometry::Torus => OracleValue::new("lambda_2", "Fourier mode exp(2πi x₁)", 4.0 * PI * PI, r.lambda_p),
            _ => OracleValue::new("lambda_2", "degree-1 spherical harmonics", 2.0, r.lambda_p),
        });
    }
    let mut t = Table::new(&["vertex", "x", "y", "z", "v0"]);
    for (i, q) in mesh.vertices().iter().enumerate() {
        t.push(vec![i.to_string(), num(q[0]), num(q[1]), num(q[2]), num(r.v0[i])]);
    }
    out.table = Some(t);
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaximizePayload {
    pub alpha: f64,
    pub p: f64,
    pub lambda_p: Option<f64>,
    pub path: Vec<MaximizerResult>,
}

pub const MAXIMIZE_KEYS: &[&str] = &["alpha", "p", "eps", "restarts", "seed", "max-iter", "tol", "lambda-p"];

pub fn maximize(s: &Settings) -> Result<Outcome, CliError> {
    let mesh = build_mesh(s)?;
    let p = p_value(s)?;
    let spec = alpha_spec(s, "0")?;
    let eps = s.list("eps", &[1.0])?;
    let lam = if needs_lambda(spec) {
        Some(lambda_p(s, &mesh, p)?)
    } else {
        None
    };
    let alpha = spec.resolve(lam.unwrap_or(0.0));
    let d = MaximizeOptions::default();
    let opts = MaximizeOptions {
        restarts: s.value("restarts", d.restarts)?,
        seed: s.value("seed", d.seed)?,
        grad_tol: s.positive("tol", d.grad_tol)?,
        max_iter: s.value("max-iter", d.max_iter)?,
        lambda_p: lam,
        ..d
    };
    let path = continuation(&mesh, alpha, p, &eps, &opts)?;
    let mut t = Table::new(&[
        "eps",
        "j_value",
        "c_eps",
        "x_eps",
        "el_residual",
        "alpha_eps",
        "beta_eps",
        "lambda_eps",
        "mu_eps",
        "mu_over_lambda",
        "iterations",
        "best_start",
    ]);
    for r in &path {
        let c = &r.coefficients;
        t.push(vec![
            num(r.eps),
            num(r.j_value),
            num(r.c_eps),
            r.x_eps.to_string(),
            num(r.el_residual),
            num(c.alpha_eps),
            num(c.beta_eps),
            num(c.lambda_eps),
            num(c.mu_eps),
            num(c.mu_eps / c.lambda_eps),
            r.iterations.to_string(),
            r.best_start.clone(),
        ]);
    }
    let mut out = Outcome::new(
        &mesh,
        MaximizePayload {
            alpha,
            p,
            lambda_p: lam,
            path,
        },
    )?;
    out.table = Some(t);
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenPayload {
    pub green: GreenDecomposition,
    /// `Area + πe^{1+4πA_{x0}}` with the fitted Robin constant.
    pub bound: Option<f64>,
}

pub const GREEN_KEYS: &[&str] = &["x0", "alpha", "p", "tol", "max-iter", "damping"];

/// Vertex index, or `x,y,z` resolved to the nearest vertex.
fn vertex_of(s: &Settings, mesh: &SurfaceMesh) -> Result<usize, CliError> {
    let raw = s.get("x0").unwrap_or("0");
    if raw.contains(',') {
        let c = s.list("x0", &[])?;
        s.check("x0", c.len() == 3, "coordinates need three components")?;
        let d2 = |q: &[f64; 3]| (0..3).map(|k| (q[k] - c[k]).powi(2)).sum::<f64>();
        return Ok(mesh
            .vertices()
            .iter()
            .enumerate()
            .min_by(|a, b| d2(a.1).total_cmp(&d2(b.1)))
            .map(|(i, _)| i)
            .unwrap_or(0));
    }
    let v: usize = s.value("x0", 0)?;
    s.check("x0", v < mesh.num_vertices(), format!("vertex {v} out of range"))?;
    Ok(v)
}

fn green_options(s: &Settings) -> Result<GreenOptions, CliError> {
    let d = GreenOptions::default();
    let damping = s.positive("damping", d.damping)?;
    s.check("damping", damping <= 1.0, "must lie in (0, 1]")?;
    Ok(GreenOptions {
        damping,
        tol: s.positive("tol", d.tol)?,
        max_iter: s.value("max-iter", d.max_iter)?,
        ..d
    })
}

fn section_radius(mesh: &SurfaceMesh) -> Option<f64> {
    chart_radius_limit(mesh.geometry()).map(|l| (0.9 * l).min(0.45))
}

pub fn green(s: &Settings) -> Result<Outcome, CliError> {
    let mesh = build_mesh(s)?;
    let p = p_value(s)?;
    let alpha: f64 = s.value("alpha", 0.0)?;
    FunctionalParams::new(alpha, 1.0, p)?;
    let x0 = vertex_of(s, &mesh)?;
    let g = solve_green(&mesh, x0, alpha, p, &green_options(s)?)?;
    let bound = g.a_x0.map(|_| upper_bound(&mesh, &g)).transpose()?;
    let mut table = None;
    if let Some(r_max) = section_radius(&mesh) {
        let mut t = Table::new(&["r", "G", "sigma"]);
        for (r, gv, sig) in radial_profile(&mesh, &g, r_max)? {
            t.push(vec![num(r), num(gv), num(sig)]);
        }
        table = Some(t);
    }
    let mut oracles = Vec::new();
    if let (Some(a), Some(fit), true) = (oracle_robin_constant(mesh.geometry()), g.a_x0, alpha == 0.0) {
        oracles.push(OracleValue::new("robin_constant", "closed-form Green function", a, fit));
    }
    let mut out = Outcome::new(&mesh, GreenPayload { green: g, bound })?;
    out.table = table;
    out.oracles = oracles;
    Ok(out)
}

pub const PART_I_KEYS: &[&str] = &["alpha", "p", "eps", "graded", "h-min-factor", "restarts", "seed"];

pub fn part_i(s: &Settings) -> Result<Outcome, CliError> {
    let mesh = build_mesh(s)?;
    let p = p_value(s)?;
    let spec = alpha_spec(s, "lambda_p")?;
    let eps = s.list("eps", &[1e-1, 3e-2, 1e-2])?;
    let d = PartIOptions::default();
    let opts = PartIOptions {
        eigen: EigenOptions {
            restarts: s.value("restarts", d.eigen.restarts)?,
            seed: s.value("seed", d.eigen.seed)?,
            ..d.eigen
        },
        graded: s.value("graded", d.graded)?,
        h_min_factor: s.positive("h-min-factor", d.h_min_factor)?,
        ..d
    };
    let report = part_i_divergence_report(&mesh, spec, p, &eps, &opts)?;
    let table = sections(report.rows.iter().map(|r| (r.eps, &r.section)));
    let violation = (!report.violations.is_empty()).then(|| report.violations.join("; "));
    let mut out = Outcome::new(&mesh, &report)?;
    out.table = Some(table);
    out.violation = violation;
    Ok(out)
}

fn sections<'a>(rows: impl Iterator<Item = (f64, &'a Vec<(f64, f64)>)>) -> Table {
    let mut t = Table::new(&["eps", "r", "value"]);
    for (eps, sec) in rows {
        for &(r, v) in sec {
            t.push(vec![num(eps), num(r), num(v)]);
        }
    }
    t
}

pub const PART_III_KEYS: &[&str] = &["alpha", "p", "eps", "x0", "graded", "h-min-factor", "lambda-p", "seed"];

pub fn part_iii(s: &Settings) -> Result<Outcome, CliError> {
    let mesh = build_mesh(s)?;
    let p = p_value(s)?;
    let spec = alpha_spec(s, "1e-3*lambda_p")?;
    let eps = s.list("eps", &[3e-2, 1e-2])?;
    let x0 = vertex_of(s, &mesh)?;
    let lam = if needs_lambda(spec) {
        Some(lambda_p(s, &mesh, p)?)
    } else {
        None
    };
    let alpha = spec.resolve(lam.unwrap_or(0.0));
    if let Some(l) = lam {
        s.check("alpha", alpha < l, format!("Part (iii) needs alpha < lambda_p = {l}"))?;
    }
    let d = PartIIIOptions::default();
    let opts = PartIIIOptions {
        graded: s.value("graded", d.graded)?,
        h_min_factor: s.positive("h-min-factor", d.h_min_factor)?,
        ..d
    };
    let report = part_iii_report(&mesh, x0, alpha, p, &eps, &opts)?;
    let table = sections(report.rows.iter().map(|r| (r.check.eps, &r.section)));
    let mut out = Outcome::new(&mesh, PartIIIPayload { lambda_p: lam, report })?;
    out.table = Some(table);
    Ok(out)
}

#[derive(Serialize)]
struct PartIIIPayload {
    lambda_p: Option<f64>,
    report: tmsurf_core::testfn::PartIIIReport,
}

/// Rebuilds the mesh a stored result was computed on and checks its hash.
fn mesh_of(
    config: &std::collections::BTreeMap<String, String>,
    hash: &Option<String>,
) -> Result<SurfaceMesh, CliError> {
    let mesh = build_mesh(&Settings::from_echo(config))?;
    if hash.as_deref() != Some(mesh.content_hash().as_str()) {
        return Err(CliError::Config(
            "mesh mismatch: the rebuilt surface differs from the stored hash".into(),
        ));
    }
    Ok(mesh)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowupPayload {
    pub bubble_mass: f64,
    pub reports: Vec<BlowupReport>,
    pub energy_limit: Vec<EnergyLimitRow>,
    /// `c_ε` increases along the path.
    pub c_eps_increasing: bool,
    /// `r_ε² c_ε⁴` decreases along the path.
    pub r_eps_sq_c4_decreasing: bool,
}

pub const BLOWUP_KEYS: &[&str] = &["input", "window", "rays", "radial"];

pub fn blowup(s: &Settings) -> Result<Outcome, CliError> {
    let input = read_envelope::<MaximizePayload>(s.required("input")?, "maximize")?;
    let mesh = mesh_of(&input.config, &input.mesh_hash)?;
    let d = BlowupOptions::default();
    let opts = BlowupOptions {
        window: s.positive("window", d.window)?,
        rays: s.value("rays", d.rays)?,
        radial_samples: s.value("radial", d.radial_samples)?,
        ..d
    };
    let path = &input.payload.path;
    let reports = path
        .iter()
        .map(|r| blowup_report(&mesh, r, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(&["eps", "x1", "x2", "radius", "u", "psi", "phi", "bubble", "deviation"]);
    for b in &reports {
        for p in &b.profile.samples {
            t.push(vec![
                num(b.eps),
                num(p.x[0]),
                num(p.x[1]),
                num(p.radius),
                num(p.u),
                num(p.psi),
                num(p.phi),
                num(p.bubble),
                num(p.phi_deviation),
            ]);
        }
    }
    let payload = BlowupPayload {
        bubble_mass: bubble_mass_check(),
        energy_limit: l6_identity_check(&mesh, path),
        c_eps_increasing: reports.windows(2).all(|w| w[1].c_eps > w[0].c_eps),
        r_eps_sq_c4_decreasing: reports.windows(2).all(|w| w[1].r_eps_sq_c4 < w[0].r_eps_sq_c4),
        reports,
    };
    let mut out = Outcome::new(&mesh, &payload)?;
    out.oracles.push(OracleValue::new(
        "bubble_mass",
        "∫(1+π|x|²)⁻² dx = 1",
        1.0,
        payload.bubble_mass,
    ));
    out.table = Some(t);
    Ok(out)
}

pub const BOUND_KEYS: &[&str] = &["input", "green", "tol"];

pub fn bound(s: &Settings) -> Result<Outcome, CliError> {
    let input = read_envelope::<MaximizePayload>(s.required("input")?, "maximize")?;
    let green = read_envelope::<GreenPayload>(s.required("green")?, "green")?;
    if input.mesh_hash != green.mesh_hash {
        return Err(CliError::Config(
            "mesh mismatch between the maximizer and Green results".into(),
        ));
    }
    let mesh = mesh_of(&input.config, &input.mesh_hash)?;
    let tol: f64 = s.value("tol", 1e-9)?;
    s.check("tol", tol >= 0.0, "must be non-negative")?;
    let report = bound_compare(&mesh, &input.payload.path, &green.payload.green, tol)?;
    let mut t = Table::new(&["eps", "j_value", "bound", "gap", "crossing"]);
    for r in &report.rows {
        t.push(vec![
            num(r.eps),
            num(r.j_value),
            num(r.bound),
            num(r.gap),
            r.crossing.to_string(),
        ]);
    }
    let mut out = Outcome::new(&mesh, &report)?;
    if let (Some(a), Some(b)) = (report.a_oracle, report.bound_oracle) {
        out.oracles.push(OracleValue::new(
            "robin_constant",
            "closed-form Green function",
            a,
            report.a_fit,
        ));
        out.oracles.push(OracleValue::new(
            "upper_bound",
            "bound with the closed-form Robin constant",
            b,
            report.bound_fit,
        ));
    }
    out.violation = (!report.violations.is_empty()).then(|| report.violations.join("; "));
    out.table = Some(t);
    Ok(out)
}
