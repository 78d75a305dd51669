//! Computed maximizer values against the blow-up upper bound
//! `Area + πe^{1+4πA_{x0}}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremal::MaximizerResult;
use crate::green::{bound_from_robin, oracle, GreenDecomposition};
use crate::surface::{Geometry, SurfaceMesh};

/// Closed-form Robin constant of a built-in surface with `α = 0`.
pub fn oracle_robin_constant(geometry: Geometry) -> Option<f64> {
    match geometry {
        Geometry::Torus => Some(oracle::torus_robin_constant()),
        Geometry::Sphere => Some(oracle::sphere_robin_constant()),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub eps: f64,
    pub j_value: f64,
    pub bound: f64,
    /// `bound − j_value`; negative beyond `tolerance` is a crossing.
    pub gap: f64,
    pub crossing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub area: f64,
    pub a_fit: f64,
    pub bound_fit: f64,
    pub a_oracle: Option<f64>,
    pub bound_oracle: Option<f64>,
    /// `|bound_fit − bound_oracle| / bound_oracle`.
    pub oracle_relative_difference: Option<f64>,
    pub tolerance: f64,
    pub rows: Vec<BoundRow>,
    pub violations: Vec<String>,
}

/// Tabulates every `J` of `results` against the bound from `green`'s fitted
/// Robin constant. With `α = 0` on a built-in surface the oracle bound is
/// reported next to it.
pub fn bound_compare(
    mesh: &SurfaceMesh,
    results: &[MaximizerResult],
    green: &GreenDecomposition,
    tolerance: f64,
) -> Result<BoundReport> {
    mesh.check_field(&green.g)?;
    if !(tolerance >= 0.0) {
        return Err(Error::param("tolerance", "must be non-negative"));
    }
    for r in results {
        mesh.check_field(r.u_eps.field())?;
    }
    let a_fit = green
        .a_x0
        .ok_or_else(|| Error::UnsupportedGeometry("bound needs a fitted Robin constant".into()))?;
    let area = mesh.total_area();
    let bound_fit = bound_from_robin(area, a_fit);
    let a_oracle = if green.alpha == 0.0 {
        oracle_robin_constant(mesh.geometry())
    } else {
        None
    };
    let bound_oracle = a_oracle.map(|a| bound_from_robin(area, a));
    let mut violations = Vec::new();
    let rows = results
        .iter()
        .map(|r| {
            let gap = bound_fit - r.j_value;
            let crossing = gap < -tolerance;
            if crossing {
                violations.push(format!(
                    "J = {} exceeds the bound {bound_fit} at eps = {}",
                    r.j_value, r.eps
                ));
            }
            BoundRow {
                eps: r.eps,
                j_value: r.j_value,
                bound: bound_fit,
                gap,
                crossing,
            }
        })
        .collect();
    Ok(BoundReport {
        area,
        a_fit,
        bound_fit,
        a_oracle,
        bound_oracle,
        oracle_relative_difference: bound_oracle.map(|b| (bound_fit - b).abs() / b),
        tolerance,
        rows,
        violations,
    })
}
