//! Shared fixtures for the criterion benchmarks in `benches/`.

use tmsurf_core::calculus::random_admissible;
use tmsurf_core::{build_flat_torus, build_sphere, AdmissibleField, SurfaceMesh};

/// Torus sides and sphere levels used across the kernel benchmarks.
pub const TORUS_SIDES: [usize; 3] = [32, 64, 128];
pub const SPHERE_LEVELS: [usize; 2] = [3, 4];

pub fn torus(n: usize) -> SurfaceMesh {
    build_flat_torus(n).expect("torus mesh")
}

pub fn sphere(level: usize) -> SurfaceMesh {
    build_sphere(level).expect("sphere mesh")
}

/// Fixed-seed admissible field on `mesh`.
pub fn field(mesh: &SurfaceMesh) -> AdmissibleField {
    random_admissible(mesh, 7).expect("admissible field")
}
