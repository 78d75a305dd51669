//! Piecewise-linear finite-element operators.

use super::{cross3, dot3, norm3, sub3, SurfaceMesh};
use crate::sparse::SparseOperator;

/// Cotangent stiffness `K`, with `uᵀKu = ∫|∇u|²` for the P1 interpolant.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> SparseOperator {
    mesh.stiffness().clone()
}

/// Lumped mass `M` as a diagonal operator.
pub fn assemble_mass(mesh: &SurfaceMesh) -> SparseOperator {
    SparseOperator::diagonal(mesh.mass())
}

/// Consistent P1 mass `C_ij = ∫φ_iφ_j`.
pub fn assemble_consistent_mass(mesh: &SurfaceMesh) -> SparseOperator {
    let n = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.areas()[t];
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { a / 6.0 } else { a / 12.0 };
                trip.push((tri[i], tri[j], w));
            }
        }
    }
    SparseOperator::from_triplets(n, trip)
}

pub(super) fn stiffness_unchecked(mesh: &SurfaceMesh) -> SparseOperator {
    let n = mesh.num_vertices();
    let mut trip = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.corners(t);
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let e1 = sub3(c[i], c[k]);
            let e2 = sub3(c[j], c[k]);
            let cot = dot3(e1, e2) / norm3(cross3(e1, e2));
            let w = 0.5 * cot;
            let (vi, vj) = (tri[i], tri[j]);
            trip.push((vi, vj, -w));
            trip.push((vj, vi, -w));
            trip.push((vi, vi, w));
            trip.push((vj, vj, w));
        }
    }
    SparseOperator::from_triplets(n, trip)
}

pub(super) fn lumped_mass_unchecked(mesh: &SurfaceMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.areas()[t] / 3.0;
        for &v in tri {
            m[v] += third;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_flat_torus, build_sphere};
    use std::f64::consts::PI;

    #[test]
    fn constants_in_kernel() {
        for m in [build_flat_torus(7).unwrap(), build_sphere(2).unwrap()] {
            let k = assemble_stiffness(&m);
            let kc = k.mul_vec(&vec![3.5; m.num_vertices()]);
            assert!(kc.iter().all(|v| v.abs() < 1e-11));
            assert!(k.asymmetry() < 1e-14);
            for s in k.row_sums() {
                assert!(s.abs() < 1e-11);
            }
        }
    }

    #[test]
    fn torus_mass_trace() {
        let m = build_flat_torus(8).unwrap();
        assert!((assemble_mass(&m).trace() - 1.0).abs() < 1e-14);
        let ones = vec![1.0; m.num_vertices()];
        assert!((assemble_mass(&m).quad_form(&ones) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_mass_trace() {
        let m = build_sphere(3).unwrap();
        let tr = assemble_mass(&m).trace();
        assert!((tr - 4.0 * PI).abs() / (4.0 * PI) < 0.01);
        assert!((tr - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn cosine_energy() {
        let m = build_flat_torus(64).unwrap();
        let u = m.interpolate(|x| (2.0 * PI * x[0]).cos());
        let e = m.stiffness().quad_form(u.values());
        assert!((e - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 0.01, "{e}");
    }

    #[test]
    fn energy_refinement_is_second_order() {
        let f = |x: [f64; 3]| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + (2.0 * PI * x[1]).sin();
        let exact = 4.0 * PI * PI;
        let err = |n| {
            let m = build_flat_torus(n).unwrap();
            (m.stiffness().quad_form(m.interpolate(f).values()) - exact).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1} {e2}");
    }

    #[test]
    fn consistent_mass_total() {
        let m = build_sphere(1).unwrap();
        let c = assemble_consistent_mass(&m);
        assert!((c.sum() - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn n2_torus_stiffness_is_symmetric() {
        let m = build_flat_torus(2).unwrap();
        assert!(m.stiffness().asymmetry() < 1e-15);
        assert!(m.stiffness().row_sums().iter().all(|s| s.abs() < 1e-14));
    }
}
