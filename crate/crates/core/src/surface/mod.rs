//! Closed triangulated surfaces.
//!
//! Two model surfaces come with analytic isothermal charts: the flat unit
//! torus (periodic unit square, identity chart) and the round unit sphere
//! (geodesic icosphere, stereographic chart). Meshes read from files with
//! `geometry embedded` carry no chart.
//!
//! Sign convention: the Laplace–Beltrami operator is `Δ = −div grad`, so its
//! spectrum is nonnegative and the stiffness operator `K` satisfies
//! `uᵀKu = ∫|∇u|² dv`.
//!
//! Every mesh is validated and assembled at construction time. The stiffness
//! operator uses cotangent weights; the mass operator is lumped (one third of
//! each incident triangle area per vertex).

pub mod assemble;
pub mod chart;
pub mod io;
pub mod quadrature;

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::linsolve::LaplaceSolver;
use crate::sparse::SparseOperator;

pub use assemble::{assemble_consistent_mass, assemble_mass, assemble_stiffness};
pub use chart::Locator;
pub use quadrature::{nonlinear_quadrature, QuadratureRule};

/// Relative area threshold below which a triangle is rejected.
pub const DEGENERATE_AREA_FACTOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    /// Unit square with opposite sides identified, flat metric.
    Torus,
    /// Triangulation of the unit sphere in R³.
    Sphere,
    /// Arbitrary closed surface embedded in R³, no chart.
    Embedded,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Torus => "torus",
            Geometry::Sphere => "sphere",
            Geometry::Embedded => "embedded",
        }
    }

    pub fn has_chart(self) -> bool {
        !matches!(self, Geometry::Embedded)
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Geometry::Torus),
            "sphere" => Ok(Geometry::Sphere),
            "embedded" => Ok(Geometry::Embedded),
            other => Err(Error::InvalidInput(format!("unknown geometry `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [usize; 2],
}

/// Triangulated closed surface with metric data and assembled operators.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    geometry: Geometry,
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    /// Corner positions per triangle; on the torus these are unwrapped so that
    /// each triangle is a genuine planar triangle.
    corners: Vec<[[f64; 3]; 3]>,
    edges: Vec<Edge>,
    areas: Vec<f64>,
    total_area: f64,
    neighbors: Vec<Vec<usize>>,
    stiffness: SparseOperator,
    mass: Vec<f64>,
    solver: OnceLock<LaplaceSolver>,
}

impl SurfaceMesh {
    /// Validates and assembles a mesh from raw data. Torus vertices are
    /// points of `[0,1)²` (the third coordinate is ignored).
    pub fn from_parts(geometry: Geometry, vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let corners = match geometry {
            Geometry::Torus => torus_corners(&vertices, &triangles)?,
            _ => triangles
                .iter()
                .map(|t| {
                    let [a, b, c] = checked_triangle(t, vertices.len())?;
                    Ok([vertices[a], vertices[b], vertices[c]])
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Self::with_corners(geometry, vertices, triangles, corners)
    }

    fn with_corners(
        geometry: Geometry,
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[usize; 3]>,
        corners: Vec<[[f64; 3]; 3]>,
    ) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::Topology("mesh has no vertices or triangles".into()));
        }
        for t in &triangles {
            checked_triangle(t, vertices.len())?;
        }
        let areas: Vec<f64> = corners.iter().map(triangle_area).collect();
        let total_area: f64 = areas.iter().sum();
        let threshold = DEGENERATE_AREA_FACTOR * total_area / triangles.len() as f64;
        for (i, &a) in areas.iter().enumerate() {
            if !(a >= threshold) {
                return Err(Error::MeshQuality {
                    triangle: i,
                    area: a,
                    threshold,
                });
            }
        }
        if geometry == Geometry::Torus {
            // Unwrapped corners must be positively oriented in the plane.
            for (i, c) in corners.iter().enumerate() {
                if signed_area_2d(c) <= 0.0 {
                    return Err(Error::Topology(format!("torus triangle {i} is not counter-clockwise")));
                }
            }
        }
        let edges = build_edges(geometry, &vertices, &triangles, &corners)?;
        let mut neighbors = vec![Vec::new(); vertices.len()];
        for e in &edges {
            let [a, b] = e.vertices;
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for (v, n) in neighbors.iter_mut().enumerate() {
            n.sort_unstable();
            n.dedup();
            if n.is_empty() {
                return Err(Error::Topology(format!("vertex {v} is not used by any triangle")));
            }
        }
        let mut mesh = Self {
            geometry,
            vertices,
            triangles,
            corners,
            edges,
            areas,
            total_area,
            neighbors,
            stiffness: SparseOperator::diagonal(&[]),
            mass: Vec::new(),
            solver: OnceLock::new(),
        };
        mesh.stiffness = assemble::stiffness_unchecked(&mesh);
        mesh.mass = assemble::lumped_mass_unchecked(&mesh);
        Ok(mesh)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Planar corner coordinates of triangle `t`.
    pub fn corners(&self, t: usize) -> &[[f64; 3]; 3] {
        &self.corners[t]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// Cotangent stiffness operator `K` (cached).
    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    /// Diagonal of the lumped mass operator (cached).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Solves `K x = b − (Σb/Area)·m` with `Σ mᵢxᵢ = 0`: the Riesz
    /// representer of `b` on mean-zero fields. The solver (usually a
    /// factorization) is built on first use.
    pub fn solve_laplace(&self, b: &[f64]) -> Result<Vec<f64>> {
        let solver = match self.solver.get() {
            Some(s) => s,
            None => {
                let s = LaplaceSolver::new(&self.stiffness)?;
                self.solver.get_or_init(|| s)
            }
        };
        solver.solve(&self.stiffness, &self.mass, b)
    }

    /// Mean length of the edges incident to `v`.
    pub fn local_spacing(&self, v: usize) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(k) = tri.iter().position(|&x| x == v) {
                let c = &self.corners[t];
                for other in [(k + 1) % 3, (k + 2) % 3] {
                    sum += norm3(sub3(c[other], c[k]));
                    count += 1;
                }
            }
        }
        sum / count.max(1) as f64
    }

    pub fn max_edge_length(&self) -> f64 {
        self.corners
            .iter()
            .flat_map(|c| (0..3).map(move |k| norm3(sub3(c[(k + 1) % 3], c[k]))))
            .fold(0.0, f64::max)
    }

    /// Field from a function of the vertex position.
    pub fn interpolate(&self, f: impl Fn([f64; 3]) -> f64) -> Field {
        Field::new(self.vertices.iter().map(|&p| f(p)).collect())
    }

    pub fn check_field(&self, u: &Field) -> Result<()> {
        if u.len() != self.num_vertices() {
            return Err(Error::FieldLength {
                expected: self.num_vertices(),
                actual: u.len(),
            });
        }
        Ok(())
    }

    /// SHA-256 of the canonical text serialization.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = io::to_string(self);
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn checked_triangle(t: &[usize; 3], nv: usize) -> Result<[usize; 3]> {
    if t.iter().any(|&i| i >= nv) {
        return Err(Error::Topology(format!("triangle {t:?} references a missing vertex")));
    }
    if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
        return Err(Error::Topology(format!("triangle {t:?} repeats a vertex")));
    }
    Ok(*t)
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn triangle_area(c: &[[f64; 3]; 3]) -> f64 {
    0.5 * norm3(cross3(sub3(c[1], c[0]), sub3(c[2], c[0])))
}

fn signed_area_2d(c: &[[f64; 3]; 3]) -> f64 {
    0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
}

/// Unwraps torus triangles given only wrapped vertex positions. Each corner is
/// placed relative to the first one by a lattice shift; among the shifts that
/// give a counter-clockwise triangle the most compact one wins.
fn torus_corners(vertices: &[[f64; 3]], triangles: &[[usize; 3]]) -> Result<Vec<[[f64; 3]; 3]>> {
    let mut out = Vec::with_capacity(triangles.len());
    for t in triangles {
        let [a, b, c] = checked_triangle(t, vertices.len())?;
        let pa = vertices[a];
        let candidates = |p: [f64; 3]| -> Vec<[f64; 3]> {
            let mut v = Vec::new();
            for sx in [-1.0, 0.0, 1.0] {
                for sy in [-1.0, 0.0, 1.0] {
                    let q = [p[0] + sx, p[1] + sy, 0.0];
                    let d = [q[0] - pa[0], q[1] - pa[1]];
                    if d[0].abs() <= 0.5 + 1e-9 && d[1].abs() <= 0.5 + 1e-9 {
                        v.push(q);
                    }
                }
            }
            v
        };
        let base = [pa[0], pa[1], 0.0];
        let mut best: Option<([[f64; 3]; 3], f64)> = None;
        for qb in candidates(vertices[b]) {
            for qc in candidates(vertices[c]) {
                let tri = [base, qb, qc];
                if signed_area_2d(&tri) <= 0.0 {
                    continue;
                }
                let perim: f64 = (0..3)
                    .map(|k| {
                        let d = sub3(tri[(k + 1) % 3], tri[k]);
                        dot3(d, d)
                    })
                    .sum();
                if best.as_ref().is_none_or(|(_, p)| perim < *p - 1e-12) {
                    best = Some((tri, perim));
                }
            }
        }
        match best {
            Some((tri, _)) => out.push(tri),
            None => {
                return Err(Error::Topology(format!(
                    "torus triangle {t:?} cannot be unwrapped into a positively oriented triangle"
                )))
            }
        }
    }
    Ok(out)
}

/// Integer lattice shift between two unwrapped torus corners.
fn lattice_shift(geometry: Geometry, va: [f64; 3], vb: [f64; 3], ca: [f64; 3], cb: [f64; 3]) -> [i64; 2] {
    if geometry != Geometry::Torus {
        return [0, 0];
    }
    [
        ((cb[0] - ca[0]) - (vb[0] - va[0])).round() as i64,
        ((cb[1] - ca[1]) - (vb[1] - va[1])).round() as i64,
    ]
}

fn build_edges(
    geometry: Geometry,
    vertices: &[[f64; 3]],
    triangles: &[[usize; 3]],
    corners: &[[[f64; 3]; 3]],
) -> Result<Vec<Edge>> {
    // key: (lo, hi, shift of hi relative to lo) -> (edge index, directed uses)
    let mut map: HashMap<(usize, usize, [i64; 2]), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut uses: Vec<(Vec<usize>, i32)> = Vec::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (i, j) = (tri[k], tri[(k + 1) % 3]);
            let (ci, cj) = (corners[t][k], corners[t][(k + 1) % 3]);
            let (lo, hi, shift, dir) = if i < j {
                (i, j, lattice_shift(geometry, vertices[i], vertices[j], ci, cj), 1)
            } else {
                (j, i, lattice_shift(geometry, vertices[j], vertices[i], cj, ci), -1)
            };
            let idx = *map.entry((lo, hi, shift)).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [lo, hi],
                    triangles: [usize::MAX; 2],
                });
                uses.push((Vec::new(), 0));
                edges.len() - 1
            });
            uses[idx].0.push(t);
            uses[idx].1 += dir;
        }
    }
    for (e, (tris, orient)) in edges.iter_mut().zip(uses) {
        if tris.len() != 2 {
            return Err(Error::Topology(format!(
                "edge {:?} is shared by {} triangles (closed surfaces need exactly 2)",
                e.vertices,
                tris.len()
            )));
        }
        if orient != 0 {
            return Err(Error::Topology(format!(
                "triangles {:?} sharing edge {:?} are inconsistently oriented",
                tris, e.vertices
            )));
        }
        e.triangles = [tris[0], tris[1]];
    }
    Ok(edges)
}

/// Flat unit torus from an `n × n` grid, each cell split along one diagonal.
pub fn build_flat_torus(n: usize) -> Result<SurfaceMesh> {
    if n < 2 {
        return Err(Error::param("n", format!("torus needs n ≥ 2 subdivisions, got {n}")));
    }
    let offsets: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    tensor_torus(&offsets, [0.0, 0.0])
}

/// Torus mesh refined geometrically toward `center`.
#[derive(Clone, Debug)]
pub struct GradedTorus {
    pub mesh: SurfaceMesh,
    /// Vertex sitting exactly at the refinement center.
    pub center_vertex: usize,
    pub h_min: f64,
    pub h_base: f64,
}

/// Number of fine cells on each side of the refinement center.
const GRADED_CORE_CELLS: usize = 16;
const GRADED_GROWTH: f64 = 1.2;

/// Tensor-product torus mesh whose spacing is `h_min` within
/// `16·h_min` of `center` (per axis) and grows by a factor 1.2 per cell up to
/// the base spacing `1/base_n`. When `h_min ≥ 1/base_n` the mesh is the
/// uniform `base_n` grid translated so that a vertex sits at `center`.
pub fn build_graded_torus(base_n: usize, center: [f64; 2], h_min: f64) -> Result<GradedTorus> {
    if base_n < 2 {
        return Err(Error::param("base_n", format!("need ≥ 2, got {base_n}")));
    }
    if !(h_min > 0.0) {
        return Err(Error::param("h_min", "must be positive"));
    }
    let h_base = 1.0 / base_n as f64;
    let offsets: Vec<f64> = if h_min >= h_base {
        (0..base_n).map(|i| i as f64 * h_base).collect()
    } else {
        let mut half = vec![0.0];
        let mut s = 0.0;
        let mut h = h_min;
        let mut core = 0;
        loop {
            if core < GRADED_CORE_CELLS {
                core += 1;
            } else {
                h = (h * GRADED_GROWTH).min(h_base);
            }
            if s + h >= 0.5 - 0.5 * h {
                break;
            }
            s += h;
            half.push(s);
        }
        // Spread the remainder uniformly so that the last node lands on 1/2.
        let rem = 0.5 - s;
        let pieces = (rem / h).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            half.push(s + rem * k as f64 / pieces as f64);
        }
        let mut full: Vec<f64> = half.clone();
        // Negative side, excluding 0 and −1/2 (≡ 1/2), stored as offsets in (1/2, 1).
        for &o in half[1..half.len() - 1].iter().rev() {
            full.push(1.0 - o);
        }
        full
    };
    let mesh = tensor_torus(&offsets, center)?;
    Ok(GradedTorus {
        mesh,
        center_vertex: 0,
        h_min: h_min.min(h_base),
        h_base,
    })
}

/// Torus grid with node offsets `offsets` (increasing, in `[0,1)`, starting
/// at 0) along both axes, translated by `center`. Vertex `j·N + i` sits at
/// `center + (offsets[i], offsets[j])`.
fn tensor_torus(offsets: &[f64], center: [f64; 2]) -> Result<SurfaceMesh> {
    let n = offsets.len();
    let wrap = |x: f64| {
        let w = x - x.floor();
        if w >= 1.0 {
            0.0
        } else {
            w
        }
    };
    let idx = |i: usize, j: usize| (j % n) * n + (i % n);
    let coord = |i: usize| if i == n { 1.0 } else { offsets[i] };
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push([wrap(center[0] + offsets[i]), wrap(center[1] + offsets[j]), 0.0]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    let mut corners = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let p = |a: usize, b: usize| {
                let x = center[0] + coord(a);
                let y = center[1] + coord(b);
                // keep corner 0 in the fundamental cell
                let sx = (center[0] + offsets[i]) - wrap(center[0] + offsets[i]);
                let sy = (center[1] + offsets[j]) - wrap(center[1] + offsets[j]);
                [x - sx, y - sy, 0.0]
            };
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([v00, v10, v11]);
            corners.push([p(i, j), p(i + 1, j), p(i + 1, j + 1)]);
            triangles.push([v00, v11, v01]);
            corners.push([p(i, j), p(i + 1, j + 1), p(i, j + 1)]);
        }
    }
    SurfaceMesh::with_corners(Geometry::Torus, vertices, triangles, corners)
}

/// Geodesic icosphere: the icosahedron refined `level` times by edge
/// midpoint subdivision, new vertices projected to the unit sphere.
pub fn build_sphere(level: usize) -> Result<SurfaceMesh> {
    if level > 9 {
        return Err(Error::param("level", format!("refinement level {level} is too large")));
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|&v| normalize3(v))
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * triangles.len());
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize3([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        triangles = next;
    }
    SurfaceMesh::from_parts(Geometry::Sphere, vertices, triangles)
}

pub(crate) fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_n2_counts() {
        let m = build_flat_torus(2).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.total_area(), 1.0);
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn torus_rejects_small_n() {
        assert!(matches!(build_flat_torus(1), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn torus_euler_characteristic_is_zero() {
        for n in [2, 3, 5, 16, 33] {
            let m = build_flat_torus(n).unwrap();
            assert_eq!(m.euler_characteristic(), 0, "n = {n}");
            assert_eq!(m.num_triangles(), 2 * n * n);
        }
    }

    #[test]
    fn torus_area_exact() {
        let m = build_flat_torus(16).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        let s: f64 = m.areas().iter().sum();
        assert_eq!(s, m.total_area());
    }

    #[test]
    fn icosahedron() {
        let m = build_sphere(0).unwrap();
        assert_eq!(m.num_vertices(), 12);
        assert_eq!(m.num_triangles(), 20);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn sphere_levels_are_closed() {
        for level in 0..4 {
            let m = build_sphere(level).unwrap();
            assert_eq!(m.euler_characteristic(), 2);
            for e in m.edges() {
                assert_ne!(e.triangles[0], e.triangles[1]);
            }
            assert_eq!(2 * m.edges().len(), 3 * m.num_triangles());
        }
    }

    #[test]
    fn sphere_area_converges_to_four_pi() {
        // Flat-facet area deficit shrinks by ~4x per level.
        let target = 4.0 * std::f64::consts::PI;
        let mut prev_err = f64::INFINITY;
        for level in 0..=6 {
            let err = (target - build_sphere(level).unwrap().total_area()) / target;
            assert!(err > 0.0 && err < prev_err, "level {level}: {err}");
            if level >= 2 {
                assert!(prev_err / err > 3.5 && prev_err / err < 4.5);
            }
            prev_err = err;
        }
        let l4 = build_sphere(4).unwrap().total_area();
        assert!((l4 - target).abs() / target < 5e-3);
    }

    #[test]
    fn graded_torus_is_valid_and_refined() {
        let g = build_graded_torus(32, [0.3, 0.7], 1e-3).unwrap();
        let m = &g.mesh;
        assert_eq!(m.euler_characteristic(), 0);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        assert_eq!(m.vertices()[g.center_vertex], [0.3, 0.7, 0.0]);
        assert!((m.local_spacing(g.center_vertex) - 1.1e-3).abs() < 2e-4);
        assert!(m.max_edge_length() < 1.5 * std::f64::consts::SQRT_2 / 32.0);
    }

    #[test]
    fn graded_falls_back_to_uniform() {
        let g = build_graded_torus(8, [0.5, 0.5], 0.5).unwrap();
        assert_eq!(g.mesh.num_vertices(), 64);
        assert_eq!(g.h_min, 0.125);
    }

    #[test]
    fn rejects_open_surface() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let err = SurfaceMesh::from_parts(Geometry::Embedded, v, vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn rejects_degenerate_triangle() {
        let m = build_sphere(1).unwrap();
        let mut v = m.vertices().to_vec();
        let t = m.triangles()[0];
        v[t[2]] = v[t[0]];
        let err = SurfaceMesh::from_parts(Geometry::Embedded, v, m.triangles().to_vec()).unwrap_err();
        assert!(matches!(err, Error::MeshQuality { .. }), "{err:?}");
    }
}
