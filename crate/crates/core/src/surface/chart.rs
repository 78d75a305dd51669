//! Analytic isothermal charts, surface distances and point location.
//!
//! * Torus: the identity chart with minimal-image differences; the metric is
//!   flat, so the conformal exponent `f` vanishes.
//! * Sphere: stereographic projection from the antipode of the chart center,
//!   scaled so that `|y| = 2·tan(θ/2)` where `θ` is the angle from the
//!   center. Then `g = e^{2f}|dy|²` with `e^f = 1/(1+|y|²/4)` and `f(0) = 0`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{cross3, dot3, norm3, normalize3, Geometry, SurfaceMesh};
use crate::error::{Error, Result};
use crate::field::Field;

/// Radius up to which chart coordinates are used for diagnostics.
pub fn chart_radius_limit(geometry: Geometry) -> Option<f64> {
    match geometry {
        Geometry::Torus => Some(0.5),
        // hemisphere around the center
        Geometry::Sphere => Some(2.0),
        Geometry::Embedded => None,
    }
}

fn require_chart(geometry: Geometry) -> Result<()> {
    if geometry.has_chart() {
        Ok(())
    } else {
        Err(Error::UnsupportedGeometry(
            "user meshes carry no isothermal chart".into(),
        ))
    }
}

/// Orthonormal tangent basis at a unit vector `c`.
pub fn tangent_basis(c: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let axis = if c[0].abs() <= c[1].abs() && c[0].abs() <= c[2].abs() {
        [1.0, 0.0, 0.0]
    } else if c[1].abs() <= c[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = normalize3(cross3(axis, c));
    let e2 = cross3(c, e1);
    (e1, e2)
}

/// Minimal-image difference `b − a` on the unit torus.
pub fn torus_delta(a: [f64; 3], b: [f64; 3]) -> [f64; 2] {
    let d = |x: f64| x - x.round();
    [d(b[0] - a[0]), d(b[1] - a[1])]
}

/// Chart coordinates of `p` in the chart centered at `center`.
pub fn chart_coordinates(geometry: Geometry, center: [f64; 3], p: [f64; 3]) -> Result<[f64; 2]> {
    require_chart(geometry)?;
    match geometry {
        Geometry::Torus => Ok(torus_delta(center, p)),
        _ => {
            let c = normalize3(center);
            let q = normalize3(p);
            let cos = dot3(q, c);
            if cos <= -1.0 + 1e-12 {
                return Err(Error::InvalidInput("point is the antipode of the chart center".into()));
            }
            let (e1, e2) = tangent_basis(c);
            let s = 2.0 / (1.0 + cos);
            Ok([s * dot3(q, e1), s * dot3(q, e2)])
        }
    }
}

/// Inverse of [`chart_coordinates`].
pub fn chart_point(geometry: Geometry, center: [f64; 3], y: [f64; 2]) -> Result<[f64; 3]> {
    require_chart(geometry)?;
    match geometry {
        Geometry::Torus => {
            let w = |x: f64| {
                let r = x - x.floor();
                if r >= 1.0 {
                    0.0
                } else {
                    r
                }
            };
            Ok([w(center[0] + y[0]), w(center[1] + y[1]), 0.0])
        }
        _ => {
            let c = normalize3(center);
            let (e1, e2) = tangent_basis(c);
            let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
            if rho == 0.0 {
                return Ok(c);
            }
            let theta = 2.0 * (rho / 2.0).atan();
            let (st, ct) = theta.sin_cos();
            let (dx, dy) = (y[0] / rho, y[1] / rho);
            Ok([
                ct * c[0] + st * (dx * e1[0] + dy * e2[0]),
                ct * c[1] + st * (dx * e1[1] + dy * e2[1]),
                ct * c[2] + st * (dx * e1[2] + dy * e2[2]),
            ])
        }
    }
}

/// Conformal exponent `f(y)` with `g = e^{2f}|dy|²` in the chart.
pub fn conformal_exponent(geometry: Geometry, y: [f64; 2]) -> f64 {
    match geometry {
        Geometry::Sphere => -(1.0 + 0.25 * (y[0] * y[0] + y[1] * y[1])).ln(),
        _ => 0.0,
    }
}

/// Chart radius `|y|` of every vertex in the chart centered at `center`.
/// The antipode of a sphere chart gets `+∞`.
pub fn chart_radii(mesh: &SurfaceMesh, center: [f64; 3]) -> Result<Vec<f64>> {
    require_chart(mesh.geometry())?;
    Ok(mesh
        .vertices()
        .iter()
        .map(|&p| match chart_coordinates(mesh.geometry(), center, p) {
            Ok(y) => (y[0] * y[0] + y[1] * y[1]).sqrt(),
            Err(_) => f64::INFINITY,
        })
        .collect())
}

/// Geodesic distance between two points of a built-in surface.
pub fn surface_distance(geometry: Geometry, a: [f64; 3], b: [f64; 3]) -> Result<f64> {
    require_chart(geometry)?;
    Ok(match geometry {
        Geometry::Torus => {
            let d = torus_delta(a, b);
            (d[0] * d[0] + d[1] * d[1]).sqrt()
        }
        _ => {
            let (a, b) = (normalize3(a), normalize3(b));
            norm3(cross3(a, b)).atan2(dot3(a, b))
        }
    })
}

/// Distance from vertex `source` to every vertex: exact geodesic distance on
/// built-in surfaces, shortest edge path (Dijkstra) on user meshes.
pub fn distances_from(mesh: &SurfaceMesh, source: usize) -> Vec<f64> {
    let p = mesh.vertices()[source];
    if mesh.geometry().has_chart() {
        return mesh
            .vertices()
            .iter()
            .map(|&q| surface_distance(mesh.geometry(), p, q).unwrap_or(f64::INFINITY))
            .collect();
    }
    dijkstra(mesh, source)
}

#[derive(PartialEq)]
struct Key(f64);
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn dijkstra(mesh: &SurfaceMesh, source: usize) -> Vec<f64> {
    let v = mesh.vertices();
    let mut dist = vec![f64::INFINITY; v.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Key(0.0), source)));
    while let Some(Reverse((Key(d), i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        for &j in mesh.neighbors(i) {
            let nd = d + norm3(super::sub3(v[j], v[i]));
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((Key(nd), j)));
            }
        }
    }
    dist
}

/// Largest vertex-to-vertex distance from vertex 0's viewpoint, a cheap
/// upper proxy for the diameter: every point lies within that radius of it.
pub fn covering_radius(mesh: &SurfaceMesh, center: usize) -> f64 {
    distances_from(mesh, center).into_iter().fold(0.0, f64::max) + mesh.max_edge_length()
}

/// Point location on built-in surfaces for P1 interpolation.
pub struct Locator<'a> {
    mesh: &'a SurfaceMesh,
    grid: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a SurfaceMesh) -> Result<Self> {
        require_chart(mesh.geometry())?;
        if mesh.geometry() != Geometry::Torus {
            return Ok(Self {
                mesh,
                grid: 0,
                buckets: Vec::new(),
            });
        }
        let g = ((mesh.num_triangles() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 1024);
        let mut buckets = vec![Vec::new(); g * g];
        let cell = |x: f64| (x * g as f64).floor() as i64;
        for t in 0..mesh.num_triangles() {
            let c = mesh.corners(t);
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for p in c {
                x0 = x0.min(p[0]);
                x1 = x1.max(p[0]);
                y0 = y0.min(p[1]);
                y1 = y1.max(p[1]);
            }
            for j in cell(y0)..=cell(y1) {
                for i in cell(x0)..=cell(x1) {
                    let (bi, bj) = (i.rem_euclid(g as i64) as usize, j.rem_euclid(g as i64) as usize);
                    let b = &mut buckets[bj * g + bi];
                    if b.last() != Some(&t) {
                        b.push(t);
                    }
                }
            }
        }
        Ok(Self { mesh, grid: g, buckets })
    }

    /// Triangle containing `p` and barycentric coordinates of `p` in it.
    pub fn locate(&self, p: [f64; 3]) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = -1e-10;
        let mesh = self.mesh;
        if mesh.geometry() == Geometry::Torus {
            let q = [p[0] - p[0].floor(), p[1] - p[1].floor()];
            let g = self.grid;
            let (i, j) = (
                ((q[0] * g as f64) as usize).min(g - 1),
                ((q[1] * g as f64) as usize).min(g - 1),
            );
            for &t in &self.buckets[j * g + i] {
                let c = mesh.corners(t);
                for sx in [0.0, 1.0, -1.0] {
                    for sy in [0.0, 1.0, -1.0] {
                        let b = bary2(c, [q[0] + sx, q[1] + sy]);
                        if b.iter().all(|&x| x >= TOL) {
                            return Some((t, b));
                        }
                    }
                }
            }
            return None;
        }
        let q = normalize3(p);
        let tris = mesh.triangles();
        let v = mesh.vertices();
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (t, tri) in tris.iter().enumerate() {
            let (a, b, c) = (v[tri[0]], v[tri[1]], v[tri[2]]);
            if dot3(q, a) < 0.0 {
                continue;
            }
            let l0 = dot3(q, cross3(b, c));
            let l1 = dot3(a, cross3(q, c));
            let l2 = dot3(a, cross3(b, q));
            let s = l0 + l1 + l2;
            if s <= 0.0 {
                continue;
            }
            let bc = [l0 / s, l1 / s, l2 / s];
            let worst = bc.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= TOL {
                return Some((t, bc));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, bc, worst));
            }
        }
        best.filter(|b| b.2 > -1e-8).map(|(t, bc, _)| (t, bc))
    }

    pub fn interpolate(&self, u: &Field, p: [f64; 3]) -> Option<f64> {
        let (t, b) = self.locate(p)?;
        let tri = self.mesh.triangles()[t];
        Some(b[0] * u[tri[0]] + b[1] * u[tri[1]] + b[2] * u[tri[2]])
    }
}

/// P1 interpolation of `u` from `from` onto the vertices of `to`.
pub fn transfer(from: &SurfaceMesh, u: &Field, to: &SurfaceMesh) -> Result<Field> {
    from.check_field(u)?;
    if from.geometry() != to.geometry() {
        return Err(Error::InvalidInput("transfer between different surfaces".into()));
    }
    let loc = Locator::new(from)?;
    to.vertices()
        .iter()
        .map(|&p| {
            loc.interpolate(u, p)
                .ok_or_else(|| Error::InvalidInput(format!("point {p:?} not found on the source mesh")))
        })
        .collect::<Result<Vec<f64>>>()
        .map(Field::new)
}

fn bary2(c: &[[f64; 3]; 3], q: [f64; 2]) -> [f64; 3] {
    let (x0, y0) = (c[0][0], c[0][1]);
    let (x1, y1) = (c[1][0] - x0, c[1][1] - y0);
    let (x2, y2) = (c[2][0] - x0, c[2][1] - y0);
    let (qx, qy) = (q[0] - x0, q[1] - y0);
    let det = x1 * y2 - x2 * y1;
    let l1 = (qx * y2 - x2 * qy) / det;
    let l2 = (x1 * qy - qx * y1) / det;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_flat_torus, build_graded_torus, build_sphere};
    use std::f64::consts::PI;

    #[test]
    fn stereographic_roundtrip() {
        let c = normalize3([0.3, -0.2, 0.9]);
        for y in [[0.0, 0.0], [0.1, -0.3], [1.5, 0.2], [-0.7, 2.4]] {
            let p = chart_point(Geometry::Sphere, c, y).unwrap();
            assert!((norm3(p) - 1.0).abs() < 1e-14);
            let back = chart_coordinates(Geometry::Sphere, c, p).unwrap();
            assert!((back[0] - y[0]).abs() < 1e-12 && (back[1] - y[1]).abs() < 1e-12);
            let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
            let theta = surface_distance(Geometry::Sphere, c, p).unwrap();
            assert!((rho - 2.0 * (theta / 2.0).tan()).abs() < 1e-12);
        }
    }

    #[test]
    fn stereographic_is_conformal() {
        // small displacements in the chart scale length by e^f
        let c = [0.0, 0.0, 1.0];
        let y = [0.8, -0.5];
        let h = 1e-6;
        let p0 = chart_point(Geometry::Sphere, c, y).unwrap();
        let f = conformal_exponent(Geometry::Sphere, y);
        for d in [[h, 0.0], [0.0, h], [h * 0.6, h * 0.8]] {
            let p1 = chart_point(Geometry::Sphere, c, [y[0] + d[0], y[1] + d[1]]).unwrap();
            let ratio = norm3(super::super::sub3(p1, p0)) / h;
            assert!((ratio - f.exp()).abs() < 1e-5, "{ratio}");
        }
    }

    #[test]
    fn torus_minimal_image() {
        let d = torus_delta([0.95, 0.1, 0.0], [0.05, 0.9, 0.0]);
        assert!((d[0] - 0.1).abs() < 1e-15 && (d[1] + 0.2).abs() < 1e-15);
        let p = chart_point(Geometry::Torus, [0.95, 0.1, 0.0], [0.1, -0.2]).unwrap();
        assert!((p[0] - 0.05).abs() < 1e-15 && (p[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn locator_reproduces_linear_functions() {
        let m = build_graded_torus(12, [0.8, 0.1], 0.01).unwrap().mesh;
        let loc = Locator::new(&m).unwrap();
        let u = m.interpolate(|x| (2.0 * PI * x[0]).sin());
        for v in 0..m.num_vertices() {
            let val = loc.interpolate(&u, m.vertices()[v]).unwrap();
            assert!((val - u[v]).abs() < 1e-12);
        }
        let m = build_flat_torus(10).unwrap();
        let loc = Locator::new(&m).unwrap();
        // affine in y inside each cell row away from the seam
        let u = m.interpolate(|x| x[1]);
        let val = loc.interpolate(&u, [0.537, 0.4321, 0.0]).unwrap();
        assert!((val - 0.4321).abs() < 1e-12);
        assert!(loc.locate([0.999999, 0.999999, 0.0]).is_some());
    }

    #[test]
    fn sphere_locator() {
        let m = build_sphere(3).unwrap();
        let loc = Locator::new(&m).unwrap();
        let u = m.interpolate(|x| x[2]);
        for v in [0, 5, 100] {
            let val = loc.interpolate(&u, m.vertices()[v]).unwrap();
            assert!((val - u[v]).abs() < 1e-12);
        }
        let p = normalize3([0.2, 0.3, 0.7]);
        assert!((loc.interpolate(&u, p).unwrap() - p[2]).abs() < 0.01);
    }

    #[test]
    fn dijkstra_on_embedded_overestimates() {
        let s = build_sphere(3).unwrap();
        let e = SurfaceMesh::from_parts(Geometry::Embedded, s.vertices().to_vec(), s.triangles().to_vec()).unwrap();
        let exact = distances_from(&s, 0);
        let graph = distances_from(&e, 0);
        for (a, b) in exact.iter().zip(&graph) {
            assert!(*b >= a * (1.0 - 1e-2) - 1e-12);
            assert!(*b <= a * 1.2 + 0.1);
        }
        assert!(matches!(Locator::new(&e), Err(Error::UnsupportedGeometry(_))));
    }
}
