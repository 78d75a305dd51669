//! Plain-text mesh format.
//!
//! ```text
//! vertices <V> triangles <F> geometry <torus|sphere|embedded>
//! x y          (torus: V lines, two coordinates)
//! x y z        (otherwise: V lines, three coordinates)
//! i j k        (F lines, 0-based indices)
//! ```
//!
//! Coordinates are written with the shortest representation that parses back
//! to the same `f64`, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{Geometry, SurfaceMesh};
use crate::error::{Error, Result};

pub fn to_string(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "vertices {} triangles {} geometry {}",
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.geometry().name()
    );
    for v in mesh.vertices() {
        let _ = match mesh.geometry() {
            Geometry::Torus => writeln!(s, "{:?} {:?}", v[0], v[1]),
            _ => writeln!(s, "{:?} {:?} {:?}", v[0], v[1], v[2]),
        };
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn from_str(text: &str) -> Result<SurfaceMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty mesh file".into(),
    })?;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 6 || tok[0] != "vertices" || tok[2] != "triangles" || tok[4] != "geometry" {
        return Err(Error::Parse {
            line: hline,
            message: "expected `vertices <V> triangles <F> geometry <kind>`".into(),
        });
    }
    let count = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line: hline,
            message: format!("invalid {what} count `{s}`"),
        })
    };
    let nv = count(tok[1], "vertex")?;
    let nf = count(tok[3], "triangle")?;
    let geometry: Geometry = tok[5].parse().map_err(|_| Error::Parse {
        line: hline,
        message: format!("unknown geometry `{}`", tok[5]),
    })?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: hline,
            message: format!("file ends before {nv} vertices were read"),
        })?;
        let xs = l
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: ln,
                    message: format!("invalid coordinate `{s}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let ok_len = match geometry {
            Geometry::Torus => xs.len() == 2 || xs.len() == 3,
            _ => xs.len() == 3,
        };
        if !ok_len || xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected finite coordinates for a {} vertex", geometry.name()),
            });
        }
        let mut p = [xs[0], xs[1], if xs.len() == 3 { xs[2] } else { 0.0 }];
        if geometry == Geometry::Torus {
            if !(0.0..1.0).contains(&p[0]) || !(0.0..1.0).contains(&p[1]) {
                return Err(Error::Parse {
                    line: ln,
                    message: "torus coordinates must lie in [0,1)".into(),
                });
            }
            p[2] = 0.0;
        }
        vertices.push(p);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: hline,
            message: format!("file ends before {nf} triangles were read"),
        })?;
        let idx = l
            .split_whitespace()
            .map(|s| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: ln,
                    message: format!("invalid vertex index `{s}`"),
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        if idx.len() != 3 {
            return Err(Error::Parse {
                line: ln,
                message: "a triangle needs exactly three indices".into(),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(Error::Parse {
                line: ln,
                message: format!("vertex index {bad} out of range (V = {nv})"),
            });
        }
        triangles.push([idx[0], idx[1], idx[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            message: "unexpected trailing content".into(),
        });
    }
    SurfaceMesh::from_parts(geometry, vertices, triangles)
}

pub fn read(path: impl AsRef<Path>) -> Result<SurfaceMesh> {
    from_str(&std::fs::read_to_string(path)?)
}

pub fn write(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_string(mesh))?;
    Ok(())
}
