//! Compressed sparse row storage for the symmetric operators produced by
//! finite-element assembly, and a preconditioned conjugate-gradient solver.
//!
//! The stiffness operator of a closed surface is singular (constants span its
//! kernel). [`solve_mean_zero`] handles that case by solving on the
//! orthogonal complement of the constants and fixing the gauge afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds from unsorted `(row, col, value)` triplets; duplicates are summed.
    ///
    /// Summation order is fixed by a stable sort so repeated builds are bit-identical.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            debug_assert!(i < dim && j < dim);
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        Self {
            dim: diag.len(),
            row_ptr: (0..=diag.len()).collect(),
            col_idx: (0..diag.len()).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// Largest `|A_ij − A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self + s·other`, structurally merged.
    pub fn add_scaled(&self, other: &SparseOperator, s: f64) -> SparseOperator {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.dim {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        SparseOperator::from_triplets(self.dim, t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    /// Stop when `‖r‖ ≤ rel_tol·‖b‖`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Symmetric successive over-relaxation preconditioner.
struct Ssor<'a> {
    a: &'a SparseOperator,
    diag: Vec<f64>,
    omega: f64,
}

impl<'a> Ssor<'a> {
    fn new(a: &'a SparseOperator, omega: f64) -> Self {
        Self {
            a,
            diag: a.diag(),
            omega,
        }
    }

    /// `z = P⁻¹ r` with `P = (D/ω + L) (D/ω)⁻¹ (D/ω + U) · ω/(2−ω)`.
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let a = self.a;
        let w = self.omega;
        let n = a.dim;
        // forward: (D/ω + L) y = r
        for i in 0..n {
            let mut s = r[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if j < i {
                    s -= a.values[k] * z[j];
                }
            }
            z[i] = s * w / self.diag[i];
        }
        // scale by D/ω
        for i in 0..n {
            z[i] *= self.diag[i] / w;
        }
        // backward: (D/ω + U) x = y
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.col_idx[k];
                if j > i {
                    s -= a.values[k] * z[j];
                }
            }
            z[i] = s * w / self.diag[i];
        }
        let scale = 2.0 - w;
        for zi in z.iter_mut() {
            *zi *= scale;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned CG for a symmetric positive (semi)definite operator.
///
/// With `singular = true` the right-hand side and every residual are kept
/// orthogonal to the constant vector, which is the kernel of a closed-surface
/// stiffness operator.
pub fn pcg(
    a: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
    singular: bool,
) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::InvalidInput(format!(
            "right-hand side has length {} for an operator of dimension {n}",
            b.len()
        )));
    }
    let mut rhs = b.to_vec();
    if singular {
        remove_mean(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], CgStats::default()));
    }
    let pre = Ssor::new(a, 1.2);
    let mut r = vec![0.0; n];
    a.apply(&x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    if singular {
        remove_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > opts.rel_tol {
        if it >= opts.max_iter {
            return Err(Error::NonConvergence {
                solver: "conjugate gradient",
                iterations: it,
                residual: rel,
                best_value: rel,
                best: None,
            });
        }
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if singular {
            remove_mean(&mut r);
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        it += 1;
    }
    Ok((
        x,
        CgStats {
            iterations: it,
            rel_residual: rel,
        },
    ))
}

/// Solves `K x = b` for a singular stiffness operator `K` under the gauge
/// `Σ mᵢ xᵢ = 0`. The component of `b` along the constants is discarded, so
/// callers must pass a compatible right-hand side when they need an exact
/// solution of the original system.
pub fn solve_mean_zero(
    k: &SparseOperator,
    mass: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
) -> Result<(Vec<f64>, CgStats)> {
    let (mut x, stats) = pcg(k, b, x0, opts, true)?;
    let area: f64 = mass.iter().sum();
    let mean = dot(mass, &x) / area;
    x.iter_mut().for_each(|v| *v -= mean);
    Ok((x, stats))
}
