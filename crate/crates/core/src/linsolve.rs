//! Repeated solves with a closed-surface stiffness operator.
//!
//! The kernel of `K` is spanned by the constants. Fixing the value at one
//! vertex (grounding) leaves a symmetric positive definite system, which is
//! factored once in envelope form after reverse Cuthill–McKee reordering.
//! When the envelope would be too large the solver falls back to
//! preconditioned CG.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::{solve_mean_zero, CgOptions, SparseOperator};

/// Envelope entries above which CG is used instead of a factorization.
pub const MAX_ENVELOPE: usize = 40_000_000;

/// Cholesky factor of `K` with one vertex removed, in envelope storage.
#[derive(Clone, Debug)]
pub struct GroundedCholesky {
    /// `perm[new] = old` for the reduced system (ground vertex excluded).
    perm: Vec<usize>,
    /// First stored column of each row of `L`.
    first: Vec<usize>,
    /// Offset of row `i` in `values`; the row holds columns `first[i]..=i`.
    offset: Vec<usize>,
    values: Vec<f64>,
    ground: usize,
    dim: usize,
}

/// Reverse Cuthill–McKee ordering of the vertices other than `skip`.
fn rcm(k: &SparseOperator, skip: usize) -> Vec<usize> {
    let n = k.dim();
    let degree: Vec<usize> = (0..n)
        .map(|i| k.row(i).filter(|&(j, _)| j != i && j != skip).count())
        .collect();
    let mut visited = vec![false; n];
    visited[skip] = true;
    let mut order = Vec::with_capacity(n - 1);
    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| -> usize {
        // returns the last vertex reached (a far vertex)
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        let mut last = start;
        while let Some(i) = queue.pop_front() {
            out.push(i);
            last = i;
            let mut nb: Vec<usize> = k.row(i).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (degree[j], j));
            for j in nb {
                visited[j] = true;
                queue.push_back(j);
            }
        }
        last
    };
    for s in 0..n {
        if visited[s] {
            continue;
        }
        // pseudo-peripheral start: one extra sweep from the far end
        let mut probe = visited.clone();
        let mut scratch = Vec::new();
        let far = bfs(s, &mut probe, &mut scratch);
        bfs(far, &mut visited, &mut order);
    }
    order.reverse();
    order
}

impl GroundedCholesky {
    /// Envelope size the factorization would need, without factoring.
    pub fn envelope_size(k: &SparseOperator) -> usize {
        let (_, first) = Self::layout(k, 0);
        first.iter().enumerate().map(|(i, f)| i - f + 1).sum()
    }

    fn layout(k: &SparseOperator, ground: usize) -> (Vec<usize>, Vec<usize>) {
        let n = k.dim();
        let perm = rcm(k, ground);
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let first: Vec<usize> = perm
            .iter()
            .enumerate()
            .map(|(i, &old)| {
                k.row(old)
                    .filter(|&(j, _)| j != ground)
                    .map(|(j, _)| inv[j])
                    .filter(|&j| j <= i)
                    .min()
                    .unwrap_or(i)
            })
            .collect();
        (perm, first)
    }

    pub fn new(k: &SparseOperator) -> Result<Self> {
        let n = k.dim();
        if n < 2 {
            return Err(Error::InvalidInput(
                "stiffness operator needs at least two vertices".into(),
            ));
        }
        let ground = 0;
        let (perm, first) = Self::layout(k, ground);
        let m = perm.len();
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut offset = Vec::with_capacity(m + 1);
        let mut total = 0usize;
        for i in 0..m {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut values = vec![0.0; total];
        for (i, &old) in perm.iter().enumerate() {
            for (j, v) in k.row(old) {
                if j == ground {
                    continue;
                }
                let jj = inv[j];
                if jj <= i {
                    values[offset[i] + jj - first[i]] += v;
                }
            }
        }
        // row-oriented envelope Cholesky
        for i in 0..m {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (ri, rj) = (offset[i], offset[j]);
                let mut s = values[ri + j - fi];
                let a = &values[ri + lo - fi..ri + j - fi];
                let b = &values[rj + lo - fj..rj + j - fj];
                s -= a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    values[ri + j - fi] = s / values[rj + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::InvalidInput(
                            "stiffness operator is not positive definite after grounding (disconnected mesh?)".into(),
                        ));
                    }
                    values[ri + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            perm,
            first,
            offset,
            values,
            ground,
            dim: n,
        })
    }

    /// Solves `K x = b` with `x[ground] = 0`; `b` must sum to zero.
    fn solve_grounded(&self, b: &[f64]) -> Vec<f64> {
        let m = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..m {
            let fi = self.first[i];
            let r = self.offset[i];
            let s: f64 = self.values[r..r + i - fi]
                .iter()
                .zip(&y[fi..i])
                .map(|(l, x)| l * x)
                .sum();
            y[i] = (y[i] - s) / self.values[r + i - fi];
        }
        for i in (0..m).rev() {
            let fi = self.first[i];
            let r = self.offset[i];
            y[i] /= self.values[r + i - fi];
            let yi = y[i];
            for (l, x) in self.values[r..r + i - fi].iter().zip(&mut y[fi..i]) {
                *x -= l * yi;
            }
        }
        let mut x = vec![0.0; self.dim];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x[self.ground] = 0.0;
        x
    }

    pub fn envelope_len(&self) -> usize {
        self.values.len()
    }
}

/// Solver for `K x = b` under the gauge `Σ mᵢ xᵢ = 0`.
#[derive(Clone, Debug)]
pub enum LaplaceSolver {
    Direct(GroundedCholesky),
    Iterative(CgOptions),
}

impl LaplaceSolver {
    pub fn new(k: &SparseOperator) -> Result<Self> {
        if GroundedCholesky::envelope_size(k) <= MAX_ENVELOPE {
            Ok(Self::Direct(GroundedCholesky::new(k)?))
        } else {
            Ok(Self::Iterative(CgOptions::default()))
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, Self::Direct(_))
    }

    /// `b` is first made compatible by removing `(Σb/Area)·m`, so the result
    /// `x` satisfies `xᵀKv = bᵀv` for every `v` with `Σ mᵢvᵢ = 0`.
    pub fn solve(&self, k: &SparseOperator, mass: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != k.dim() {
            return Err(Error::FieldLength {
                expected: k.dim(),
                actual: b.len(),
            });
        }
        let area: f64 = mass.iter().sum();
        let c = b.iter().sum::<f64>() / area;
        let rhs: Vec<f64> = b.iter().zip(mass).map(|(v, m)| v - c * m).collect();
        match self {
            Self::Direct(chol) => {
                let mut x = chol.solve_grounded(&rhs);
                let shift = mass.iter().zip(&x).map(|(m, v)| m * v).sum::<f64>() / area;
                x.iter_mut().for_each(|v| *v -= shift);
                Ok(x)
            }
            Self::Iterative(opts) => Ok(solve_mean_zero(k, mass, &rhs, None, *opts)?.0),
        }
    }
}
