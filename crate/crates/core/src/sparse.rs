//! Sparse least squares by conjugate gradients on the normal equations (CGLS).
//!
//! Products are parallel over rows or columns and every output element is a
//! sequential sum, and inner products use fixed-size chunks reduced in order,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Sum of `f(i)` over `0..n`, reduced in a thread-count independent order.
fn det_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    partial.into_iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    det_sum(a.len(), |i| a[i] * b[i])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A real matrix held in both compressed-row and compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let row_col = merged.iter().map(|t| t.1).collect();
        let row_val = merged.iter().map(|t| t.2).collect();

        let mut col_ptr = vec![0usize; cols + 1];
        for &(_, c, _) in &merged {
            col_ptr[c + 1] += 1;
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut next = col_ptr.clone();
        let mut col_row = vec![0usize; merged.len()];
        let mut col_val = vec![0.0; merged.len()];
        for &(r, c, v) in &merged {
            col_row[next[c]] = r;
            col_val[next[c]] = v;
            next[c] += 1;
        }
        Self {
            rows,
            cols,
            row_ptr,
            row_col,
            row_val,
            col_ptr,
            col_row,
            col_val,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_val.len()
    }

    /// Nonzeros of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.row_col[span.clone()]
            .iter()
            .copied()
            .zip(self.row_val[span].iter().copied())
    }

    /// Squared Euclidean norm of every column.
    pub fn col_norms_sq(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|c| self.col_val[self.col_ptr[c]..self.col_ptr[c + 1]].iter().map(|v| v * v).sum())
            .collect()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .into_par_iter()
            .with_min_len(1024)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        (0..self.cols)
            .into_par_iter()
            .with_min_len(256)
            .map(|c| {
                let span = self.col_ptr[c]..self.col_ptr[c + 1];
                self.col_row[span.clone()]
                    .iter()
                    .zip(&self.col_val[span])
                    .map(|(&r, &v)| v * y[r])
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance on the normal-equation gradient.
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge penalty `λ‖x‖²`.
    pub ridge: f64,
    /// Scale columns to unit norm (Jacobi preconditioning). Rank-deficient
    /// systems then converge to the solution of least column-weighted norm.
    pub precondition: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            ridge: 0.0,
            precondition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ax − y‖`.
    pub residual_norm: f64,
    /// `‖Aᵀ(Ax − y) + λx‖`, recomputed from scratch.
    pub gradient_norm: f64,
    /// `‖Aᵀy‖`.
    pub rhs_norm: f64,
}

fn gradient(a: &SparseMatrix, y: &[f64], x: &[f64], ridge: f64) -> (Vec<f64>, Vec<f64>) {
    let ax = a.mul(x);
    let r: Vec<f64> = y.iter().zip(&ax).map(|(y, ax)| y - ax).collect();
    let mut s = a.mul_transpose(&r);
    if ridge > 0.0 {
        for (s, x) in s.iter_mut().zip(x) {
            *s -= ridge * x;
        }
    }
    (r, s)
}

/// Minimises `‖Ax − y‖² + λ‖x‖²` starting from zero, so rank-deficient
/// systems converge to the least-norm solution.
pub fn cgls(a: &SparseMatrix, y: &[f64], opts: SolveOptions) -> Solution {
    assert_eq!(y.len(), a.rows());
    let n = a.cols();
    let mut x = vec![0.0; n];
    let rhs_norm = norm(&a.mul_transpose(y));
    if rhs_norm == 0.0 {
        return Solution {
            x,
            iterations: 0,
            converged: true,
            residual_norm: norm(y),
            gradient_norm: 0.0,
            rhs_norm,
        };
    }
    let target = opts.tol * rhs_norm;
    // Inverse diagonal of the normal matrix, or ones.
    let inv_m: Vec<f64> = if opts.precondition {
        a.col_norms_sq()
            .into_iter()
            .map(|d| if d + opts.ridge > 0.0 { 1.0 / (d + opts.ridge) } else { 0.0 })
            .collect()
    } else {
        vec![1.0; n]
    };
    let scaled = |s: &[f64]| -> Vec<f64> { s.iter().zip(&inv_m).map(|(s, m)| s * m).collect() };
    let mut iterations = 0;
    loop {
        let (mut r, mut s) = gradient(a, y, &x, opts.ridge);
        let g = norm(&s);
        if g <= target || iterations >= opts.max_iter {
            return Solution {
                residual_norm: norm(&r),
                gradient_norm: g,
                x,
                iterations,
                converged: g <= target,
                rhs_norm,
            };
        }
        let mut z = scaled(&s);
        let mut gamma = dot(&s, &z);
        let mut p = z.clone();
        while iterations < opts.max_iter {
            iterations += 1;
            let q = a.mul(&p);
            let delta = dot(&q, &q) + opts.ridge * dot(&p, &p);
            if delta <= 0.0 {
                break;
            }
            let alpha = gamma / delta;
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
            s = a.mul_transpose(&r);
            if opts.ridge > 0.0 {
                s.par_iter_mut().zip(&x).for_each(|(s, x)| *s -= opts.ridge * x);
            }
            if norm(&s) <= target {
                break;
            }
            z = scaled(&s);
            let gamma_next = dot(&s, &z);
            let beta = gamma_next / gamma;
            gamma = gamma_next;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        // The recursively updated residual drifts; the loop head re-checks
        // against a freshly computed gradient and restarts if needed.
        if iterations >= opts.max_iter {
            let (r, s) = gradient(a, y, &x, opts.ridge);
            let g = norm(&s);
            return Solution {
                residual_norm: norm(&r),
                gradient_norm: g,
                converged: g <= target,
                x,
                iterations,
                rhs_norm,
            };
        }
    }
}
