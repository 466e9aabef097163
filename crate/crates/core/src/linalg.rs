/*
Copyright 2026 The palm-dl Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Small dense kernels shared by the objectives: transposed products, reshapes,
//! Frobenius inner products and the spectral norm used for Lipschitz constants.

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};

use crate::{Error, Matrix, Result};

/// Dimension at or below which Gram eigenvalues are computed densely.
pub const DENSE_SPECTRAL_DIM: usize = 64;
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 500;

/// `a^T * b` through the blocked gemm path.
pub fn mul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    a.transpose() * b
}

/// `a * b^T` through the blocked gemm path.
pub fn mul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    a * b.transpose()
}

/// Thin SVD `m = u diag(s) v_t` with `s` descending.
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v_t: Matrix,
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD through faer, which stays accurate on rank-deficient inputs.
pub fn svd(m: &Matrix) -> Result<Svd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd {
            u: Matrix::zeros(r, 0),
            s: Vec::new(),
            v_t: Matrix::zeros(0, c),
        });
    }
    let f = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::InvalidArgument(format!("SVD did not converge: {e:?}")))?;
    let (u, sv, v) = (f.U(), f.S().column_vector(), f.V());
    Ok(Svd {
        u: Matrix::from_fn(r, k, |i, j| u[(i, j)]),
        s: (0..k).map(|i| sv[i]).collect(),
        v_t: Matrix::from_fn(k, c, |i, j| v[(j, i)]),
    })
}

/// Reinterprets the column-major buffer of `m` with a new row count.
pub fn reshape(m: Matrix, rows: usize) -> Matrix {
    let len = m.len();
    debug_assert!(rows > 0 && len.is_multiple_of(rows));
    let cols = len / rows;
    m.reshape_generic(nalgebra::Dyn(rows), nalgebra::Dyn(cols))
}

/// Borrowed reshape of a contiguous column-major buffer.
pub fn reshape_view(m: &Matrix, rows: usize) -> DMatrixView<'_, f64> {
    let cols = m.len() / rows;
    DMatrixView::from_slice(m.as_slice(), rows, cols)
}

/// Frobenius inner product `<a, b>`.
pub fn frob_dot(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    dot(a.as_slice(), b.as_slice())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn frob_norm_sq(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum()
}

/// `||a - b||_F^2` without allocating the difference.
pub fn frob_dist_sq(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// `||G^T G - I||_F`, the distance of `g` from having orthonormal columns.
pub fn orthonormality_defect(g: &Matrix) -> f64 {
    let gram = mul_tn(g, g);
    let n = gram.nrows();
    (gram - DMatrix::<f64>::identity(n, n)).norm()
}

/// Largest eigenvalue of the smaller Gram matrix of `m`, i.e. `||m^T m||_2`.
///
/// Dense symmetric eigenvalues are used when the Gram side is at most
/// [`DENSE_SPECTRAL_DIM`]; otherwise power iteration from the normalized all-ones
/// vector, stopped when the Rayleigh quotient changes by less than `tol` relative.
pub fn gram_spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.ncols() <= m.nrows() {
        mul_tn(m, m)
    } else {
        mul_nt(m, m)
    };
    let n = gram.nrows();
    if n <= DENSE_SPECTRAL_DIM {
        let eig = SymmetricEigen::new(gram);
        return eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    }
    power_iteration(&gram, tol, max_iter)
}

fn power_iteration(gram: &Matrix, tol: f64, max_iter: usize) -> f64 {
    let n = gram.nrows();
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = gram * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs() {
            return next.max(0.0);
        }
        lambda = next;
    }
    lambda.max(0.0)
}

/// Largest singular value of `m`.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> f64 {
    gram_spectral_norm(m, tol, max_iter).sqrt()
}

/// Spectral norm with the default tolerance and iteration cap.
pub fn norm2(m: &Matrix) -> f64 {
    spectral_norm(m, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
}

/// `||m||_2^2` with the default settings.
pub fn norm2_sq(m: &Matrix) -> f64 {
    gram_spectral_norm(m, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s = to_faer(m).singular_values().unwrap_or_default();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Smallest singular value above `rel_tol * sigma_max`, if any.
pub fn smallest_nonzero_singular_value(m: &Matrix, rel_tol: f64) -> Option<f64> {
    let s = singular_values(m);
    let top = *s.first()?;
    s.into_iter().rev().find(|&x| x > rel_tol * top)
}
