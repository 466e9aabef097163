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

//! Closed-form projections onto the three constraint sets used by the solvers.
//!
//! Indicator functions have stepsize-independent proximal maps, so
//! [`prox_indicator`] simply dispatches to the projector.

use crate::linalg::orthonormality_defect;
use crate::{Error, Matrix, Result};

/// Column norms below this are treated as zero by [`project_unit_columns`].
pub const ZERO_COLUMN_NORM: f64 = 1e-300;
/// Tolerance of the membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibleSet {
    /// Columns of unit 2-norm.
    UnitColumns,
    /// Orthonormal columns, `G^T G = I`.
    Orthonormal,
    /// At most `tau` nonzeros per column.
    ColumnSparse(usize),
    /// No constraint.
    Free,
}

impl FeasibleSet {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::ColumnSparse(0) => Err(Error::InvalidArgument(
                "column sparsity level must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn project(&self, a: &Matrix) -> Result<Matrix> {
        match *self {
            FeasibleSet::UnitColumns => Ok(project_unit_columns(a)),
            FeasibleSet::Orthonormal => project_orthonormal(a),
            FeasibleSet::ColumnSparse(tau) => {
                self.validate()?;
                Ok(hard_threshold_columns(a, tau))
            }
            FeasibleSet::Free => Ok(a.clone()),
        }
    }

    pub fn contains(&self, a: &Matrix) -> bool {
        match *self {
            FeasibleSet::UnitColumns => is_unit_columns(a, MEMBERSHIP_TOL),
            FeasibleSet::Orthonormal => {
                a.nrows() >= a.ncols() && orthonormality_defect(a) <= MEMBERSHIP_TOL
            }
            FeasibleSet::ColumnSparse(tau) => max_column_nnz(a) <= tau,
            FeasibleSet::Free => true,
        }
    }
}

/// Divides every column by its 2-norm. A zero column becomes `e_1`.
pub fn project_unit_columns(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm < ZERO_COLUMN_NORM {
            col.fill(0.0);
            if !col.is_empty() {
                col[0] = 1.0;
            }
        } else {
            col /= norm;
        }
    }
    out
}

/// `U V^T` from the thin SVD `A = U S V^T`, the nearest matrix with orthonormal columns.
pub fn project_orthonormal(a: &Matrix) -> Result<Matrix> {
    if a.nrows() < a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "no {}x{} matrix has orthonormal columns",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.ncols() == 0 {
        return Ok(a.clone());
    }
    let svd = crate::linalg::svd(a)?;
    let p = svd.u * svd.v_t;
    if orthonormality_defect(&p) <= MEMBERSHIP_TOL {
        return Ok(p);
    }
    // Rank-deficient inputs can leave U slightly off; re-orthonormalize by QR.
    let qr = p.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c.neg_mut();
        }
    }
    Ok(q)
}

/// Keeps the `tau` largest-magnitude entries of each column, ties to the smaller row index.
///
/// With `tau >= m` every column is returned unchanged.
pub fn hard_threshold_columns(a: &Matrix, tau: usize) -> Matrix {
    let m = a.nrows();
    if tau >= m {
        return a.clone();
    }
    let mut out = Matrix::zeros(m, a.ncols());
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for (j, col) in a.column_iter().enumerate() {
        order.clear();
        order.extend(0..m);
        // stable sort keeps smaller indices first among equal magnitudes
        order.sort_by(|&x, &y| col[y].abs().total_cmp(&col[x].abs()));
        for &i in &order[..tau] {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Proximal map of the indicator of `set`; the stepsize only has to be positive.
pub fn prox_indicator(set: FeasibleSet, point: &Matrix, stepsize: f64) -> Result<Matrix> {
    if !(stepsize > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "proximal stepsize must be positive, got {stepsize}"
        )));
    }
    set.project(point)
}

pub fn is_unit_columns(a: &Matrix, tol: f64) -> bool {
    a.column_iter().all(|c| (c.norm() - 1.0).abs() <= tol)
}

pub fn max_column_nnz(a: &Matrix) -> usize {
    a.column_iter()
        .map(|c| c.iter().filter(|&&x| x != 0.0).count())
        .max()
        .unwrap_or(0)
}
