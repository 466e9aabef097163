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

//! Classification with a learned dictionary: a linear classifier fitted to the training
//! codes, OMP coding of new samples, and argmax labeling. Class indices are zero-based.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::{Error, Matrix, Result};

/// Atoms must have unit norm to this tolerance before coding.
pub const UNIT_ATOM_TOL: f64 = 1e-8;
/// Singular values below this fraction of the largest are dropped by the pseudoinverse.
pub const PINV_RTOL: f64 = 1e-12;

/// One-hot matrix `n_classes x m` whose column `i` is `e_{labels[i]}`.
pub fn build_label_matrix(labels: &[usize], n_classes: usize) -> Result<Matrix> {
    let mut c = Matrix::zeros(n_classes, labels.len());
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {l} of sample {i} outside 0..{n_classes}"
            )));
        }
        c[(l, i)] = 1.0;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    /// `n_classes x k`.
    pub w: Matrix,
}

/// Minimizer of `||C - W X||_F^2 + beta ||W||_F^2`.
///
/// With `beta = 0` this is the minimum-norm solution `C X^+`.
pub fn train_classifier(x: &Matrix, c: &Matrix, beta: f64) -> Result<Classifier> {
    if x.ncols() != c.ncols() {
        return Err(Error::Shape(format!(
            "{} code columns but {} label columns",
            x.ncols(),
            c.ncols()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be nonnegative, got {beta}")));
    }
    let w = if beta == 0.0 {
        let svd = crate::linalg::svd(x)?;
        let smax = svd.s.first().copied().unwrap_or(0.0);
        // W = C V diag(1/s) U^T over the singular values above the cutoff
        let keep = svd.s.iter().take_while(|&&v| v > PINV_RTOL * smax).count();
        let mut cv = c * svd.v_t.rows(0, keep).transpose();
        for (j, mut col) in cv.column_iter_mut().enumerate() {
            col /= svd.s[j];
        }
        cv * svd.u.columns(0, keep).transpose()
    } else {
        let mut gram = x * x.transpose();
        for i in 0..gram.nrows() {
            gram[(i, i)] += beta;
        }
        let rhs = x * c.transpose();
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("regularized Gram matrix not positive".into()))?;
        chol.solve(&rhs).transpose()
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iter: 0 });
    }
    Ok(Classifier { w })
}

impl Classifier {
    pub fn classify(&self, x: &DVector<f64>) -> usize {
        classify_sample(&self.w, x)
    }
}

/// `argmax_i |W x|_i`, ties to the smallest index.
pub fn classify_sample(w: &Matrix, x: &DVector<f64>) -> usize {
    let s = w * x;
    let mut best = 0;
    for i in 1..s.len() {
        if s[i].abs() > s[best].abs() {
            best = i;
        }
    }
    best
}

/// Fraction of matching entries.
pub fn classification_rate(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("no samples to score".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Details of one OMP run.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub x: DVector<f64>,
    /// Atoms in selection order.
    pub support: Vec<usize>,
    /// Residual norm before the first step and after each step.
    pub residual_norms: Vec<f64>,
}

pub fn check_unit_atoms(d: &Matrix) -> Result<()> {
    for (j, c) in d.column_iter().enumerate() {
        let norm = c.norm();
        if (norm - 1.0).abs() > UNIT_ATOM_TOL {
            return Err(Error::InvalidArgument(format!(
                "atom {j} has norm {norm}, normalize the dictionary first"
            )));
        }
    }
    Ok(())
}

fn check_tau(d: &Matrix, tau: usize) -> Result<()> {
    let cap = d.nrows().min(d.ncols());
    if tau > cap {
        return Err(Error::InvalidArgument(format!(
            "sparsity {tau} exceeds min(n, k) = {cap}"
        )));
    }
    Ok(())
}

/// Orthogonal matching pursuit with at most `tau` atoms.
pub fn omp(d: &Matrix, y: &DVector<f64>, tau: usize) -> Result<DVector<f64>> {
    omp_detailed(d, y, tau).map(|r| r.x)
}

pub fn omp_detailed(d: &Matrix, y: &DVector<f64>, tau: usize) -> Result<OmpResult> {
    if y.len() != d.nrows() {
        return Err(Error::Shape(format!(
            "sample of length {} for a dictionary with {} rows",
            y.len(),
            d.nrows()
        )));
    }
    check_unit_atoms(d)?;
    check_tau(d, tau)?;
    Ok(omp_unchecked(d, y, tau))
}

fn omp_unchecked(d: &Matrix, y: &DVector<f64>, tau: usize) -> OmpResult {
    let k = d.ncols();
    let y_norm = y.norm();
    let mut support: Vec<usize> = Vec::with_capacity(tau);
    let mut coef = DVector::zeros(0);
    let mut residual = y.clone();
    let mut norms = vec![y_norm];
    for _ in 0..tau {
        if residual.norm() < 1e-12 * y_norm || y_norm == 0.0 {
            break;
        }
        let corr = d.tr_mul(&residual);
        let mut best = 0;
        for j in 1..k {
            if corr[j].abs() > corr[best].abs() {
                best = j;
            }
        }
        if corr[best].abs() <= 1e-15 * y_norm || support.contains(&best) {
            break;
        }
        support.push(best);
        let sub = d.select_columns(&support);
        let qr = sub.clone().qr();
        let qty = qr.q().tr_mul(y);
        match qr.r().solve_upper_triangular(&qty) {
            Some(c) => coef = c,
            None => {
                support.pop();
                break;
            }
        }
        residual = y - &sub * &coef;
        norms.push(residual.norm());
    }
    let mut x = DVector::zeros(k);
    for (&j, &c) in support.iter().zip(coef.iter()) {
        x[j] = c;
    }
    OmpResult {
        x,
        support,
        residual_norms: norms,
    }
}

/// Codes every column of `ys`, `threads` workers (0 picks the rayon default).
/// The output is independent of the worker count.
pub fn omp_batch(d: &Matrix, ys: &Matrix, tau: usize, threads: usize) -> Result<Matrix> {
    if ys.nrows() != d.nrows() {
        return Err(Error::Shape(format!(
            "samples of length {} for a dictionary with {} rows",
            ys.nrows(),
            d.nrows()
        )));
    }
    check_unit_atoms(d)?;
    check_tau(d, tau)?;
    let code = |j: usize| omp_unchecked(d, &ys.column(j).into_owned(), tau).x;
    let cols: Vec<DVector<f64>> = if threads == 1 {
        (0..ys.ncols()).map(code).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..ys.ncols()).into_par_iter().map(code).collect())
    };
    let mut x = Matrix::zeros(d.ncols(), ys.ncols());
    for (j, c) in cols.iter().enumerate() {
        x.set_column(j, c);
    }
    Ok(x)
}

/// Labels of every code column.
pub fn predict(w: &Matrix, codes: &Matrix) -> Vec<usize> {
    let scores = w * codes;
    scores
        .column_iter()
        .map(|s| {
            let mut best = 0;
            for i in 1..s.len() {
                if s[i].abs() > s[best].abs() {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// `sample_id,true_label,predicted_label` rows.
pub fn write_predictions_csv<W: Write>(mut w: W, truth: &[usize], predicted: &[usize]) -> std::io::Result<()> {
    writeln!(w, "sample_id,true_label,predicted_label")?;
    for (i, (t, p)) in truth.iter().zip(predicted).enumerate() {
        writeln!(w, "{i},{t},{p}")?;
    }
    Ok(())
}
