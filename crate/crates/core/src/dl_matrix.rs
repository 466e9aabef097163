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

//! Matrix dictionary learning `min ||Y - DX||_F^2` with unit-norm atoms and
//! `tau`-sparse code columns, as a two-block objective.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{frob_dist_sq, frob_dot, mul_nt, mul_tn, norm2_sq};
use crate::palm::BlockObjective;
use crate::prox::{project_unit_columns, FeasibleSet};
use crate::{Error, Matrix, Result};

/// Position of the dictionary and the codes in the block list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlockOrder {
    /// `[D, X]`.
    #[default]
    DictionaryFirst,
    /// `[X, D]`.
    CodesFirst,
}

#[derive(Debug, Clone)]
pub struct MatrixDLProblem {
    y: Matrix,
    k: usize,
    tau: usize,
    order: BlockOrder,
}

impl MatrixDLProblem {
    /// Requires `n < k < p` for `Y` of size `n x p`, and `tau >= 1`.
    pub fn new(y: Matrix, k: usize, tau: usize) -> Result<Self> {
        let (n, p) = y.shape();
        if !(n < k && k < p) {
            return Err(Error::InvalidArgument(format!(
                "atom count must satisfy n < k < p, got n={n}, k={k}, p={p}"
            )));
        }
        if tau == 0 {
            return Err(Error::InvalidArgument("sparsity level must be at least 1".into()));
        }
        Ok(Self {
            y,
            k,
            tau,
            order: BlockOrder::default(),
        })
    }

    pub fn with_order(mut self, order: BlockOrder) -> Self {
        self.order = order;
        self
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn order(&self) -> BlockOrder {
        self.order
    }

    /// Index of the dictionary block.
    pub fn d_index(&self) -> usize {
        match self.order {
            BlockOrder::DictionaryFirst => 0,
            BlockOrder::CodesFirst => 1,
        }
    }

    /// Index of the code block.
    pub fn x_index(&self) -> usize {
        1 - self.d_index()
    }

    /// `(D, X)` from a block list.
    pub fn split<'a>(&self, blocks: &'a [Matrix]) -> (&'a Matrix, &'a Matrix) {
        (&blocks[self.d_index()], &blocks[self.x_index()])
    }

    /// Block list in solver order.
    pub fn blocks(&self, d: Matrix, x: Matrix) -> Vec<Matrix> {
        match self.order {
            BlockOrder::DictionaryFirst => vec![d, x],
            BlockOrder::CodesFirst => vec![x, d],
        }
    }

    fn check(&self, d: &Matrix, x: &Matrix) -> Result<()> {
        let (n, p) = self.y.shape();
        if d.shape() != (n, self.k) || x.shape() != (self.k, p) {
            return Err(Error::Shape(format!(
                "expected D {n}x{} and X {}x{p}, got {:?} and {:?}",
                self.k,
                self.k,
                d.shape(),
                x.shape()
            )));
        }
        Ok(())
    }

    /// `||Y - DX||_F^2`.
    pub fn eval_h(&self, d: &Matrix, x: &Matrix) -> Result<f64> {
        self.check(d, x)?;
        Ok(frob_dist_sq(&self.y, &(d * x)))
    }

    /// `-2 D^T (Y - DX)`.
    pub fn grad_x(&self, d: &Matrix, x: &Matrix) -> Result<Matrix> {
        self.check(d, x)?;
        Ok(mul_tn(d, &(d * x - &self.y)) * 2.0)
    }

    /// `-2 (Y - DX) X^T`.
    pub fn grad_d(&self, d: &Matrix, x: &Matrix) -> Result<Matrix> {
        self.check(d, x)?;
        Ok(mul_nt(&(d * x - &self.y), x) * 2.0)
    }

    /// `2 ||D^T D||_2`.
    pub fn lipschitz_x(d: &Matrix) -> f64 {
        2.0 * norm2_sq(d)
    }

    /// `2 ||X X^T||_2`.
    pub fn lipschitz_d(x: &Matrix) -> f64 {
        2.0 * norm2_sq(x)
    }

    /// Random feasible `(D, X)`: Gaussian unit-norm atoms and exactly `tau` Gaussian
    /// nonzeros per code column on uniformly drawn rows.
    pub fn init_blocks(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_unit_columns(self.y.nrows(), self.k, &mut rng);
        let x = random_sparse_codes(self.k, self.y.ncols(), self.tau, &mut rng);
        self.blocks(d, x)
    }
}

/// Closed-form BB stepsizes of the code block for `S = X_new - X_old` and fixed `D`.
///
/// Returns `None` when a denominator vanishes.
pub fn bb_closed_forms_codes(d: &Matrix, s: &Matrix) -> Option<(f64, f64)> {
    let gram = mul_tn(d, d);
    closed_forms(s, &(gram * s))
}

/// Closed-form BB stepsizes of the dictionary block for `T = D_new - D_old` and fixed `X`.
pub fn bb_closed_forms_dictionary(x: &Matrix, t: &Matrix) -> Option<(f64, f64)> {
    closed_forms(t, &(t * mul_nt(x, x)))
}

fn closed_forms(s: &Matrix, hs: &Matrix) -> Option<(f64, f64)> {
    let ss = frob_dot(s, s);
    let shs = frob_dot(s, hs);
    let hh = frob_dot(hs, hs);
    if ss == 0.0 || shs == 0.0 || hh == 0.0 {
        return None;
    }
    Some((0.5 * ss / shs, 0.5 * shs / hh))
}

impl BlockObjective for MatrixDLProblem {
    fn block_count(&self) -> usize {
        2
    }

    fn block_shape(&self, i: usize) -> (usize, usize) {
        if i == self.d_index() {
            (self.y.nrows(), self.k)
        } else {
            (self.k, self.y.ncols())
        }
    }

    fn feasible_set(&self, i: usize) -> FeasibleSet {
        if i == self.d_index() {
            FeasibleSet::UnitColumns
        } else {
            FeasibleSet::ColumnSparse(self.tau)
        }
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        let (d, x) = self.split(blocks);
        frob_dist_sq(&self.y, &(d * x))
    }

    fn partial_grad(&self, i: usize, blocks: &[Matrix]) -> Matrix {
        let (d, x) = self.split(blocks);
        let r = d * x - &self.y;
        if i == self.d_index() {
            mul_nt(&r, x) * 2.0
        } else {
            mul_tn(d, &r) * 2.0
        }
    }

    fn grad_difference(&self, i: usize, blocks: &[Matrix], new: &Matrix) -> Matrix {
        let (d, x) = self.split(blocks);
        if i == self.d_index() {
            (new - d) * mul_nt(x, x) * 2.0
        } else {
            mul_tn(d, &(d * (new - x))) * 2.0
        }
    }

    fn lipschitz(&self, i: usize, blocks: &[Matrix]) -> Option<f64> {
        let (d, x) = self.split(blocks);
        Some(if i == self.d_index() {
            Self::lipschitz_d(x)
        } else {
            Self::lipschitz_x(d)
        })
    }
}

/// Nonzero row indices of each column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePattern {
    pub columns: Vec<Vec<usize>>,
}

impl SparsePattern {
    pub fn from_dense(x: &Matrix) -> Self {
        let columns = x
            .column_iter()
            .map(|c| (0..c.len()).filter(|&i| c[i] != 0.0).collect())
            .collect();
        Self { columns }
    }

    pub fn max_support(&self) -> usize {
        self.columns.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Every entry off the recorded supports is exactly zero.
    pub fn is_consistent(&self, x: &Matrix) -> bool {
        self.columns.len() == x.ncols()
            && x.column_iter().zip(&self.columns).all(|(c, s)| {
                (0..c.len()).all(|i| c[i] == 0.0 || s.binary_search(&i).is_ok())
            })
    }
}

/// Gaussian `m x n` matrix with its columns normalized.
pub fn random_unit_columns<R: Rng>(m: usize, n: usize, rng: &mut R) -> Matrix {
    let a = Matrix::from_fn(m, n, |_, _| StandardNormal.sample(rng));
    project_unit_columns(&a)
}

/// `k x p` codes with exactly `min(tau, k)` Gaussian nonzeros per column.
pub fn random_sparse_codes<R: Rng>(k: usize, p: usize, tau: usize, rng: &mut R) -> Matrix {
    let mut x = Matrix::zeros(k, p);
    for j in 0..p {
        let mut rows = sample(rng, k, tau.min(k)).into_vec();
        rows.sort_unstable();
        for i in rows {
            let mut v: f64 = StandardNormal.sample(rng);
            while v == 0.0 {
                v = StandardNormal.sample(rng);
            }
            x[(i, j)] = v;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randn(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
    }

    fn instance(seed: u64) -> (MatrixDLProblem, Matrix, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = randn(6, 10, &mut rng);
        let d = randn(6, 8, &mut rng);
        let x = randn(8, 10, &mut rng);
        (MatrixDLProblem::new(y, 8, 3).unwrap(), d, x)
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(MatrixDLProblem::new(Matrix::zeros(4, 10), 4, 2).is_err());
        assert!(MatrixDLProblem::new(Matrix::zeros(4, 10), 10, 2).is_err());
        assert!(MatrixDLProblem::new(Matrix::zeros(4, 10), 6, 0).is_err());
    }

    #[test]
    fn objective_examples() {
        let (prob, d, x) = instance(1);
        let y = prob.y().clone();
        let dx = &d * &x;
        let mut oracle = 0.0;
        for i in 0..6 {
            for j in 0..10 {
                oracle += (y[(i, j)] - dx[(i, j)]).powi(2);
            }
        }
        let h = prob.eval_h(&d, &x).unwrap();
        assert!((h - oracle).abs() <= 1e-13 * oracle);
        assert!(prob.eval_h(&d, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn small_gradient_example() {
        // Y = I_2, D = I_2 trivially violates n < k, so check the formula directly
        let d = Matrix::identity(2, 2);
        let x = Matrix::zeros(2, 2);
        let y = Matrix::identity(2, 2);
        let gx = mul_tn(&d, &(&d * &x - &y)) * 2.0;
        assert_eq!(gx, Matrix::identity(2, 2) * -2.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (prob, d, x) = instance(2);
        let h = |d: &Matrix, x: &Matrix| prob.eval_h(d, x).unwrap();
        let gd = prob.grad_d(&d, &x).unwrap();
        let gx = prob.grad_x(&d, &x).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eps = 1e-6;
        for _ in 0..20 {
            let v = randn(6, 8, &mut rng);
            let fd = (h(&(&d + &v * eps), &x) - h(&(&d - &v * eps), &x)) / (2.0 * eps);
            let an = frob_dot(&gd, &v);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0));
            let v = randn(8, 10, &mut rng);
            let fd = (h(&d, &(&x + &v * eps)) - h(&d, &(&x - &v * eps))) / (2.0 * eps);
            let an = frob_dot(&gx, &v);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0));
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert!((MatrixDLProblem::lipschitz_x(&Matrix::identity(4, 4)) - 2.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = randn(6, 3, &mut rng).qr().q();
        assert!((MatrixDLProblem::lipschitz_x(&q) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn grad_difference_is_exact() {
        let (prob, d, x) = instance(5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let blocks = vec![d.clone(), x.clone()];
        let xn = randn(8, 10, &mut rng);
        let dn = randn(6, 8, &mut rng);
        let gx = prob.grad_difference(1, &blocks, &xn);
        let naive = prob.grad_x(&d, &xn).unwrap() - prob.grad_x(&d, &x).unwrap();
        assert!((gx - &naive).norm() <= 1e-10 * naive.norm());
        let gd = prob.grad_difference(0, &blocks, &dn);
        let naive = prob.grad_d(&dn, &x).unwrap() - prob.grad_d(&d, &x).unwrap();
        assert!((gd - &naive).norm() <= 1e-10 * naive.norm());
    }

    #[test]
    fn orthonormal_dictionary_gives_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = randn(8, 5, &mut rng).qr().q();
        let s = randn(5, 4, &mut rng);
        let (b1, b2) = bb_closed_forms_codes(&d, &s).unwrap();
        assert!((b1 - 0.5).abs() < 1e-14 && (b2 - 0.5).abs() < 1e-14);
        assert!(bb_closed_forms_codes(&d, &Matrix::zeros(5, 4)).is_none());
    }

    #[test]
    fn init_is_feasible_and_deterministic() {
        let (prob, _, _) = instance(8);
        let a = prob.init_blocks(42);
        let b = prob.init_blocks(42);
        assert_eq!(a, b);
        assert!(prob.is_feasible(0, &a[0]));
        assert!(prob.is_feasible(1, &a[1]));
        let pat = SparsePattern::from_dense(&a[1]);
        assert!(pat.columns.iter().all(|c| c.len() == 3));
        assert!(pat.is_consistent(&a[1]));
        let swapped = prob.clone().with_order(BlockOrder::CodesFirst).init_blocks(42);
        assert_eq!(swapped[0], a[1]);
    }
}
