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

//! Tensor-Train dictionary learning.
//!
//! The dictionary over `q` image modes is the TT chain `O_1, ..., O_q, G` where each
//! `O_j` is the left unfolding `(r_{j-1} n_j) x r_j` of an orthonormal core and `G`
//! (`r_q x k`) has unit columns. The block list is `[O_1, ..., O_q, G, X]`, updated in
//! that order. `q = 2` covers three-way image stacks, `q = 3` four-way ones.
//!
//! No Kronecker factor is ever formed. Applying `(I (x) O_j)^T` to the data is a
//! reshape followed by one product, and because the `O_j` are orthonormal
//! `||Y - Q M||^2 = ||Q^T Y - M||^2 + ||Y||^2 - ||Q^T Y||^2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dl_matrix::{random_sparse_codes, random_unit_columns};
use crate::linalg::{frob_norm_sq, mul_nt, mul_tn, norm2_sq, reshape_view};
use crate::palm::BlockObjective;
use crate::prox::{project_unit_columns, FeasibleSet};
use crate::tensor::{tt_svd_with_report, DenseTensor};
use crate::{Error, Matrix, Result};

/// Blocks in solver order: `[O_1, ..., O_q, G, X]`.
pub type TtDlState = Vec<Matrix>;

#[derive(Debug, Clone)]
pub struct TtDlProblem {
    /// Data unfolded as `(n_1 ... n_q) x p`.
    y: Matrix,
    y_norm_sq: f64,
    data_shape: Vec<usize>,
    image_dims: Vec<usize>,
    ranks: Vec<usize>,
    k: usize,
    tau: usize,
}

impl TtDlProblem {
    /// `y` holds the `q = ranks.len()` image modes first, then the sample modes.
    pub fn new(y: &DenseTensor, k: usize, tau: usize, ranks: Vec<usize>) -> Result<Self> {
        let q = ranks.len();
        if q == 0 || y.order() <= q {
            return Err(Error::InvalidArgument(format!(
                "{q} TT-ranks need a data tensor of order greater than {q}, got order {}",
                y.order()
            )));
        }
        let image_dims = y.shape()[..q].to_vec();
        let mut prev = 1;
        for (j, (&r, &nj)) in ranks.iter().zip(&image_dims).enumerate() {
            if r == 0 || r > prev * nj {
                return Err(Error::InvalidArgument(format!(
                    "rank r_{} = {r} must lie in 1..={}",
                    j + 1,
                    prev * nj
                )));
            }
            prev = r;
        }
        let n: usize = image_dims.iter().product();
        if k <= n {
            return Err(Error::InvalidArgument(format!(
                "atom count k = {k} must exceed the pixel count {n}"
            )));
        }
        if tau == 0 {
            return Err(Error::InvalidArgument("sparsity level must be at least 1".into()));
        }
        let ym = y.unfold(q)?;
        Ok(Self {
            y_norm_sq: frob_norm_sq(&ym),
            y: ym,
            data_shape: y.shape().to_vec(),
            image_dims,
            ranks,
            k,
            tau,
        })
    }

    /// Number of image modes `q`.
    pub fn cores(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn image_dims(&self) -> &[usize] {
        &self.image_dims
    }

    pub fn data_shape(&self) -> &[usize] {
        &self.data_shape
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Unfolded data `(n_1 ... n_q) x p`.
    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn samples(&self) -> usize {
        self.y.ncols()
    }

    pub fn g_index(&self) -> usize {
        self.cores()
    }

    pub fn x_index(&self) -> usize {
        self.cores() + 1
    }

    fn rank_before(&self, j: usize) -> usize {
        if j == 0 {
            1
        } else {
            self.ranks[j - 1]
        }
    }

    fn check_blocks(&self, blocks: &[Matrix]) -> Result<()> {
        if blocks.len() != self.block_count() {
            return Err(Error::Shape(format!(
                "{} blocks for a {}-block problem",
                blocks.len(),
                self.block_count()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != self.block_shape(i) {
                return Err(Error::Shape(format!(
                    "block {i} is {:?}, expected {:?}",
                    b.shape(),
                    self.block_shape(i)
                )));
            }
        }
        Ok(())
    }

    /// `proj[1..=upto]`, where `proj[l]` is the data after applying the transposed first
    /// `l` cores, laid out `r_l x (n_{l+1} ... n_q p)`.
    fn projections(&self, blocks: &[Matrix], upto: usize) -> Vec<Matrix> {
        let mut out: Vec<Matrix> = Vec::with_capacity(upto);
        for j in 0..upto {
            let o = &blocks[j];
            let rows = o.nrows();
            let prev = out.last().unwrap_or(&self.y);
            out.push(o.transpose() * reshape_view(prev, rows));
        }
        out
    }

    /// `fwd[from..=q]` where `fwd[q] = G X` and `fwd[l-1] = O_l reshape(fwd[l], r_l)`.
    /// Element `l - from` of the result is `fwd[l]`.
    fn forwards(&self, blocks: &[Matrix], right: &Matrix, from: usize) -> Vec<Matrix> {
        let q = self.cores();
        let mut out = vec![&blocks[q] * right];
        for j in (from + 1..=q).rev() {
            let next = {
                let f = out.last().expect("nonempty");
                &blocks[j - 1] * reshape_view(f, self.ranks[j - 1])
            };
            out.push(next);
        }
        out.reverse();
        out
    }

    /// `H` evaluated at level `l`, exact whenever the first `l` cores are orthonormal.
    fn level_value(&self, blocks: &[Matrix], l: usize) -> f64 {
        let x = &blocks[self.x_index()];
        let fwd = self.forwards(blocks, x, l);
        let f = &fwd[0];
        if l == 0 {
            return dist_sq(self.y.as_slice(), f.as_slice());
        }
        let proj = self.projections(blocks, l);
        let p = &proj[l - 1];
        dist_sq(p.as_slice(), f.as_slice()) + (self.y_norm_sq - frob_norm_sq(p))
    }

    /// `||Y - D X||_F^2` through the forward chain. Exact for any cores.
    pub fn eval_h(&self, blocks: &[Matrix]) -> Result<f64> {
        self.check_blocks(blocks)?;
        Ok(self.value(blocks))
    }

    /// `||Q^T Y - G X||_F^2 + ||Y||_F^2 - ||Q^T Y||_F^2` with `Q` the orthonormal part of
    /// the chain. Equal to [`eval_h`](Self::eval_h) on feasible states, but the correction
    /// term cancels, so its absolute accuracy is about `eps ||Y||_F^2`.
    pub fn eval_h_projected(&self, blocks: &[Matrix]) -> Result<f64> {
        self.check_blocks(blocks)?;
        Ok(self.level_value(blocks, self.cores()))
    }

    /// `(P, B)` for core `j` (zero-based): the partial gradient is `2 (O_j B - P) B^T`.
    fn core_factors(&self, blocks: &[Matrix], j: usize) -> (Matrix, Matrix) {
        let rows = self.rank_before(j) * self.image_dims[j];
        let p = if j == 0 {
            reshape_view(&self.y, rows).into_owned()
        } else {
            let proj = self.projections(blocks, j);
            reshape_view(&proj[j - 1], rows).into_owned()
        };
        let x = &blocks[self.x_index()];
        let fwd = self.forwards(blocks, x, j + 1);
        let b = reshape_view(&fwd[0], self.ranks[j]).into_owned();
        (p, b)
    }

    /// Residual `G X - proj[q]` of the last two blocks.
    fn top_residual(&self, blocks: &[Matrix]) -> Matrix {
        let q = self.cores();
        let proj = self.projections(blocks, q);
        &blocks[q] * &blocks[q + 1] - &proj[q - 1]
    }

    /// Block `i`'s partial gradient, checked.
    pub fn gradient(&self, blocks: &[Matrix], i: usize) -> Result<Matrix> {
        self.check_blocks(blocks)?;
        if i >= self.block_count() {
            return Err(Error::InvalidArgument(format!("no block {i}")));
        }
        Ok(self.partial_grad(i, blocks))
    }

    /// The full dictionary `(n_1 ... n_q) x k`.
    pub fn materialize_dictionary(&self, blocks: &[Matrix]) -> Result<Matrix> {
        let q = self.cores();
        if blocks.len() < q + 1 {
            return Err(Error::Shape("missing dictionary cores".into()));
        }
        for i in 0..=q {
            if blocks[i].shape() != self.block_shape(i) {
                return Err(Error::Shape(format!(
                    "core {i} is {:?}, expected {:?}",
                    blocks[i].shape(),
                    self.block_shape(i)
                )));
            }
        }
        let eye = Matrix::identity(self.k, self.k);
        let fwd = self.forwards(blocks, &eye, 0);
        let n: usize = self.image_dims.iter().product();
        Ok(reshape_view(&fwd[0], n).into_owned())
    }

    /// Random feasible state: a Gaussian dictionary tensor with unit-norm atoms is
    /// TT-decomposed at the requested ranks, its last core projected onto unit columns,
    /// and the codes drawn with exactly `tau` nonzeros per column.
    pub fn init_blocks(&self, seed: u64) -> Result<TtDlState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = self.image_dims.iter().product();
        let d = random_unit_columns(n, self.k, &mut rng);
        let mut shape = self.image_dims.clone();
        shape.push(self.k);
        let dt = DenseTensor::new(shape, d.as_slice().to_vec())?;
        let (tt, report) = tt_svd_with_report(&dt, Some(&self.ranks), None)?;
        if tt.ranks() != self.ranks.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "TT-SVD clipped ranks {:?} to {:?}",
                self.ranks,
                tt.ranks()
            )));
        }
        debug_assert!(report.clipped.iter().all(|c| !c));
        let q = self.cores();
        let mut blocks: Vec<Matrix> = (0..q).map(|j| tt.left_unfolding(j)).collect();
        blocks.push(project_unit_columns(&tt.last()));
        blocks.push(random_sparse_codes(self.k, self.samples(), self.tau, &mut rng));
        Ok(blocks)
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl BlockObjective for TtDlProblem {
    fn block_count(&self) -> usize {
        self.cores() + 2
    }

    fn block_shape(&self, i: usize) -> (usize, usize) {
        let q = self.cores();
        if i < q {
            (self.rank_before(i) * self.image_dims[i], self.ranks[i])
        } else if i == q {
            (self.ranks[q - 1], self.k)
        } else {
            (self.k, self.samples())
        }
    }

    fn feasible_set(&self, i: usize) -> FeasibleSet {
        let q = self.cores();
        if i < q {
            FeasibleSet::Orthonormal
        } else if i == q {
            FeasibleSet::UnitColumns
        } else {
            FeasibleSet::ColumnSparse(self.tau)
        }
    }

    fn value(&self, blocks: &[Matrix]) -> f64 {
        self.level_value(blocks, 0)
    }

    fn partial_grad(&self, i: usize, blocks: &[Matrix]) -> Matrix {
        let q = self.cores();
        if i < q {
            let (p, b) = self.core_factors(blocks, i);
            mul_nt(&(&blocks[i] * &b - p), &b) * 2.0
        } else if i == q {
            mul_nt(&self.top_residual(blocks), &blocks[q + 1]) * 2.0
        } else {
            mul_tn(&blocks[q], &self.top_residual(blocks)) * 2.0
        }
    }

    fn grad_difference(&self, i: usize, blocks: &[Matrix], new: &Matrix) -> Matrix {
        let q = self.cores();
        let t = new - &blocks[i];
        if i < q {
            let (_, b) = self.core_factors(blocks, i);
            t * mul_nt(&b, &b) * 2.0
        } else if i == q {
            let x = &blocks[q + 1];
            t * mul_nt(x, x) * 2.0
        } else {
            let g = &blocks[q];
            mul_tn(g, &(g * t)) * 2.0
        }
    }

    fn lipschitz(&self, i: usize, blocks: &[Matrix]) -> Option<f64> {
        let q = self.cores();
        Some(if i < q {
            let (_, b) = self.core_factors(blocks, i);
            2.0 * norm2_sq(&b)
        } else if i == q {
            2.0 * norm2_sq(&blocks[q + 1])
        } else {
            2.0 * norm2_sq(&blocks[q])
        })
    }
}

/// Storage of the plain and the TT model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryFootprint {
    /// `n k + tau N`.
    pub plain: usize,
    /// `n_1 r_1 + sum_j r_{j-1} n_j r_j + r_q k + tau N`.
    pub tt: usize,
}

/// Entry counts of a dense dictionary plus codes versus TT cores plus codes, for
/// `samples` training columns with `tau` nonzeros each.
pub fn memory_footprint(
    image_dims: &[usize],
    ranks: &[usize],
    k: usize,
    tau: usize,
    samples: usize,
) -> MemoryFootprint {
    let n: usize = image_dims.iter().product();
    let codes = tau * samples;
    let mut prev = 1;
    let mut cores = 0;
    for (&nj, &r) in image_dims.iter().zip(ranks) {
        cores += prev * nj * r;
        prev = r;
    }
    MemoryFootprint {
        plain: n * k + codes,
        tt: cores + prev * k + codes,
    }
}

impl TtDlProblem {
    pub fn memory_footprint(&self) -> MemoryFootprint {
        memory_footprint(&self.image_dims, &self.ranks, self.k, self.tau, self.samples())
    }
}
