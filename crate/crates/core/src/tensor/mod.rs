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

//! Dense N-way arrays stored with the first index varying fastest.
//!
//! With this linearization every unfolding `A_[k]` is a pure reshape of the flat
//! buffer, so [`DenseTensor::unfold_view`] borrows instead of copying.

mod io;
mod tt;

pub use io::{read_record, read_tensor, read_tensors, write_record, write_tensor, write_tensors, MAGIC};
pub use tt::{
    tt_reconstruct, tt_reconstruct_contractions, tt_svd, tt_svd_with_report, TtCores, TtSvdReport,
    ORTHONORMAL_TOL,
};

use nalgebra::DMatrixView;

use crate::error::shape_err;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return shape_err(format!(
                "shape {shape:?} needs {len} entries, got {}",
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    /// Builds a tensor from a function of the zero-based multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Self { shape, data }
    }

    /// Wraps a matrix as a 2-way tensor.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: vec![m.nrows().max(1), m.ncols().max(1)],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a zero-based multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(&self.shape) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    /// Same data under a new shape with equal element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    fn unfold_dims(&self, k: usize) -> Result<(usize, usize)> {
        let n = self.order();
        if k == 0 || k >= n.max(2) || (n == 1 && k != 1) {
            return Err(Error::InvalidArgument(format!(
                "unfolding index {k} outside 1..{} for an order-{n} tensor",
                n.saturating_sub(1)
            )));
        }
        let rows: usize = self.shape[..k.min(n)].iter().product();
        Ok((rows, self.len() / rows))
    }

    /// The k-th unfolding `A_[k]`, of size `(I_1...I_k) x (I_{k+1}...I_N)`, borrowed.
    pub fn unfold_view(&self, k: usize) -> Result<DMatrixView<'_, f64>> {
        let (rows, cols) = self.unfold_dims(k)?;
        Ok(DMatrixView::from_slice(&self.data, rows, cols))
    }

    pub fn unfold(&self, k: usize) -> Result<Matrix> {
        let (rows, cols) = self.unfold_dims(k)?;
        Ok(Matrix::from_column_slice(rows, cols, &self.data))
    }

    /// Inverse of [`unfold`](Self::unfold).
    pub fn fold(m: &Matrix, shape: &[usize], k: usize) -> Result<Self> {
        let t = Self::zeros(shape.to_vec());
        let (rows, cols) = t.unfold_dims(k)?;
        if m.shape() != (rows, cols) {
            return shape_err(format!(
                "cannot fold a {}x{} matrix into shape {shape:?} at k={k} (needs {rows}x{cols})",
                m.nrows(),
                m.ncols()
            ));
        }
        Self::new(shape.to_vec(), m.as_slice().to_vec())
    }

    /// Axis permutation: mode `j` of the result is mode `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut strides = vec![0; n];
        let mut s = 1;
        for (j, &d) in self.shape.iter().enumerate() {
            strides[j] = s;
            s *= d;
        }
        let src_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
        let mut data = Vec::with_capacity(self.len());
        let mut idx = vec![0; n];
        for _ in 0..self.len() {
            let off: usize = idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
            data.push(self.data[off]);
            increment(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    /// Mode-`n` matricization (`I_n` rows, remaining modes in order as columns).
    pub fn matricize(&self, n: usize) -> Result<Matrix> {
        let perm = mode_front_perm(self.order(), n)?;
        let p = self.permuted(&perm)?;
        let rows = self.shape[n];
        Ok(Matrix::from_column_slice(rows, self.len() / rows, &p.data))
    }

    /// The n-mode product `self x_n u` with `u` of size `J x I_n` (zero-based `n`).
    pub fn n_mode_product(&self, u: &Matrix, n: usize) -> Result<Self> {
        if n >= self.order() {
            return Err(Error::InvalidArgument(format!(
                "mode {n} out of range for order {}",
                self.order()
            )));
        }
        if u.ncols() != self.shape[n] {
            return shape_err(format!(
                "n-mode product: matrix has {} columns, mode {n} has extent {}",
                u.ncols(),
                self.shape[n]
            ));
        }
        let prod = u * self.matricize(n)?;
        let mut front_shape = vec![u.nrows()];
        front_shape.extend(self.shape.iter().enumerate().filter(|&(j, _)| j != n).map(|(_, &d)| d));
        let front = Self::new(front_shape, prod.as_slice().to_vec())?;
        // undo the move-to-front permutation
        let perm = mode_front_perm(self.order(), n)?;
        let mut inv = vec![0; perm.len()];
        for (j, &p) in perm.iter().enumerate() {
            inv[p] = j;
        }
        front.permuted(&inv)
    }

    /// Contraction of mode `n` of `self` with mode `m` of `other` (both zero-based).
    ///
    /// Result modes: surviving modes of `self` in order, then surviving modes of `other`.
    pub fn mn_mode_product(&self, other: &Self, n: usize, m: usize) -> Result<Self> {
        if n >= self.order() || m >= other.order() {
            return Err(Error::InvalidArgument(format!(
                "contraction modes ({n}, {m}) out of range for orders ({}, {})",
                self.order(),
                other.order()
            )));
        }
        if self.shape[n] != other.shape[m] {
            return shape_err(format!(
                "contracted extents differ: {} vs {}",
                self.shape[n], other.shape[m]
            ));
        }
        let shared = self.shape[n];
        // self with mode n last, other with mode m first
        let mut perm_a: Vec<usize> = (0..self.order()).filter(|&j| j != n).collect();
        perm_a.push(n);
        let a = self.permuted(&perm_a)?;
        let b = other.permuted(&mode_front_perm(other.order(), m)?)?;
        let a_mat = DMatrixView::from_slice(&a.data, a.len() / shared, shared);
        let b_mat = DMatrixView::from_slice(&b.data, shared, b.len() / shared);
        let c = a_mat * b_mat;
        let mut shape: Vec<usize> = a.shape[..a.order() - 1].to_vec();
        shape.extend_from_slice(&b.shape[1..]);
        if shape.is_empty() {
            shape.push(1);
        }
        Self::new(shape, c.as_slice().to_vec())
    }

    /// Scalar product `<self, other>`.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return shape_err(format!(
                "inner product of shapes {:?} and {:?}",
                self.shape, other.shape
            ));
        }
        Ok(crate::linalg::dot(&self.data, &other.data))
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::linalg::dot(&self.data, &self.data).sqrt()
    }
}

fn mode_front_perm(order: usize, n: usize) -> Result<Vec<usize>> {
    if n >= order {
        return Err(Error::InvalidArgument(format!("mode {n} out of range for order {order}")));
    }
    let mut perm = vec![n];
    perm.extend((0..order).filter(|&j| j != n));
    Ok(perm)
}

/// Advances a first-index-fastest multi-index.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &n) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < n {
            return;
        }
        *i = 0;
    }
}
