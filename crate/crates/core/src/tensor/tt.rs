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

//! Tensor-Train cores, the left-to-right TT-SVD sweep and reconstruction.

use nalgebra::DMatrixView;

use super::DenseTensor;
use crate::error::shape_err;
use crate::linalg::orthonormality_defect;
use crate::{Error, Matrix, Result};

/// Tolerance on `||G^T G - I||_F` used by [`TtCores::check_orthonormal`].
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// TT cores, each stored as a 3-way tensor `(r_{j-1}, n_j, r_j)` with `r_0 = r_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtCores {
    cores: Vec<DenseTensor>,
    ranks: Vec<usize>,
    orthonormal: bool,
}

/// Per-sweep truncation record of [`tt_svd_with_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct TtSvdReport {
    /// Root-sum of the discarded singular values at each of the `N-1` sweeps.
    pub discarded: Vec<f64>,
    /// Whether a requested rank was larger than the unfolding allowed.
    pub clipped: Vec<bool>,
}

impl TtSvdReport {
    /// `sqrt(sum_j discarded_j^2)`, an upper bound on the reconstruction error.
    pub fn error_bound(&self) -> f64 {
        self.discarded.iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

impl TtCores {
    /// Validates the rank chain. Every core must be 3-way with matching adjacent ranks.
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.len() < 2 {
            return Err(Error::InvalidArgument(
                "a TT decomposition needs at least two cores".into(),
            ));
        }
        let mut prev = 1;
        let mut ranks = Vec::with_capacity(cores.len() - 1);
        for (j, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return shape_err(format!("core {j} has order {}, expected 3", c.order()));
            }
            if c.shape()[0] != prev {
                return shape_err(format!(
                    "core {j} leading rank {} does not match previous rank {prev}",
                    c.shape()[0]
                ));
            }
            prev = c.shape()[2];
            if j + 1 < cores.len() {
                ranks.push(prev);
            }
        }
        if prev != 1 {
            return shape_err(format!("last core trailing rank is {prev}, expected 1"));
        }
        Ok(Self {
            cores,
            ranks,
            orthonormal: false,
        })
    }

    /// Builds from a first matrix `n_1 x r_1`, middle 3-way cores and a last matrix `r_{N-1} x n_N`.
    pub fn from_parts(first: &Matrix, middle: Vec<DenseTensor>, last: &Matrix) -> Result<Self> {
        let mut cores = Vec::with_capacity(middle.len() + 2);
        cores.push(DenseTensor::new(
            vec![1, first.nrows(), first.ncols()],
            first.as_slice().to_vec(),
        )?);
        cores.extend(middle);
        cores.push(DenseTensor::new(
            vec![last.nrows(), last.ncols(), 1],
            last.as_slice().to_vec(),
        )?);
        Self::new(cores)
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn len(&self) -> usize {
        self.cores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cores.is_empty()
    }

    /// TT-ranks `(r_1, ..., r_{N-1})`.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Mode extents `(n_1, ..., n_N)`.
    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Set when the cores were produced by [`tt_svd`].
    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// `G_1` as an `n_1 x r_1` matrix.
    pub fn first(&self) -> Matrix {
        let c = &self.cores[0];
        Matrix::from_column_slice(c.shape()[1], c.shape()[2], c.data())
    }

    /// `G_N` as an `r_{N-1} x n_N` matrix.
    pub fn last(&self) -> Matrix {
        let c = &self.cores[self.cores.len() - 1];
        Matrix::from_column_slice(c.shape()[0], c.shape()[1], c.data())
    }

    /// The middle cores `G_2, ..., G_{N-1}`.
    pub fn middle(&self) -> &[DenseTensor] {
        &self.cores[1..self.cores.len() - 1]
    }

    /// Mode-2 unfolding `(G_j)_[2]` of core `j` (zero-based), of size `(r_{j-1} n_j) x r_j`.
    pub fn left_unfolding(&self, j: usize) -> Matrix {
        let c = &self.cores[j];
        Matrix::from_column_slice(c.shape()[0] * c.shape()[1], c.shape()[2], c.data())
    }

    /// Largest `||G^T G - I||_F` over `G_1` and the left unfoldings of the middle cores.
    pub fn orthonormality_defect(&self) -> f64 {
        (0..self.cores.len() - 1)
            .map(|j| orthonormality_defect(&self.left_unfolding(j)))
            .fold(0.0, f64::max)
    }

    pub fn check_orthonormal(&self) -> bool {
        self.orthonormality_defect() <= ORTHONORMAL_TOL
    }

    /// Single entry `G_1(i_1) G_2(i_2) ... G_N(i_N)`.
    pub fn entry(&self, idx: &[usize]) -> f64 {
        let mut row = vec![1.0];
        for (c, &i) in self.cores.iter().zip(idx) {
            let (r0, n, r1) = (c.shape()[0], c.shape()[1], c.shape()[2]);
            let mut next = vec![0.0; r1];
            for (b, v) in next.iter_mut().enumerate() {
                for (a, &x) in row.iter().enumerate() {
                    *v += x * c.data()[a + r0 * (i + n * b)];
                }
            }
            row = next;
        }
        row[0]
    }

    /// Number of stored core entries.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }
}

/// TT-SVD without a report. See [`tt_svd_with_report`].
pub fn tt_svd(t: &DenseTensor, max_ranks: Option<&[usize]>, tol: Option<f64>) -> Result<TtCores> {
    tt_svd_with_report(t, max_ranks, tol).map(|(c, _)| c)
}

/// Sequential left-to-right TT-SVD.
///
/// `max_ranks` caps each `r_j` and is clipped silently to the unfolding size. With `tol`,
/// sweep `j` keeps the smallest rank whose discarded singular values have root-sum at most
/// `tol ||t||_F / sqrt(N-1)`. When both are given the smaller rank wins.
pub fn tt_svd_with_report(
    t: &DenseTensor,
    max_ranks: Option<&[usize]>,
    tol: Option<f64>,
) -> Result<(TtCores, TtSvdReport)> {
    let dims = t.shape().to_vec();
    let n = dims.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "TT-SVD needs a tensor of order at least 2".into(),
        ));
    }
    if let Some(r) = max_ranks {
        if r.len() != n - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} ranks for an order-{n} tensor, got {}",
                n - 1,
                r.len()
            )));
        }
        if r.contains(&0) {
            return Err(Error::InvalidArgument("TT-ranks must be positive".into()));
        }
    }
    if let Some(tol) = tol {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid TT-SVD tolerance {tol}")));
        }
    }

    let norm = t.frobenius_norm();
    if norm == 0.0 {
        return Ok((zero_cores(&dims), TtSvdReport {
            discarded: vec![0.0; n - 1],
            clipped: vec![false; n - 1],
        }));
    }
    let budget = tol.map(|tol| tol * norm / ((n - 1) as f64).sqrt());

    let mut cores = Vec::with_capacity(n);
    let mut report = TtSvdReport {
        discarded: Vec::with_capacity(n - 1),
        clipped: Vec::with_capacity(n - 1),
    };
    let mut rest: Vec<f64> = t.data().to_vec();
    let mut r_prev = 1;
    for (j, &nj) in dims[..n - 1].iter().enumerate() {
        let rows = r_prev * nj;
        let cols = rest.len() / rows;
        let c = DMatrixView::from_slice(&rest, rows, cols).into_owned();
        let svd = crate::linalg::svd(&c)?;
        let s = &svd.s;
        let full = s.len();
        let mut r = full;
        let mut clipped = false;
        if let Some(caps) = max_ranks {
            clipped = caps[j] > full;
            r = r.min(caps[j]);
        }
        if let Some(budget) = budget {
            r = r.min(tol_rank(s, budget));
        }
        let discarded = s[r..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let u_r = svd.u.columns(0, r).into_owned();
        cores.push(DenseTensor::new(vec![r_prev, nj, r], u_r.as_slice().to_vec())?);
        let mut next = svd.v_t.rows(0, r).into_owned();
        for (i, mut row) in next.row_iter_mut().enumerate() {
            row *= s[i];
        }
        rest = next.as_slice().to_vec();
        report.discarded.push(discarded);
        report.clipped.push(clipped);
        r_prev = r;
    }
    cores.push(DenseTensor::new(vec![r_prev, dims[n - 1], 1], rest)?);
    let mut tt = TtCores::new(cores)?;
    tt.orthonormal = true;
    Ok((tt, report))
}

/// Smallest `r >= 1` with `sqrt(sum_{i >= r} s_i^2) <= budget`.
fn tol_rank(s: &[f64], budget: f64) -> usize {
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let grown = tail + s[r - 1] * s[r - 1];
        if grown.sqrt() > budget {
            break;
        }
        tail = grown;
        r -= 1;
    }
    r
}

fn zero_cores(dims: &[usize]) -> TtCores {
    let n = dims.len();
    let cores = dims
        .iter()
        .enumerate()
        .map(|(j, &nj)| {
            let mut c = DenseTensor::zeros(vec![1, nj, 1]);
            if j + 1 < n {
                c.data[0] = 1.0;
            }
            c
        })
        .collect();
    let mut tt = TtCores::new(cores).expect("rank-1 chain");
    tt.orthonormal = true;
    tt
}

/// Full tensor of a TT decomposition via sequential matrix products.
pub fn tt_reconstruct(c: &TtCores) -> Result<DenseTensor> {
    let dims = c.dims();
    let mut acc = c.left_unfolding(0);
    for core in &c.cores[1..] {
        let (r0, nj, r1) = (core.shape()[0], core.shape()[1], core.shape()[2]);
        if acc.ncols() != r0 {
            return shape_err(format!("rank mismatch: {} vs {r0}", acc.ncols()));
        }
        let g = DMatrixView::from_slice(core.data(), r0, nj * r1);
        let m = acc.nrows();
        let prod = &acc * g;
        acc = crate::linalg::reshape(prod, m * nj);
    }
    DenseTensor::new(dims, acc.as_slice().to_vec())
}

/// Full tensor via the chain of contractions `G_1 x G_2 x ... x G_N` over adjacent rank modes.
pub fn tt_reconstruct_contractions(c: &TtCores) -> Result<DenseTensor> {
    let first = &c.cores[0];
    let mut acc = first.reshaped(vec![first.shape()[1], first.shape()[2]])?;
    for core in &c.cores[1..] {
        let last = acc.order() - 1;
        acc = acc.mn_mode_product(core, last, 0)?;
    }
    acc.reshaped(c.dims())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(shape: Vec<usize>, seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| StandardNormal.sample(&mut rng))
    }

    fn rel_err(a: &DenseTensor, b: &DenseTensor) -> f64 {
        let diff: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        diff.sqrt() / b.frobenius_norm()
    }

    #[test]
    fn rank_one_tensor_is_detected_and_exact() {
        let t = DenseTensor::from_fn(vec![3, 4, 2, 5], |i| {
            (i[0] as f64 + 1.0) * (0.5 - i[1] as f64) * (i[2] as f64 + 2.0) * (1.0 + 0.1 * i[3] as f64)
        });
        for tol in [None, Some(1e-10)] {
            let tt = tt_svd(&t, None, tol).unwrap();
            let rec = tt_reconstruct(&tt).unwrap();
            let err: f64 = rec.data().iter().zip(t.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-12 * t.frobenius_norm(), "tol {tol:?}: {err}");
            if tol.is_some() {
                assert_eq!(tt.ranks(), &[1, 1, 1]);
            }
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 1.0];
        let c = [2.0, -1.0, 4.0, 1.5];
        let t = DenseTensor::from_fn(vec![3, 2, 4], |i| a[i[0]] * b[i[1]] * c[i[2]]);
        let tt = tt_svd(&t, None, Some(1e-12)).unwrap();
        assert_eq!(tt.ranks(), &[1, 1]);
        let rec = tt_reconstruct(&tt).unwrap();
        assert!(rel_err(&rec, &t) <= 1e-12);
    }

    #[test]
    fn full_rank_roundtrip_and_orthonormality() {
        let t = random(vec![4, 5, 6], 1);
        let tt = tt_svd(&t, None, None).unwrap();
        assert_eq!(tt.ranks(), &[4, 6]);
        assert!(tt.is_orthonormal());
        assert!(tt.orthonormality_defect() <= ORTHONORMAL_TOL);
        assert!(rel_err(&tt_reconstruct(&tt).unwrap(), &t) <= 1e-10);
    }

    #[test]
    fn truncation_error_matches_discarded_values() {
        let t = random(vec![4, 5, 6], 2);
        let (tt, report) = tt_svd_with_report(&t, Some(&[2, 3]), None).unwrap();
        assert_eq!(tt.ranks(), &[2, 3]);
        let rec = tt_reconstruct(&tt).unwrap();
        let err = rel_err(&rec, &t) * t.frobenius_norm();
        let bound = report.error_bound();
        assert!(err <= bound * (1.0 + 1e-10), "{err} > {bound}");
        assert!(err >= bound / 2.0, "{err} < {bound}/2");
    }

    #[test]
    fn tolerance_rank_rule() {
        let t = random(vec![4, 5, 6], 3);
        let tol = 0.3;
        let (tt, report) = tt_svd_with_report(&t, None, Some(tol)).unwrap();
        let budget = tol * t.frobenius_norm() / 2f64.sqrt();
        for d in &report.discarded {
            assert!(*d <= budget);
        }
        let err = rel_err(&tt_reconstruct(&tt).unwrap(), &t);
        assert!(err <= tol + 1e-12);
    }

    #[test]
    fn ranks_are_clipped() {
        let t = random(vec![2, 3, 2], 4);
        let (tt, report) = tt_svd_with_report(&t, Some(&[10, 10]), None).unwrap();
        assert_eq!(tt.ranks(), &[2, 2]);
        assert_eq!(report.clipped, vec![true, true]);
    }

    #[test]
    fn zero_tensor() {
        let t = DenseTensor::zeros(vec![3, 2, 4]);
        let tt = tt_svd(&t, None, None).unwrap();
        assert_eq!(tt.ranks(), &[1, 1]);
        assert!(tt.check_orthonormal());
        assert!(tt.last().iter().all(|&x| x == 0.0));
        assert_eq!(tt_reconstruct(&tt).unwrap(), t);
    }

    #[test]
    fn single_entry_matches_slice_product() {
        let t = random(vec![3, 4, 5], 5);
        let tt = tt_svd(&t, Some(&[2, 3]), None).unwrap();
        let rec = tt_reconstruct(&tt).unwrap();
        let idx = [2, 1, 3];
        let g1 = tt.first();
        let g2 = &tt.middle()[0];
        let g3 = tt.last();
        let mut expect = 0.0;
        for a in 0..2 {
            for b in 0..3 {
                expect += g1[(idx[0], a)] * g2.get(&[a, idx[1], b]) * g3[(b, idx[2])];
            }
        }
        assert!((rec.get(&idx) - expect).abs() <= 1e-13);
        assert!((tt.entry(&idx) - expect).abs() <= 1e-13);
    }

    #[test]
    fn both_reconstruction_routes_agree() {
        let t = random(vec![3, 2, 4, 3], 6);
        let tt = tt_svd(&t, Some(&[2, 3, 2]), None).unwrap();
        let a = tt_reconstruct(&tt).unwrap();
        let b = tt_reconstruct_contractions(&tt).unwrap();
        assert!(rel_err(&a, &b) <= 1e-13);
    }

    #[test]
    fn rank_chain_validation() {
        let bad = vec![
            DenseTensor::zeros(vec![1, 2, 2]),
            DenseTensor::zeros(vec![3, 2, 1]),
        ];
        assert!(TtCores::new(bad).is_err());
        assert!(tt_svd(&DenseTensor::zeros(vec![4]), None, None).is_err());
        assert!(tt_svd(&random(vec![2, 2, 2], 0), Some(&[1]), None).is_err());
    }
}
