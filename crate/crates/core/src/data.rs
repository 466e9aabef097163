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

//! Dataset plumbing: IDX files, image stacks, per-class tensors, splits and
//! synthetic ground-truthed instances.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dl_matrix::{random_sparse_codes, random_unit_columns};
use crate::tensor::{tt_svd, DenseTensor};
use crate::{Error, Matrix, Result};

/// IDX type code for unsigned bytes, the only one supported.
pub const IDX_U8: u8 = 0x08;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dtype: u8,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses an IDX byte buffer, decompressing it first if it is gzip data.
pub fn read_idx(bytes: &[u8]) -> Result<IdxArray> {
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut raw = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut raw)
            .map_err(|e| Error::Format(format!("bad gzip stream: {e}")))?;
        return read_idx(&raw);
    }
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format("bad IDX magic".into()));
    }
    let dtype = bytes[2];
    if dtype != IDX_U8 {
        return Err(Error::Format(format!("unsupported IDX type 0x{dtype:02x}")));
    }
    let ndim = bytes[3] as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Format("truncated IDX header".into()));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|i| {
            let o = 4 + 4 * i;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let len = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Format("IDX size overflows".into()))?;
    if bytes.len() - header != len {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, header promises {len}",
            bytes.len() - header
        )));
    }
    Ok(IdxArray {
        dtype,
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn write_idx(a: &IdxArray) -> Result<Vec<u8>> {
    if a.dtype != IDX_U8 {
        return Err(Error::Format(format!("unsupported IDX type 0x{:02x}", a.dtype)));
    }
    if a.dims.len() > 255 || a.dims.iter().product::<usize>() != a.data.len() {
        return Err(Error::Shape("IDX dims do not match the payload".into()));
    }
    let mut out = vec![0, 0, a.dtype, a.dims.len() as u8];
    for &d in &a.dims {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("extent {d} too large")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(&a.data);
    Ok(out)
}

pub fn read_idx_file(path: impl AsRef<Path>) -> Result<IdxArray> {
    let bytes = std::fs::read(path)?;
    read_idx(&bytes)
}

/// `dir/stem.gz` if present, else `dir/stem`.
pub fn find_idx_file(dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    for name in [format!("{stem}.gz"), stem.to_string()] {
        let p = dir.join(name);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no {stem}[.gz] in {}", dir.display()),
    )))
}

/// Images with their class labels.
#[derive(Debug, Clone)]
pub struct ImageSet {
    /// `rows x cols x count`.
    pub images: DenseTensor,
    pub labels: Vec<usize>,
}

/// The MNIST-layout training (`train-*`) or test (`t10k-*`) pair from `dir`.
pub fn load_mnist(dir: impl AsRef<Path>, train: bool) -> Result<ImageSet> {
    let prefix = if train { "train" } else { "t10k" };
    let dir = dir.as_ref();
    let images = idx_images(&read_idx_file(find_idx_file(dir, &format!("{prefix}-images-idx3-ubyte"))?)?)?;
    let labels = idx_labels(&read_idx_file(find_idx_file(dir, &format!("{prefix}-labels-idx1-ubyte"))?)?)?;
    if labels.len() != images.shape()[2] {
        return Err(Error::Format(format!(
            "{} labels for {} images",
            labels.len(),
            images.shape()[2]
        )));
    }
    Ok(ImageSet { images, labels })
}

/// An IDX image file (`count x rows x cols`) as a `rows x cols x count` stack scaled to [0, 1].
pub fn idx_images(a: &IdxArray) -> Result<DenseTensor> {
    if a.dims.len() != 3 {
        return Err(Error::Format(format!("image file has {} dims, expected 3", a.dims.len())));
    }
    let (m, h, w) = (a.dims[0], a.dims[1], a.dims[2]);
    Ok(DenseTensor::from_fn(vec![h, w, m], |i| {
        f64::from(a.data[i[2] * h * w + i[0] * w + i[1]]) / 255.0
    }))
}

/// An IDX label file as class indices.
pub fn idx_labels(a: &IdxArray) -> Result<Vec<usize>> {
    if a.dims.len() != 1 {
        return Err(Error::Format(format!("label file has {} dims, expected 1", a.dims.len())));
    }
    Ok(a.data.iter().map(|&b| b as usize).collect())
}

/// `out x inp` box-filter weights; row `t` spreads over the source interval
/// `[t inp/out, (t+1) inp/out)` with fractional coverage, and sums to one.
pub fn area_weights(inp: usize, out: usize) -> Matrix {
    let scale = inp as f64 / out as f64;
    Matrix::from_fn(out, inp, |t, s| {
        let lo = t as f64 * scale;
        let hi = lo + scale;
        let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
        overlap / scale
    })
}

/// Area-averaging resize of the first two modes of an image stack.
pub fn downsample(stack: &DenseTensor, target: (usize, usize)) -> Result<DenseTensor> {
    if stack.order() < 2 {
        return Err(Error::InvalidArgument("an image stack needs two pixel modes".into()));
    }
    let (h, w) = (stack.shape()[0], stack.shape()[1]);
    if target.0 == 0 || target.1 == 0 {
        return Err(Error::InvalidArgument("target size must be positive".into()));
    }
    if target.0 > h || target.1 > w {
        return Err(Error::InvalidArgument(format!(
            "cannot shrink {h}x{w} images to {}x{}",
            target.0, target.1
        )));
    }
    stack
        .n_mode_product(&area_weights(h, target.0), 0)?
        .n_mode_product(&area_weights(w, target.1), 1)
}

/// Per-class tensor `n_1 x n_2 x n_e x n_p`: class `l` takes its first `n_e` samples in
/// dataset order. Returns the tensor and the number of dropped samples.
pub fn to_class_tensor(
    samples: &DenseTensor,
    labels: &[usize],
    n_e: usize,
    n_classes: usize,
) -> Result<(DenseTensor, usize)> {
    let s = samples.shape();
    if s.len() != 3 {
        return Err(Error::Shape(format!("expected an n1 x n2 x m stack, got {s:?}")));
    }
    let (n1, n2, m) = (s[0], s[1], s[2]);
    if labels.len() != m {
        return Err(Error::Shape(format!("{} labels for {m} samples", labels.len())));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::InvalidArgument(format!("label {l} outside 0..{n_classes}")));
        }
        per_class[l].push(i);
    }
    if n_e == 0 {
        return Err(Error::InvalidArgument("need at least one sample per class".into()));
    }
    for (l, members) in per_class.iter().enumerate() {
        if members.len() < n_e {
            return Err(Error::InvalidArgument(format!(
                "class {l} has {} samples, fewer than {n_e}",
                members.len()
            )));
        }
    }
    let pix = n1 * n2;
    let mut data = Vec::with_capacity(pix * n_e * n_classes);
    for members in &per_class {
        for &i in &members[..n_e] {
            data.extend_from_slice(&samples.data()[i * pix..(i + 1) * pix]);
        }
    }
    let t = DenseTensor::new(vec![n1, n2, n_e, n_classes], data)?;
    Ok((t, m - n_e * n_classes))
}

/// Smallest class size, the default per-class count.
pub fn min_class_count(labels: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0; n_classes];
    for &l in labels {
        if l < n_classes {
            counts[l] += 1;
        }
    }
    counts.into_iter().min().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: DenseTensor,
    pub test: DenseTensor,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Splits the expression mode (second to last) by a seeded permutation, the same
/// partition for every class. `floor(fraction n_e)` expressions go to training.
pub fn split_train_test(t: &DenseTensor, spec: SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0,1), got {}",
            spec.train_fraction
        )));
    }
    let n = t.order();
    if n < 2 || t.shape()[n - 2] < 2 {
        return Err(Error::InvalidArgument("need at least two expressions to split".into()));
    }
    let n_e = t.shape()[n - 2];
    let mut perm: Vec<usize> = (0..n_e).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = (spec.train_fraction * n_e as f64).floor() as usize;
    let mut train_indices = perm[..n_train].to_vec();
    let mut test_indices = perm[n_train..].to_vec();
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(Split {
        train: select_expressions(t, &train_indices)?,
        test: select_expressions(t, &test_indices)?,
        train_indices,
        test_indices,
    })
}

/// Sub-tensor keeping the listed indices of the second-to-last mode.
pub fn select_expressions(t: &DenseTensor, idx: &[usize]) -> Result<DenseTensor> {
    let n = t.order();
    let s = t.shape();
    let inner: usize = s[..n - 2].iter().product();
    let n_e = s[n - 2];
    let n_p = s[n - 1];
    let mut data = Vec::with_capacity(inner * idx.len() * n_p);
    for l in 0..n_p {
        for &e in idx {
            let off = inner * (e + n_e * l);
            data.extend_from_slice(&t.data()[off..off + inner]);
        }
    }
    let mut shape = s.to_vec();
    shape[n - 2] = idx.len();
    DenseTensor::new(shape, data)
}

/// Class labels of the columns of a per-class tensor's sample unfolding.
pub fn class_labels(n_e: usize, n_p: usize) -> Vec<usize> {
    (0..n_p).flat_map(|l| std::iter::repeat_n(l, n_e)).collect()
}

/// `Y = D* X* + sigma N` with ground truth.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub y: Matrix,
    pub d: Matrix,
    pub x: Matrix,
    pub noise: Matrix,
}

/// Random unit-column `D*` (`n x k`), codes with exactly `tau` nonzeros per column and
/// Gaussian noise scaled by `sigma`.
pub fn synth_dl_instance(
    n: usize,
    k: usize,
    p: usize,
    tau: usize,
    sigma: f64,
    seed: u64,
) -> Result<SynthInstance> {
    if !(n < k && k < p) {
        return Err(Error::InvalidArgument(format!(
            "need n < k < p, got n={n}, k={k}, p={p}"
        )));
    }
    if tau == 0 || tau > k {
        return Err(Error::InvalidArgument(format!("sparsity {tau} outside 1..={k}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level {sigma} must be nonnegative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = random_unit_columns(n, k, &mut rng);
    let x = random_sparse_codes(k, p, tau, &mut rng);
    let noise = Matrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let y = &d * &x + &noise * sigma;
    Ok(SynthInstance { y, d, x, noise })
}

/// Labeled synthetic samples with class-owned atoms.
#[derive(Debug, Clone)]
pub struct SynthClassInstance {
    /// `n x (n_e n_p)` samples, class-major.
    pub y: Matrix,
    pub d: Matrix,
    pub x: Matrix,
    pub labels: Vec<usize>,
}

/// Every sample is a positive multiple of one atom owned by its class
/// (atom `j` belongs to class `j mod n_p`), so `tau = 1` coding recovers it exactly.
pub fn synth_class_instance(
    n: usize,
    k: usize,
    n_e: usize,
    n_p: usize,
    seed: u64,
) -> Result<SynthClassInstance> {
    if k < n_p || n_e == 0 || n_p == 0 {
        return Err(Error::InvalidArgument(format!(
            "need k >= n_p and positive counts, got k={k}, n_e={n_e}, n_p={n_p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = random_unit_columns(n, k, &mut rng);
    let owned: Vec<Vec<usize>> = (0..n_p).map(|l| (l..k).step_by(n_p).collect()).collect();
    let m = n_e * n_p;
    let mut x = Matrix::zeros(k, m);
    let labels = class_labels(n_e, n_p);
    for (i, &l) in labels.iter().enumerate() {
        let atoms = &owned[l];
        let j = atoms[(i / n_p + i) % atoms.len()];
        let u: f64 = StandardNormal.sample(&mut rng);
        x[(j, i)] = 1.0 + 0.5 * u.abs();
    }
    let y = &d * &x;
    Ok(SynthClassInstance { y, d, x, labels })
}

/// A data tensor `image_dims x samples` that is exactly a TT dictionary times sparse codes:
/// a random unit-atom dictionary is TT-decomposed at `ranks` and renormalized.
pub fn synth_tt_instance(
    image_dims: &[usize],
    samples: &[usize],
    k: usize,
    tau: usize,
    ranks: &[usize],
    sigma: f64,
    seed: u64,
) -> Result<DenseTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = image_dims.iter().product();
    let d0 = random_unit_columns(n, k, &mut rng);
    let mut shape = image_dims.to_vec();
    shape.push(k);
    let tt = tt_svd(&DenseTensor::new(shape, d0.as_slice().to_vec())?, Some(ranks), None)?;
    let mut cores = tt.cores().to_vec();
    let last = cores.len() - 1;
    let g = crate::prox::project_unit_columns(&tt.last());
    cores[last] = DenseTensor::new(vec![g.nrows(), g.ncols(), 1], g.as_slice().to_vec())?;
    let tt = crate::tensor::TtCores::new(cores)?;
    let d = crate::tensor::tt_reconstruct(&tt)?;
    let d = Matrix::from_column_slice(n, k, d.data());
    let p: usize = samples.iter().product();
    let x = random_sparse_codes(k, p, tau, &mut rng);
    let noise = Matrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let y = d * x + noise * sigma;
    let mut shape = image_dims.to_vec();
    shape.extend_from_slice(samples);
    DenseTensor::new(shape, y.as_slice().to_vec())
}
