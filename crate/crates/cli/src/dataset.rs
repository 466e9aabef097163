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

//! Training and test samples from the synthetic generator, IDX files or tensor files.

use std::path::Path;

use palm_dl::data::{class_labels, downsample, load_mnist, select_expressions, split_train_test, synth_class_instance, to_class_tensor, SplitSpec};
use palm_dl::tensor::{read_tensor, DenseTensor};
use palm_dl::Matrix;

use crate::settings::{DataSettings, Source};
use crate::CliError;

/// Samples as columns, grouped class by class.
pub struct Dataset {
    pub image_dims: Vec<usize>,
    pub train: Matrix,
    pub train_labels: Vec<usize>,
    pub test: Matrix,
    pub test_labels: Vec<usize>,
}

/// Synthetic per-class tensors `image_dims x n_e x n_p` with the planted dictionary
/// and the planted codes of the training part.
pub struct SynthData {
    pub train: DenseTensor,
    pub test: Option<DenseTensor>,
    pub d: Matrix,
    pub x_train: Matrix,
}

pub fn synth_data(
    image_dims: &[usize],
    k: usize,
    n_train: usize,
    n_test: usize,
    classes: usize,
    seed: u64,
) -> Result<SynthData, CliError> {
    let n: usize = image_dims.iter().product();
    let n_e = n_train + n_test;
    let inst = synth_class_instance(n, k, n_e, classes, seed)?;
    let mut shape = image_dims.to_vec();
    shape.extend([n_e, classes]);
    let full = DenseTensor::new(shape, inst.y.as_slice().to_vec())?;
    let codes = DenseTensor::new(vec![k, n_e, classes], inst.x.as_slice().to_vec())?;
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..n_e).collect();
    let x_train = select_expressions(&codes, &train_idx)?.unfold(1)?;
    Ok(SynthData {
        train: select_expressions(&full, &train_idx)?,
        test: if n_test > 0 { Some(select_expressions(&full, &test_idx)?) } else { None },
        d: inst.d,
        x_train,
    })
}

/// Pixel-by-sample matrix of a per-class tensor.
fn columns(t: &DenseTensor) -> Result<Matrix, CliError> {
    Ok(t.unfold(t.order() - 2)?)
}

fn per_class_shape(t: &DenseTensor, what: &str) -> Result<(Vec<usize>, usize, usize), CliError> {
    let s = t.shape();
    if s.len() < 3 {
        return Err(CliError::Config(format!(
            "{what} tensor must be image modes x expressions x classes, got shape {s:?}"
        )));
    }
    let r = s.len();
    Ok((s[..r - 2].to_vec(), s[r - 2], s[r - 1]))
}

fn read_input(path: &Path) -> Result<DenseTensor, CliError> {
    read_tensor(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Loads the configured data and records the shapes it determines in `s`.
pub fn load(s: &mut DataSettings) -> Result<Dataset, CliError> {
    let (native_dims, train, test) = match s.source {
        Source::Synth => {
            let sd = synth_data(&s.image_dims, s.k, s.n_train, s.n_test, s.classes, s.seed)?;
            (s.image_dims.clone(), sd.train, sd.test)
        }
        Source::Mnist => {
            let dir = s.data.clone().ok_or_else(|| {
                CliError::Config("mnist source needs --data DIR or DL_DATA_DIR".into())
            })?;
            let target = (s.resize[0], s.resize[1]);
            let load_part = |train: bool, n_e: usize| -> Result<DenseTensor, CliError> {
                let set = load_mnist(&dir, train)?;
                let small = downsample(&set.images, target)?;
                Ok(to_class_tensor(&small, &set.labels, n_e, s.classes)?.0)
            };
            let train = load_part(true, s.n_train)?;
            let test = if s.n_test > 0 { Some(load_part(false, s.n_test)?) } else { None };
            (s.resize.clone(), train, test)
        }
        Source::Tensor => {
            let path = s.input.clone().ok_or_else(|| CliError::Config("tensor source needs --input FILE".into()))?;
            let full = read_input(&path)?;
            let (dims, _, classes) = per_class_shape(&full, "input")?;
            s.classes = classes;
            match &s.test_input {
                Some(tp) => {
                    let test = read_input(tp)?;
                    let (tdims, _, tclasses) = per_class_shape(&test, "test")?;
                    if tdims.iter().product::<usize>() != dims.iter().product::<usize>() || tclasses != classes {
                        return Err(CliError::Config(format!(
                            "test tensor {:?} does not match training tensor {:?}",
                            test.shape(),
                            full.shape()
                        )));
                    }
                    (dims, full, Some(test))
                }
                None => {
                    let split = split_train_test(&full, SplitSpec { train_fraction: s.train_fraction, seed: s.seed })?;
                    (dims, split.train, Some(split.test))
                }
            }
        }
    };

    let n: usize = native_dims.iter().product();
    if !s.image_dims_given {
        s.image_dims = native_dims;
    } else if s.image_dims.iter().product::<usize>() != n {
        return Err(CliError::Config(format!(
            "--image-dims {:?} do not factor the {n} pixels of the data",
            s.image_dims
        )));
    }
    let (_, n_train, classes) = per_class_shape(&train, "training")?;
    s.n_train = n_train;
    s.classes = classes;
    let (test, test_labels) = match test {
        Some(t) => {
            let (_, n_test, _) = per_class_shape(&t, "test")?;
            s.n_test = n_test;
            (columns(&t)?, class_labels(n_test, classes))
        }
        None => {
            s.n_test = 0;
            (Matrix::zeros(n, 0), Vec::new())
        }
    };
    Ok(Dataset {
        image_dims: s.image_dims.clone(),
        train: columns(&train)?,
        train_labels: class_labels(n_train, classes),
        test,
        test_labels,
    })
}
