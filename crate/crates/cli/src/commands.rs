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

//! The four subcommands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use palm_dl::classify::{build_label_matrix, classification_rate, omp_batch, predict, train_classifier, write_predictions_csv};
use palm_dl::dl_matrix::MatrixDLProblem;
use palm_dl::dl_tt::{memory_footprint, TtDlProblem};
use palm_dl::palm::{solve, SolveOutput};
use palm_dl::prox::max_column_nnz;
use palm_dl::tensor::{read_tensor, read_tensors, tt_reconstruct, tt_svd_with_report, write_tensor, write_tensors, DenseTensor};
use palm_dl::Matrix;
use serde_json::{json, Value};

use crate::config::{FileConfig, UsizeList};
use crate::dataset::{self, synth_data};
use crate::settings::{load_preset, parse_block_order, resolve_data, resolve_solver, Formulation};
use crate::{ClassifyArgs, CliError, SynthArgs, TrainArgs, TtsvdArgs};

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| config_err(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_model(path: &Path, blocks: &[Matrix]) -> Result<(), CliError> {
    let ts: Vec<DenseTensor> = blocks.iter().map(DenseTensor::from_matrix).collect();
    Ok(write_tensors(path, &ts)?)
}

/// Blocks of a model file as matrices.
fn read_model(path: &Path) -> Result<Vec<Matrix>, CliError> {
    let ts = read_tensors(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    ts.iter()
        .map(|t| match t.shape() {
            [r, c] => Ok(Matrix::from_column_slice(*r, *c, t.data())),
            s => Err(config_err(format!("{}: model block of shape {s:?} is not a matrix", path.display()))),
        })
        .collect()
}

fn joined(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut file = FileConfig::load(a.data.config.as_deref())?;
    let mut ds = resolve_data(a.data.clone(), &mut file)?;
    let solver = resolve_solver(&a, &mut file)?;
    file.finish()?;
    let data = dataset::load(&mut ds)?;
    ds.finalize_ranks()?;
    let (n, samples) = data.train.shape();
    let init_model = solver.init_model.as_deref().map(read_model).transpose()?;

    let start = Instant::now();
    let (out, model, tt_memory): (SolveOutput, Vec<Matrix>, Option<usize>) = match ds.formulation {
        Formulation::Matrix => {
            let order = parse_block_order(&solver.block_order)?;
            let prob = MatrixDLProblem::new(data.train, ds.k, ds.tau)?.with_order(order);
            let init = match init_model {
                Some(m) if m.len() == 2 => prob.blocks(m[0].clone(), m[1].clone()),
                Some(m) => return Err(config_err(format!("matrix model needs 2 blocks, file has {}", m.len()))),
                None => prob.init_blocks(ds.seed),
            };
            let cfg = solver.to_config(2, ds.seed)?;
            let out = solve(&prob, &cfg, init)?;
            let (d, x) = prob.split(&out.blocks);
            let model = vec![d.clone(), x.clone()];
            (out, model, None)
        }
        Formulation::Tt3 | Formulation::Tt4 => {
            let mut shape = data.image_dims.clone();
            shape.push(samples);
            let y = DenseTensor::new(shape, data.train.as_slice().to_vec())?;
            let prob = TtDlProblem::new(&y, ds.k, ds.tau, ds.ranks.clone())?;
            let p = prob.x_index() + 1;
            let init = match init_model {
                Some(m) if m.len() == p => m,
                Some(m) => return Err(config_err(format!("TT model needs {p} blocks, file has {}", m.len()))),
                None => prob.init_blocks(ds.seed)?,
            };
            let cfg = solver.to_config(p, ds.seed)?;
            let out = solve(&prob, &cfg, init)?;
            let model = out.blocks.clone();
            (out, model, Some(prob.memory_footprint().tt))
        }
    };
    let wall = start.elapsed().as_secs_f64();

    prepare_out(&ds.out)?;
    let trace = &out.trace;
    trace.write_csv(BufWriter::new(File::create(ds.out.join("trace.csv"))?))?;
    write_model(&ds.out.join("model.bin"), &model)?;
    let plain = memory_footprint(&data.image_dims, &[], ds.k, ds.tau, samples).plain;
    let summary = json!({
        "command": "train",
        "formulation": ds.formulation,
        "variant": solver.variant,
        "seed": ds.seed,
        "final_h": trace.final_h(),
        "iterations": trace.iterations(),
        "stop_reason": trace.stop_reason.name(),
        "wall_time_s": wall,
        "pixels": n,
        "samples": samples,
        "memory": { "plain": plain, "tt": tt_memory },
        "config": { "data": ds, "solver": solver },
    });
    write_json(&ds.out.join("summary.json"), &summary)?;
    println!(
        "{} {}: final H {:.6e} after {} iterations ({}), {wall:.2}s",
        solver.variant,
        ds.formulation,
        trace.final_h(),
        trace.iterations(),
        trace.stop_reason.name()
    );
    match tt_memory {
        Some(tt) => println!("memory: plain {plain}, tt {tt} (ranks {})", joined(&ds.ranks)),
        None => println!("memory: plain {plain}"),
    }
    Ok(())
}

/// Image extents and ranks encoded in the cores of a TT model.
fn tt_layout(cores: &[Matrix]) -> Result<(Vec<usize>, Vec<usize>), CliError> {
    let mut dims = Vec::new();
    let mut ranks = Vec::new();
    let mut prev = 1;
    for (j, c) in cores.iter().enumerate() {
        if c.nrows() % prev != 0 {
            return Err(config_err(format!("TT core {} has {} rows, not a multiple of {prev}", j + 1, c.nrows())));
        }
        dims.push(c.nrows() / prev);
        ranks.push(c.ncols());
        prev = c.ncols();
    }
    Ok((dims, ranks))
}

pub fn classify(a: ClassifyArgs) -> Result<(), CliError> {
    let mut file = FileConfig::load(a.data.config.as_deref())?;
    let mut ds = resolve_data(a.data.clone(), &mut file)?;
    let model_path: PathBuf = file
        .pick("model", a.model.clone())?
        .ok_or_else(|| config_err("--model FILE required"))?;
    let beta = file.pick("beta", a.beta)?.unwrap_or(0.0);
    let test_tau = file.pick("test-tau", a.test_tau)?;
    let eval = file.pick::<String>("eval", a.eval.clone())?.unwrap_or_else(|| "test".into());
    file.finish()?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(config_err(format!("--beta must be nonnegative, got {beta}")));
    }
    if eval != "test" && eval != "train" {
        return Err(config_err(format!("--eval must be test or train, got '{eval}'")));
    }
    let blocks = read_model(&model_path)?;
    let data = dataset::load(&mut ds)?;
    let (n, samples) = data.train.shape();

    let (d, formulation) = match blocks.len() {
        2 => (blocks[0].clone(), Formulation::Matrix),
        p @ 4..=5 => {
            let q = p - 2;
            let (dims, ranks) = tt_layout(&blocks[..q])?;
            if dims.iter().product::<usize>() != n {
                return Err(config_err(format!("model image modes {dims:?} do not match {n} data pixels")));
            }
            let mut shape = dims.clone();
            shape.push(samples);
            let y = DenseTensor::new(shape, data.train.as_slice().to_vec())?;
            let prob = TtDlProblem::new(&y, blocks[q].ncols(), 1, ranks.clone())?;
            ds.image_dims = dims;
            ds.ranks = ranks;
            let f = if q == 2 { Formulation::Tt3 } else { Formulation::Tt4 };
            (prob.materialize_dictionary(&blocks)?, f)
        }
        p => return Err(config_err(format!("model with {p} blocks is neither matrix nor TT"))),
    };
    ds.formulation = formulation;
    let x = blocks.last().unwrap();
    if d.nrows() != n {
        return Err(config_err(format!("model dictionary has {} rows, data has {n} pixels", d.nrows())));
    }
    if x.nrows() != d.ncols() || x.ncols() != samples {
        return Err(config_err(format!(
            "model codes are {}x{}, expected {}x{samples} for the training data",
            x.nrows(),
            x.ncols(),
            d.ncols()
        )));
    }
    let train_tau = if ds.tau_given { ds.tau } else { max_column_nnz(x).max(1) };
    ds.tau = train_tau;
    ds.k = d.ncols();
    let test_tau = test_tau.unwrap_or(train_tau);
    if test_tau == 0 {
        return Err(config_err("--test-tau must be positive"));
    }

    let c = build_label_matrix(&data.train_labels, ds.classes)?;
    let w = train_classifier(x, &c, beta)?;
    let (ys, truth) = if eval == "train" {
        (&data.train, &data.train_labels)
    } else {
        (&data.test, &data.test_labels)
    };
    if ys.ncols() == 0 {
        return Err(config_err(format!("no {eval} samples to classify")));
    }
    let codes = omp_batch(&d, ys, test_tau, ds.threads)?;
    let predicted = predict(&w.w, &codes);
    let rate = classification_rate(&predicted, truth)?;
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();

    prepare_out(&ds.out)?;
    write_predictions_csv(BufWriter::new(File::create(ds.out.join("predictions.csv"))?), truth, &predicted)?;
    let report = json!({
        "command": "classify",
        "model": model_path,
        "formulation": formulation,
        "eval": eval,
        "rate": rate,
        "correct": correct,
        "total": truth.len(),
        "beta": beta,
        "test_tau": test_tau,
        "config": ds,
    });
    write_json(&ds.out.join("classification.json"), &report)?;
    println!("classification rate {rate:.4} ({correct}/{})", truth.len());
    Ok(())
}

pub fn ttsvd(a: TtsvdArgs) -> Result<(), CliError> {
    let mut file = FileConfig::load(a.config.as_deref())?;
    let input: PathBuf = file.pick("input", a.input)?.ok_or_else(|| config_err("--input FILE required"))?;
    let ranks = file.pick::<UsizeList>("ranks", a.ranks)?.map(|l| l.0);
    let tol = file.pick("tol", a.tol)?;
    let out: PathBuf = file.pick("out", a.out)?.unwrap_or_else(|| PathBuf::from("out"));
    file.finish()?;
    if let Some(r) = &ranks {
        if r.contains(&0) {
            return Err(config_err(format!("ranks must be positive, got {r:?}")));
        }
    }
    if let Some(t) = tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(config_err(format!("--tol must be nonnegative, got {t}")));
        }
    }
    let t = read_tensor(&input).map_err(|e| config_err(format!("{}: {e}", input.display())))?;
    let (cores, report) = tt_svd_with_report(&t, ranks.as_deref(), tol)?;
    let rec = tt_reconstruct(&cores)?;
    let abs: f64 = rec.data().iter().zip(t.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm = t.frobenius_norm();
    let rel = if norm > 0.0 { abs / norm } else { abs };

    prepare_out(&out)?;
    write_tensors(out.join("cores.bin"), cores.cores())?;
    let summary = json!({
        "command": "ttsvd",
        "input": input,
        "shape": t.shape(),
        "requested_ranks": ranks,
        "tol": tol,
        "ranks": cores.ranks(),
        "clipped": report.clipped,
        "discarded": report.discarded,
        "error_bound": report.error_bound(),
        "absolute_error": abs,
        "relative_error": rel,
        "storage": cores.storage(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("ranks {}", joined(cores.ranks()));
    println!("relative error {rel:.3e} (bound {:.3e})", report.error_bound() / norm.max(f64::MIN_POSITIVE));
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut file = FileConfig::load(a.config.as_deref())?;
    let preset = load_preset(file.pick("preset", a.preset)?)?;
    let image_dims = file.pick::<UsizeList>("image-dims", a.image_dims)?.map(|l| l.0).unwrap_or(preset.image_dims.clone());
    let k = file.pick("k", a.k)?.unwrap_or(preset.k);
    let n_train = file.pick("n-train", a.n_train)?.unwrap_or(preset.n_train);
    let n_test = file.pick("n-test", a.n_test)?.unwrap_or(preset.n_test);
    let classes = file.pick("classes", a.classes)?.unwrap_or(preset.n_classes);
    let seed = file.pick("seed", a.seed)?.unwrap_or(0);
    let out: PathBuf = file.pick("out", a.out)?.unwrap_or_else(|| PathBuf::from("out"));
    file.finish()?;
    if image_dims.is_empty() || image_dims.contains(&0) || n_train == 0 {
        return Err(config_err("image extents and --n-train must be positive"));
    }
    let sd = synth_data(&image_dims, k, n_train, n_test, classes, seed)?;
    prepare_out(&out)?;
    write_tensor(out.join("train.bin"), &sd.train)?;
    if let Some(t) = &sd.test {
        write_tensor(out.join("test.bin"), t)?;
    }
    write_model(&out.join("truth.bin"), &[sd.d, sd.x_train])?;
    let summary = json!({
        "command": "synth",
        "preset": preset.name,
        "image_dims": image_dims,
        "k": k,
        "n_train": n_train,
        "n_test": n_test,
        "classes": classes,
        "seed": seed,
        "train_shape": sd.train.shape(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("wrote {}", out.display());
    Ok(())
}
