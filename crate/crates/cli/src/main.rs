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

//! `dl`: train, evaluate and inspect dictionary learning models.

mod commands;
mod config;
mod dataset;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::UsizeList;

#[derive(Debug, Parser)]
#[command(name = "dl", version, about = "Dictionary learning with PALM-type solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a dictionary and sparse codes, writing trace.csv, model.bin and summary.json.
    Train(TrainArgs),
    /// Classify samples with a trained model, writing predictions.csv and classification.json.
    Classify(ClassifyArgs),
    /// TT-decompose a tensor file, writing cores.bin and summary.json.
    Ttsvd(TtsvdArgs),
    /// Write a labeled synthetic dataset and its planted model.
    Synth(SynthArgs),
}

/// Dataset, problem shape and output flags shared by `train` and `classify`.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Named preset supplying defaults: synthetic, mnist-desk, mit.
    #[arg(long)]
    pub preset: Option<String>,
    /// Data source: synth, mnist or tensor.
    #[arg(long)]
    pub source: Option<String>,
    /// Directory with IDX files (also DL_DATA_DIR).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Training tensor file (image modes x expressions x classes).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Test tensor file; without it the input is split by expression.
    #[arg(long)]
    pub test_input: Option<PathBuf>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Training samples per class.
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Test samples per class.
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Image size h,w that IDX images are area-averaged to.
    #[arg(long)]
    pub resize: Option<UsizeList>,
    /// Factorization of the pixel mode into image modes, e.g. 2,3,2.
    #[arg(long)]
    pub image_dims: Option<UsizeList>,
    /// matrix, tt3 or tt4.
    #[arg(long)]
    pub formulation: Option<String>,
    /// Number of atoms.
    #[arg(long)]
    pub k: Option<usize>,
    /// Nonzeros per code column.
    #[arg(long)]
    pub tau: Option<usize>,
    /// TT ranks r1,r2[,r3]; with one entry fewer, r1 defaults to n1.
    #[arg(long)]
    pub ranks: Option<UsizeList>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Threads for per-sample sparse coding (1 keeps runs bit-reproducible).
    #[arg(long)]
    pub threads: Option<usize>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// palm, palm-bt, ipalm, ipalm-bt or spalm.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stop on small iterate variation: `default` or per-block tolerances t1[,t2,..].
    #[arg(long)]
    pub stop_tol: Option<String>,
    /// dictionary-first or codes-first (matrix formulation).
    #[arg(long)]
    pub block_order: Option<String>,
    /// Start from the blocks of a model file.
    #[arg(long)]
    pub init_model: Option<PathBuf>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Ridge weight of the linear classifier (0 uses the pseudo-inverse).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Sparsity of the test codes; defaults to the training sparsity.
    #[arg(long)]
    pub test_tau: Option<usize>,
    /// Which samples to classify: test or train.
    #[arg(long)]
    pub eval: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TtsvdArgs {
    /// Tensor file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Rank caps r1,..,r_{N-1}.
    #[arg(long)]
    pub ranks: Option<UsizeList>,
    /// Relative accuracy for rank selection.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub image_dims: Option<UsizeList>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<palm_dl::Error> for CliError {
    fn from(e: palm_dl::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Classify(a) => commands::classify(a),
        Command::Ttsvd(a) => commands::ttsvd(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
