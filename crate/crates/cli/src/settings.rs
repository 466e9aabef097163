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

//! Resolution of flags, config file and preset defaults into complete settings.

use std::path::PathBuf;
use std::str::FromStr;

use palm_dl::dl_matrix::BlockOrder;
use palm_dl::palm::{BlockParams, SolverConfig, StopRule, Variant};
use palm_dl::presets::{self, Preset};
use serde::Serialize;

use crate::config::{FileConfig, UsizeList};
use crate::{CliError, DataArgs, TrainArgs};

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Matrix,
    Tt3,
    Tt4,
}

impl Formulation {
    /// Number of TT image cores, `None` for the plain matrix model.
    pub fn image_modes(self) -> Option<usize> {
        match self {
            Formulation::Matrix => None,
            Formulation::Tt3 => Some(2),
            Formulation::Tt4 => Some(3),
        }
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Matrix => "matrix",
            Formulation::Tt3 => "tt3",
            Formulation::Tt4 => "tt4",
        })
    }
}

impl FromStr for Formulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "matrix" => Ok(Formulation::Matrix),
            "tt3" => Ok(Formulation::Tt3),
            "tt4" => Ok(Formulation::Tt4),
            _ => Err(format!("unknown formulation '{s}' (matrix, tt3, tt4)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synth,
    Mnist,
    Tensor,
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "synth" | "synthetic" => Ok(Source::Synth),
            "mnist" | "idx" => Ok(Source::Mnist),
            "tensor" => Ok(Source::Tensor),
            _ => Err(format!("unknown source '{s}' (synth, mnist, tensor)")),
        }
    }
}

fn preset_source(p: &Preset) -> Source {
    match p.name {
        "mnist-desk" => Source::Mnist,
        "mit" => Source::Tensor,
        _ => Source::Synth,
    }
}

pub fn load_preset(name: Option<String>) -> Result<Preset, CliError> {
    let name = name.unwrap_or_else(|| "synthetic".into());
    presets::by_name(&name).ok_or_else(|| config_err(format!("unknown preset '{name}' (synthetic, mnist-desk, mit)")))
}

/// Dataset and model shape after defaults. Fields the data itself determines are
/// overwritten once it is loaded.
#[derive(Debug, Clone, Serialize)]
pub struct DataSettings {
    pub preset: String,
    pub source: Source,
    pub data: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub test_input: Option<PathBuf>,
    pub train_fraction: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub classes: usize,
    pub resize: Vec<usize>,
    pub image_dims: Vec<usize>,
    pub formulation: Formulation,
    pub k: usize,
    pub tau: usize,
    pub ranks: Vec<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    #[serde(skip)]
    pub image_dims_given: bool,
    #[serde(skip)]
    pub requested_ranks: Option<Vec<usize>>,
    #[serde(skip)]
    pub preset_ranks: Vec<usize>,
    #[serde(skip)]
    pub tau_given: bool,
}

pub fn resolve_data(a: DataArgs, f: &mut FileConfig) -> Result<DataSettings, CliError> {
    let preset = load_preset(f.pick("preset", a.preset)?)?;
    let source = f
        .pick::<Source>("source", a.source.map(|s| s.parse()).transpose().map_err(config_err)?)?
        .unwrap_or_else(|| preset_source(&preset));
    let data = f
        .pick("data", a.data)?
        .or_else(|| std::env::var_os("DL_DATA_DIR").map(PathBuf::from));
    let input = f.pick("input", a.input)?;
    let test_input = f.pick("test-input", a.test_input)?;
    let train_fraction = f.pick("train-fraction", a.train_fraction)?.unwrap_or(0.75);
    let n_train = f.pick("n-train", a.n_train)?.unwrap_or(preset.n_train);
    let n_test = f.pick("n-test", a.n_test)?.unwrap_or(preset.n_test);
    let classes = f.pick("classes", a.classes)?.unwrap_or(preset.n_classes);
    let resize = f.pick::<UsizeList>("resize", a.resize)?.map(|l| l.0);
    let image_dims = f.pick::<UsizeList>("image-dims", a.image_dims)?.map(|l| l.0);
    let formulation = f
        .pick::<Formulation>("formulation", a.formulation.map(|s| s.parse()).transpose().map_err(config_err)?)?
        .unwrap_or(Formulation::Matrix);
    let k = f.pick("k", a.k)?.unwrap_or(preset.k);
    let tau_flag = f.pick("tau", a.tau)?;
    let ranks = f.pick::<UsizeList>("ranks", a.ranks)?.map(|l| l.0);
    let seed = f.pick("seed", a.seed)?.unwrap_or(0);
    let out = f.pick("out", a.out)?.unwrap_or_else(|| PathBuf::from("out"));
    let threads = f.pick("threads", a.threads)?.unwrap_or(1);

    if threads == 0 {
        return Err(config_err("--threads must be at least 1"));
    }
    if k == 0 || n_train == 0 || classes == 0 {
        return Err(config_err("k, n-train and classes must be positive"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(config_err(format!("--train-fraction must lie in (0,1), got {train_fraction}")));
    }
    let resize = resize.unwrap_or_else(|| preset.image_dims.clone());
    if source == Source::Mnist && resize.len() != 2 {
        return Err(config_err(format!("--resize needs two extents, got {resize:?}")));
    }
    if let Some(d) = &image_dims {
        if d.is_empty() || d.contains(&0) {
            return Err(config_err(format!("bad --image-dims {d:?}")));
        }
    }
    Ok(DataSettings {
        preset: preset.name.to_string(),
        source,
        data,
        input,
        test_input,
        train_fraction,
        n_train,
        n_test,
        classes,
        image_dims_given: image_dims.is_some(),
        image_dims: image_dims.unwrap_or_else(|| preset.image_dims.clone()),
        resize,
        formulation,
        k,
        tau: tau_flag.unwrap_or(preset.tau),
        tau_given: tau_flag.is_some(),
        ranks: Vec::new(),
        requested_ranks: ranks,
        preset_ranks: preset.ranks.clone(),
        seed,
        out,
        threads,
    })
}

impl DataSettings {
    /// TT ranks for the loaded image modes: the requested list, with `r1 = n1` prepended
    /// when one entry short, else the preset ranks when they fit.
    pub fn finalize_ranks(&mut self) -> Result<(), CliError> {
        let Some(q) = self.formulation.image_modes() else {
            self.ranks.clear();
            return Ok(());
        };
        if self.image_dims.len() != q {
            return Err(config_err(format!(
                "{} needs {q} image modes, data has {:?}; set --image-dims",
                self.formulation, self.image_dims
            )));
        }
        let ranks = match &self.requested_ranks {
            Some(r) if r.len() == q => r.clone(),
            Some(r) if r.len() + 1 == q => std::iter::once(self.image_dims[0]).chain(r.iter().copied()).collect(),
            Some(r) => return Err(config_err(format!("expected {q} ranks, got {r:?}"))),
            None if self.preset_ranks.len() == q => self.preset_ranks.clone(),
            None => return Err(config_err(format!("--ranks with {q} entries required"))),
        };
        self.ranks = ranks;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSettings {
    pub variant: String,
    pub max_iter: usize,
    pub stop_tol: Option<String>,
    pub block_order: String,
    pub init_model: Option<PathBuf>,
    pub eta: f64,
    pub mu: f64,
    pub rho: f64,
    pub delta: f64,
    pub alpha0: f64,
    pub xi: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_doublings: usize,
    pub max_halvings: usize,
}

pub fn resolve_solver(a: &TrainArgs, f: &mut FileConfig) -> Result<SolverSettings, CliError> {
    let base = SolverConfig::default();
    let bp = BlockParams::default();
    let variant: Variant = f
        .pick::<String>("variant", a.variant.clone())?
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(base.variant);
    let block_order = f.pick::<String>("block-order", a.block_order.clone())?.unwrap_or("dictionary-first".into());
    parse_block_order(&block_order)?;
    Ok(SolverSettings {
        variant: variant.name().to_string(),
        max_iter: f.pick("max-iter", a.max_iter)?.unwrap_or(base.max_iter),
        stop_tol: f.pick("stop-tol", a.stop_tol.clone())?,
        block_order,
        init_model: f.pick("init-model", a.init_model.clone())?,
        eta: f.pick("eta", a.eta)?.unwrap_or(bp.eta),
        mu: f.pick("mu", a.mu)?.unwrap_or(bp.mu),
        rho: f.pick("rho", a.rho)?.unwrap_or(bp.rho),
        delta: f.pick("delta", a.delta)?.unwrap_or(bp.delta),
        alpha0: f.pick("alpha0", a.alpha0)?.unwrap_or(bp.alpha0),
        xi: f.pick("xi", a.xi)?.unwrap_or(bp.xi),
        alpha_min: f.pick("alpha-min", a.alpha_min)?.unwrap_or(base.alpha_min),
        alpha_max: f.pick("alpha-max", a.alpha_max)?.unwrap_or(base.alpha_max),
        max_doublings: base.max_doublings,
        max_halvings: base.max_halvings,
    })
}

pub fn parse_block_order(s: &str) -> Result<BlockOrder, CliError> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "dictionary-first" | "d-first" => Ok(BlockOrder::DictionaryFirst),
        "codes-first" | "x-first" => Ok(BlockOrder::CodesFirst),
        _ => Err(config_err(format!("unknown block order '{s}' (dictionary-first, codes-first)"))),
    }
}

impl SolverSettings {
    /// Solver configuration for `p` blocks, validated.
    pub fn to_config(&self, p: usize, seed: u64) -> Result<SolverConfig, CliError> {
        let stop = match self.stop_tol.as_deref().map(str::trim) {
            None | Some("none") => StopRule::MaxIter,
            Some("default") => StopRule::IterateVariation(None),
            Some(list) => {
                let tols = list
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| config_err(format!("bad --stop-tol entry '{t}': {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let tols = match tols.len() {
                    1 => vec![tols[0]; p],
                    n if n == p => tols,
                    n => return Err(config_err(format!("{n} stop tolerances for {p} blocks"))),
                };
                if tols.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                    return Err(config_err("stop tolerances must be positive"));
                }
                StopRule::IterateVariation(Some(tols))
            }
        };
        let cfg = SolverConfig {
            variant: self.variant.parse()?,
            block_params: vec![BlockParams {
                eta: self.eta,
                mu: self.mu,
                rho: self.rho,
                delta: self.delta,
                alpha0: self.alpha0,
                xi: self.xi,
            }],
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            max_iter: self.max_iter,
            stop,
            seed,
            max_doublings: self.max_doublings,
            max_halvings: self.max_halvings,
        };
        cfg.validate(p)?;
        Ok(cfg)
    }
}
