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

//! Block-coordinate proximal gradient solvers over a generic multi-block objective.
//!
//! Every variant performs a Gauss-Seidel sweep over the blocks: block `i` sees the
//! already-updated blocks `0..i` and the previous values of blocks `i+1..p`.

use std::io::Write;
use std::time::Instant;

use crate::linalg::{frob_dist_sq, frob_dot, frob_norm_sq};
use crate::prox::{prox_indicator, FeasibleSet};
use crate::{Error, Matrix, Result};

/// A smooth coupling term `H` over `p` matrix blocks, each constrained to a feasible set.
pub trait BlockObjective: Sync {
    fn block_count(&self) -> usize;

    /// `(rows, cols)` of block `i`.
    fn block_shape(&self, i: usize) -> (usize, usize);

    fn feasible_set(&self, i: usize) -> FeasibleSet;

    /// `H(blocks)`.
    fn value(&self, blocks: &[Matrix]) -> f64;

    /// `H` as a function of block `i` alone. Must agree with [`value`](Self::value) on
    /// feasible points and be exact in block `i` whenever the other blocks are feasible.
    fn block_value(&self, i: usize, blocks: &[Matrix]) -> f64 {
        let _ = i;
        self.value(blocks)
    }

    /// Partial gradient of `H` with respect to block `i`.
    fn partial_grad(&self, i: usize, blocks: &[Matrix]) -> Matrix;

    /// `grad_i H(.., new, ..) - grad_i H(.., blocks[i], ..)` with all other blocks fixed.
    fn grad_difference(&self, i: usize, blocks: &[Matrix], new: &Matrix) -> Matrix {
        let old = self.partial_grad(i, blocks);
        let mut swapped = blocks.to_vec();
        swapped[i] = new.clone();
        self.partial_grad(i, &swapped) - old
    }

    /// Proximal map of block `i`'s constraint.
    fn prox(&self, i: usize, point: &Matrix, stepsize: f64) -> Result<Matrix> {
        prox_indicator(self.feasible_set(i), point, stepsize)
    }

    fn is_feasible(&self, i: usize, block: &Matrix) -> bool {
        self.feasible_set(i).contains(block)
    }

    /// Global Lipschitz constant of `grad_i H` given the other blocks, if known.
    fn lipschitz(&self, i: usize, blocks: &[Matrix]) -> Option<f64> {
        let _ = (i, blocks);
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Constant stepsize from the exact Lipschitz constants.
    Palm,
    /// Lipschitz estimates found by doubling, halved after each accepted step.
    PalmBt,
    /// Inertial steps with constant stepsize.
    Ipalm,
    /// Inertial steps with backtracked Lipschitz estimates.
    IpalmBt,
    /// Barzilai-Borwein stepsizes safeguarded by Armijo backtracking.
    Spalm,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Palm,
        Variant::PalmBt,
        Variant::Ipalm,
        Variant::IpalmBt,
        Variant::Spalm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Palm => "palm",
            Variant::PalmBt => "palm-bt",
            Variant::Ipalm => "ipalm",
            Variant::IpalmBt => "ipalm-bt",
            Variant::Spalm => "spalm",
        }
    }

    pub fn needs_lipschitz(&self) -> bool {
        matches!(self, Variant::Palm | Variant::Ipalm)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown solver variant '{s}'")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-block hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParams {
    /// Lipschitz inflation, at least 1.
    pub eta: f64,
    /// Lipschitz floor, positive.
    pub mu: f64,
    /// Backtracking contraction in (0, 1).
    pub rho: f64,
    /// Armijo constant in (0, 1).
    pub delta: f64,
    /// Initial spectral stepsize.
    pub alpha0: f64,
    /// Inertial weight, nonnegative.
    pub xi: f64,
}

impl Default for BlockParams {
    fn default() -> Self {
        Self {
            eta: 1.0,
            mu: 1e-10,
            rho: 0.5,
            delta: 1e-4,
            alpha0: 1.0,
            xi: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopRule {
    /// Run exactly `max_iter` iterations.
    MaxIter,
    /// Stop once every block moved by at most its tolerance. `None` uses
    /// [`default_tolerance`] for each block.
    IterateVariation(Option<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    /// One entry per block, or a single entry shared by all blocks.
    pub block_params: Vec<BlockParams>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_iter: usize,
    pub stop: StopRule,
    /// Recorded in the trace; the solvers themselves are deterministic.
    pub seed: u64,
    /// Maximum doublings of a Lipschitz estimate within one block update.
    pub max_doublings: usize,
    /// Maximum stepsize contractions within one block update.
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Spalm,
            block_params: vec![BlockParams::default()],
            alpha_min: 1e-10,
            alpha_max: 1e10,
            max_iter: 50,
            stop: StopRule::MaxIter,
            seed: 0,
            max_doublings: 60,
            max_halvings: 200,
        }
    }
}

impl SolverConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn params(&self, i: usize) -> &BlockParams {
        if self.block_params.len() == 1 {
            &self.block_params[0]
        } else {
            &self.block_params[i]
        }
    }

    pub fn validate(&self, blocks: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.block_params.len() != 1 && self.block_params.len() != blocks {
            return bad(format!(
                "{} block parameter sets for {blocks} blocks",
                self.block_params.len()
            ));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite())
        {
            return bad(format!(
                "need 0 < alpha_min <= alpha_max, got {} and {}",
                self.alpha_min, self.alpha_max
            ));
        }
        for (i, p) in self.block_params.iter().enumerate() {
            if !(p.eta >= 1.0 && p.eta.is_finite()) {
                return bad(format!("block {i}: eta must be >= 1, got {}", p.eta));
            }
            if !(p.mu > 0.0 && p.mu.is_finite()) {
                return bad(format!("block {i}: mu must be positive, got {}", p.mu));
            }
            if !(p.rho > 0.0 && p.rho < 1.0) {
                return bad(format!("block {i}: rho must lie in (0,1), got {}", p.rho));
            }
            if !(p.delta > 0.0 && p.delta < 1.0) {
                return bad(format!("block {i}: delta must lie in (0,1), got {}", p.delta));
            }
            if !(p.alpha0 >= self.alpha_min && p.alpha0 <= self.alpha_max) {
                return bad(format!(
                    "block {i}: alpha0 {} outside [alpha_min, alpha_max]",
                    p.alpha0
                ));
            }
            if !(p.xi >= 0.0 && p.xi.is_finite()) {
                return bad(format!("block {i}: xi must be nonnegative, got {}", p.xi));
            }
        }
        if let StopRule::IterateVariation(Some(t)) = &self.stop {
            if t.len() != blocks {
                return bad(format!("{} stop tolerances for {blocks} blocks", t.len()));
            }
            if t.iter().any(|&x| !(x >= 0.0)) {
                return bad("stop tolerances must be nonnegative".into());
            }
        }
        Ok(())
    }
}

/// One row of the trace. Row 0 describes the (projected) starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub h: f64,
    pub residual: f64,
    pub time_s: f64,
    pub alpha: Vec<f64>,
    pub backtracks: Vec<usize>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIter,
    /// Every block moved less than its tolerance.
    IterateVariation,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::MaxIter => "max_iter",
            StopReason::IterateVariation => "iterate_variation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub variant: Variant,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl IterationTrace {
    pub fn final_h(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.h)
    }

    /// Completed iterations, not counting row 0.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn h_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let p = self.records.first().map_or(0, |r| r.alpha.len());
        let mut header = String::from("iter,H,residual,time_s");
        for name in ["alpha", "backtracks", "delta"] {
            for i in 1..=p {
                header.push_str(&format!(",{name}_{i}"));
            }
        }
        writeln!(w, "{header}")?;
        for r in &self.records {
            let mut line = format!(
                "{},{:.16e},{:.16e},{:.16e}",
                r.iter, r.h, r.residual, r.time_s
            );
            for a in &r.alpha {
                line.push_str(&format!(",{a:.16e}"));
            }
            for b in &r.backtracks {
                line.push_str(&format!(",{b}"));
            }
            for d in &r.delta {
                line.push_str(&format!(",{d:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Raw quantities of one spectral stepsize computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbInfo {
    pub ss: f64,
    pub sg: f64,
    pub gg: f64,
    /// The stepsize for the next iteration after clamping.
    pub next_alpha: f64,
}

impl BbInfo {
    pub fn bb1(&self) -> f64 {
        self.ss / self.sg
    }

    pub fn bb2(&self) -> f64 {
        self.sg / self.gg
    }
}

/// Everything about one accepted block update, passed to the observer.
pub struct BlockStep<'a> {
    pub iter: usize,
    pub block: usize,
    /// Block state right after the update.
    pub blocks: &'a [Matrix],
    /// Block `block` before the update.
    pub previous: &'a Matrix,
    pub stepsize: f64,
    pub backtracks: usize,
    pub bb: Option<BbInfo>,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub blocks: Vec<Matrix>,
    pub trace: IterationTrace,
}

/// `1e-3 * sqrt(rows * cols)`.
pub fn default_tolerance(shape: (usize, usize)) -> f64 {
    1e-3 * ((shape.0 * shape.1) as f64).sqrt()
}

/// True iff `||blocks_i - prev_i||_F <= tols_i` for every block.
pub fn check_stop(prev: &[Matrix], blocks: &[Matrix], tols: &[f64]) -> bool {
    prev.iter()
        .zip(blocks)
        .zip(tols)
        .all(|((a, b), &t)| frob_dist_sq(a, b).sqrt() <= t)
}

/// Spectral stepsize: BB1 on odd `k`, BB2 on even `k`, clamped, or exactly 1 if `<s,g> <= 0`.
pub fn bb_stepsize(s: &[f64], g: &[f64], k: usize, alpha_min: f64, alpha_max: f64) -> f64 {
    bb_info(s, g, k, alpha_min, alpha_max).next_alpha
}

fn bb_info(s: &[f64], g: &[f64], k: usize, alpha_min: f64, alpha_max: f64) -> BbInfo {
    debug_assert_eq!(s.len(), g.len());
    let dot = crate::linalg::dot;
    let (ss, sg, gg) = (dot(s, s), dot(s, g), dot(g, g));
    let next_alpha = if sg > 0.0 {
        let raw = if k % 2 == 1 { ss / sg } else { sg / gg };
        raw.clamp(alpha_min, alpha_max)
    } else {
        1.0
    };
    BbInfo {
        ss,
        sg,
        gg,
        next_alpha,
    }
}

pub fn solve(obj: &dyn BlockObjective, cfg: &SolverConfig, init: Vec<Matrix>) -> Result<SolveOutput> {
    solve_observed(obj, cfg, init, &mut |_| {})
}

pub fn run_palm(obj: &dyn BlockObjective, cfg: &SolverConfig, init: Vec<Matrix>) -> Result<SolveOutput> {
    solve(obj, &with_variant(cfg, Variant::Palm), init)
}

pub fn run_palm_bt(obj: &dyn BlockObjective, cfg: &SolverConfig, init: Vec<Matrix>) -> Result<SolveOutput> {
    solve(obj, &with_variant(cfg, Variant::PalmBt), init)
}

pub fn run_ipalm(obj: &dyn BlockObjective, cfg: &SolverConfig, init: Vec<Matrix>) -> Result<SolveOutput> {
    solve(obj, &with_variant(cfg, Variant::Ipalm), init)
}

pub fn run_spalm(obj: &dyn BlockObjective, cfg: &SolverConfig, init: Vec<Matrix>) -> Result<SolveOutput> {
    solve(obj, &with_variant(cfg, Variant::Spalm), init)
}

fn with_variant(cfg: &SolverConfig, variant: Variant) -> SolverConfig {
    SolverConfig {
        variant,
        ..cfg.clone()
    }
}

/// Relative slack on the backtracking descent test, covering rounding when it is tight.
const BT_SLACK: f64 = 1e-12;

/// Runs the configured variant, calling `observer` after every accepted block update.
pub fn solve_observed(
    obj: &dyn BlockObjective,
    cfg: &SolverConfig,
    init: Vec<Matrix>,
    observer: &mut dyn FnMut(&BlockStep<'_>),
) -> Result<SolveOutput> {
    let p = obj.block_count();
    cfg.validate(p)?;
    if init.len() != p {
        return Err(Error::Shape(format!("{} initial blocks for {p} blocks", init.len())));
    }
    let mut blocks = init;
    for (i, b) in blocks.iter_mut().enumerate() {
        if b.shape() != obj.block_shape(i) {
            return Err(Error::Shape(format!(
                "block {i} is {:?}, expected {:?}",
                b.shape(),
                obj.block_shape(i)
            )));
        }
        if !obj.is_feasible(i, b) {
            *b = obj.prox(i, b, 1.0)?;
        }
    }
    let tols: Option<Vec<f64>> = match &cfg.stop {
        StopRule::MaxIter => None,
        StopRule::IterateVariation(Some(t)) => Some(t.clone()),
        StopRule::IterateVariation(None) => {
            Some((0..p).map(|i| default_tolerance(obj.block_shape(i))).collect())
        }
    };

    let start = Instant::now();
    let h0 = obj.value(&blocks);
    if !h0.is_finite() {
        return Err(Error::NonFinite { iter: 0 });
    }
    let mut records = vec![IterationRecord {
        iter: 0,
        h: h0,
        residual: h0.max(0.0).sqrt(),
        time_s: start.elapsed().as_secs_f64(),
        alpha: vec![0.0; p],
        backtracks: vec![0; p],
        delta: vec![0.0; p],
    }];

    let mut state = State {
        lips: vec![1.0; p],
        alphas: (0..p).map(|i| cfg.params(i).alpha0).collect(),
        prev: blocks.clone(),
    };
    let mut stop_reason = StopReason::MaxIter;
    for k in 1..=cfg.max_iter {
        let before = blocks.clone();
        let mut alpha = vec![0.0; p];
        let mut backtracks = vec![0; p];
        for i in 0..p {
            let step = update_block(obj, cfg, &mut state, &mut blocks, i, k)?;
            alpha[i] = step.stepsize;
            backtracks[i] = step.backtracks;
            observer(&BlockStep {
                iter: k,
                block: i,
                blocks: &blocks,
                previous: &before[i],
                stepsize: step.stepsize,
                backtracks: step.backtracks,
                bb: step.bb,
            });
        }
        let h = obj.value(&blocks);
        if !h.is_finite() {
            return Err(Error::NonFinite { iter: k });
        }
        let delta: Vec<f64> = before
            .iter()
            .zip(&blocks)
            .map(|(a, b)| frob_dist_sq(a, b).sqrt())
            .collect();
        records.push(IterationRecord {
            iter: k,
            h,
            residual: h.max(0.0).sqrt(),
            time_s: start.elapsed().as_secs_f64(),
            alpha,
            backtracks,
            delta,
        });
        state.prev = before;
        if let Some(t) = &tols {
            if check_stop(&state.prev, &blocks, t) {
                stop_reason = StopReason::IterateVariation;
                break;
            }
        }
    }
    Ok(SolveOutput {
        blocks,
        trace: IterationTrace {
            variant: cfg.variant,
            seed: cfg.seed,
            records,
            stop_reason,
        },
    })
}

struct State {
    /// Lipschitz estimates of the backtracking variants.
    lips: Vec<f64>,
    /// Spectral stepsizes of sPALM.
    alphas: Vec<f64>,
    /// Iterate of the previous iteration, for the inertial variants.
    prev: Vec<Matrix>,
}

struct StepResult {
    stepsize: f64,
    backtracks: usize,
    bb: Option<BbInfo>,
}

fn update_block(
    obj: &dyn BlockObjective,
    cfg: &SolverConfig,
    state: &mut State,
    blocks: &mut [Matrix],
    i: usize,
    k: usize,
) -> Result<StepResult> {
    let par = cfg.params(i);
    match cfg.variant {
        Variant::Palm | Variant::Ipalm => {
            let inertial = cfg.variant == Variant::Ipalm;
            let lip = obj.lipschitz(i, blocks).ok_or_else(|| {
                Error::Config(format!(
                    "{} needs Lipschitz constants, block {i} has none",
                    cfg.variant
                ))
            })?;
            let step = 1.0 / (par.eta * lip).max(par.mu);
            let anchor = extrapolate(blocks, &state.prev, i, if inertial { par.xi } else { 0.0 });
            let grad = gradient_at(obj, blocks, i, anchor.as_ref());
            let base = anchor.as_ref().unwrap_or(&blocks[i]);
            let new = obj.prox(i, &(base - grad * step), step)?;
            blocks[i] = new;
            Ok(StepResult {
                stepsize: step,
                backtracks: 0,
                bb: None,
            })
        }
        Variant::PalmBt | Variant::IpalmBt => {
            let inertial = cfg.variant == Variant::IpalmBt;
            let anchor = extrapolate(blocks, &state.prev, i, if inertial { par.xi } else { 0.0 });
            let (grad, h_base) = match &anchor {
                Some(a) => {
                    let saved = std::mem::replace(&mut blocks[i], a.clone());
                    let g = obj.partial_grad(i, blocks);
                    let h = obj.block_value(i, blocks);
                    blocks[i] = saved;
                    (g, h)
                }
                None => (obj.partial_grad(i, blocks), obj.block_value(i, blocks)),
            };
            let base = anchor.unwrap_or_else(|| blocks[i].clone());
            let mut lip = state.lips[i];
            let mut doublings = 0;
            loop {
                let l_eff = (par.eta * lip).max(par.mu);
                let step = 1.0 / l_eff;
                let cand = obj.prox(i, &(&base - &grad * step), step)?;
                let diff = &cand - &base;
                let bound = h_base + frob_dot(&grad, &diff) + 0.5 * l_eff * frob_norm_sq(&diff);
                let old = std::mem::replace(&mut blocks[i], cand);
                let h_new = obj.block_value(i, blocks);
                if h_new <= bound + BT_SLACK * h_base.abs().max(bound.abs()) {
                    state.lips[i] = (lip * 0.5).max(par.mu);
                    return Ok(StepResult {
                        stepsize: step,
                        backtracks: doublings,
                        bb: None,
                    });
                }
                if !h_new.is_finite() && !bound.is_finite() {
                    blocks[i] = old;
                    return Err(Error::NonFinite { iter: k });
                }
                blocks[i] = old;
                if doublings == cfg.max_doublings {
                    return Err(Error::BacktrackLimit {
                        block: i,
                        iter: k,
                        limit: cfg.max_doublings,
                    });
                }
                lip *= 2.0;
                doublings += 1;
            }
        }
        Variant::Spalm => {
            let grad = obj.partial_grad(i, blocks);
            let h_old = obj.block_value(i, blocks);
            let alpha = state.alphas[i];
            let mut step = alpha;
            let mut halvings = 0;
            let old = blocks[i].clone();
            loop {
                let trial = &old - &grad * step;
                let cand = if trial == old {
                    old.clone()
                } else {
                    obj.prox(i, &trial, step)?
                };
                let move_sq = frob_dist_sq(&cand, &old);
                blocks[i] = cand;
                let h_new = obj.block_value(i, blocks);
                if h_new <= h_old - par.delta / (2.0 * step) * move_sq {
                    break;
                }
                blocks[i] = old.clone();
                if halvings == cfg.max_halvings {
                    return Err(Error::BacktrackLimit {
                        block: i,
                        iter: k,
                        limit: cfg.max_halvings,
                    });
                }
                step *= par.rho;
                halvings += 1;
            }
            let s = &blocks[i] - &old;
            let new = blocks[i].clone();
            blocks[i] = old;
            let g = obj.grad_difference(i, blocks, &new);
            blocks[i] = new;
            let info = bb_info(s.as_slice(), g.as_slice(), k, cfg.alpha_min, cfg.alpha_max);
            state.alphas[i] = info.next_alpha;
            Ok(StepResult {
                stepsize: step,
                backtracks: halvings,
                bb: Some(info),
            })
        }
    }
}

/// Inertial point `x + xi (x - x_prev)` for block `i`, or `None` when it equals `x`.
fn extrapolate(blocks: &[Matrix], prev: &[Matrix], i: usize, xi: f64) -> Option<Matrix> {
    if xi == 0.0 || blocks[i] == prev[i] {
        return None;
    }
    Some(&blocks[i] + (&blocks[i] - &prev[i]) * xi)
}

fn gradient_at(
    obj: &dyn BlockObjective,
    blocks: &mut [Matrix],
    i: usize,
    anchor: Option<&Matrix>,
) -> Matrix {
    match anchor {
        Some(a) => {
            let saved = std::mem::replace(&mut blocks[i], a.clone());
            let g = obj.partial_grad(i, blocks);
            blocks[i] = saved;
            g
        }
        None => obj.partial_grad(i, blocks),
    }
}
