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

//! Alternating proximal solvers for dictionary learning.
//!
//! The crate covers the classical matrix problem `min ||Y - DX||_F^2` with unit-norm
//! atoms and column-sparse codes, and the tensor-train variant where the dictionary is
//! stored as a chain of TT-cores. Four solver families share one [`palm::BlockObjective`]
//! contract: PALM with exact Lipschitz steps, its backtracking and inertial variants,
//! and sPALM, which uses alternating Barzilai-Borwein stepsizes with an Armijo test.
//!
//! Module map:
//! - [`tensor`]: dense tensors, unfoldings, mode products, TT-SVD, spectral norms.
//! - [`prox`]: projections onto the three feasible sets.
//! - [`palm`]: the generic p-block solver engine and iteration traces.
//! - [`dl_matrix`], [`dl_tt`]: the dictionary learning objectives.
//! - [`classify`]: least-squares classifier, OMP coding, scoring.
//! - [`data`]: IDX ingestion, tensorization, splits, synthetic instances.
//! - [`presets`]: named experiment sizes.

pub mod classify;
pub mod data;
pub mod dl_matrix;
pub mod dl_tt;
mod error;
pub mod linalg;
pub mod palm;
pub mod presets;
pub mod prox;
pub mod tensor;

pub use error::{Error, Result};

/// Dense column-major matrix used for every solver block.
pub type Matrix = nalgebra::DMatrix<f64>;
