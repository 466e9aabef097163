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

//! Named experiment sizes.

use crate::dl_tt::{memory_footprint, MemoryFootprint};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// Image extents after resizing.
    pub image_dims: Vec<usize>,
    pub k: usize,
    pub tau: usize,
    /// Default TT-ranks.
    pub ranks: Vec<usize>,
    /// Training expressions per class.
    pub n_train: usize,
    /// Test expressions per class.
    pub n_test: usize,
    pub n_classes: usize,
}

impl Preset {
    pub fn pixels(&self) -> usize {
        self.image_dims.iter().product()
    }

    pub fn train_samples(&self) -> usize {
        self.n_train * self.n_classes
    }

    pub fn memory(&self) -> MemoryFootprint {
        memory_footprint(&self.image_dims, &self.ranks, self.k, self.tau, self.train_samples())
    }
}

/// Small random instance used for smoke runs: 8 pixels, 12 atoms, 20 samples.
pub fn synthetic() -> Preset {
    Preset {
        name: "synthetic",
        image_dims: vec![2, 4],
        k: 12,
        tau: 3,
        ranks: vec![2, 8],
        n_train: 5,
        n_test: 0,
        n_classes: 4,
    }
}

/// MNIST at 14x14 with 100 training and 20 test digits per class.
pub fn mnist_desk() -> Preset {
    Preset {
        name: "mnist-desk",
        image_dims: vec![14, 14],
        k: 200,
        tau: 20,
        ranks: vec![14, 196],
        n_train: 100,
        n_test: 20,
        n_classes: 10,
    }
}

/// MIT-CBCL faces: 15x15 pixels, 324 expressions of 10 people split 75/25.
pub fn mit() -> Preset {
    Preset {
        name: "mit",
        image_dims: vec![15, 15],
        k: 441,
        tau: 40,
        ranks: vec![15, 40],
        n_train: 243,
        n_test: 81,
        n_classes: 10,
    }
}

pub fn by_name(name: &str) -> Option<Preset> {
    match name {
        "synthetic" => Some(synthetic()),
        "mnist-desk" => Some(mnist_desk()),
        "mit" => Some(mit()),
        _ => None,
    }
}
