//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/beta"
//!
//! [data]
//! bundle = "runs/data/dataset.ssqb"
//!
//! [model]
//! dim = 32
//! max_len = 20
//! lambda = 0.1
//!
//! [train]
//! epochs = 100
//! patience = 20
//!
//! [eval]
//! cutoffs = [5, 10, 40]
//!
//! [sweep]
//! lambdas = [0.1]
//! betas = [0.0, 1e-5, 1e-4, 1e-3]
//! ```
//!
//! Every key is optional. Command-line flags override file values, which
//! override the defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use specsmooth::eval::EvalOptions;
use specsmooth::experiment::TrainOptions;
use specsmooth::model::ModelConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub data: DataSection,
    pub model: ModelConfig,
    pub train: TrainOptions,
    pub eval: EvalSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub bundle: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub cutoffs: Vec<usize>,
    pub mask_seen: bool,
    pub length_buckets: Vec<usize>,
    pub popularity_buckets: Vec<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let d = EvalOptions::default();
        EvalSection {
            cutoffs: d.cutoffs,
            mask_seen: d.mask_seen,
            length_buckets: d.length_buckets,
            popularity_buckets: d.popularity_buckets,
        }
    }
}

impl EvalSection {
    pub fn options(&self, groups: bool) -> EvalOptions {
        EvalOptions {
            cutoffs: self.cutoffs.clone(),
            mask_seen: self.mask_seen,
            length_buckets: self.length_buckets.clone(),
            popularity_buckets: self.popularity_buckets.clone(),
            groups,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            lambdas: vec![0.0],
            betas: vec![0.0, 1e-5, 1e-4, 1e-3],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, crate::CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml(&text)
            .map_err(|e| crate::CliError::Usage(format!("{}: {e}", path.display())))
    }
}
