use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which regulariser is applied to the sequence outputs and item table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// `-‖·‖_* / ‖·‖_F`.
    #[default]
    Smoothing,
    /// Mean pairwise cosine similarity.
    Cosine,
    /// Negative mean pairwise Euclidean distance.
    Euclidean,
}

impl Regularizer {
    pub fn code(self) -> u32 {
        match self {
            Regularizer::Smoothing => 0,
            Regularizer::Cosine => 1,
            Regularizer::Euclidean => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Regularizer::Smoothing),
            1 => Some(Regularizer::Cosine),
            2 => Some(Regularizer::Euclidean),
            _ => None,
        }
    }
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smoothing" | "spectrum" => Ok(Regularizer::Smoothing),
            "cosine" | "cos" | "cosreg" => Ok(Regularizer::Cosine),
            "euclidean" | "euclid" => Ok(Regularizer::Euclidean),
            other => Err(Error::InvalidInput(format!("unknown regularizer {other:?}"))),
        }
    }
}

/// Rows of the item table the item regulariser sees each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ItemScope {
    /// Every non-padding row.
    #[default]
    All,
    /// Only items appearing in the batch as inputs, targets or negatives.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub max_len: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub dropout: f64,
    /// Weight of the sequence-output regulariser.
    pub lambda: f64,
    /// Weight of the item-table regulariser.
    pub beta: f64,
    pub negatives: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub regularizer: Regularizer,
    pub item_scope: ItemScope,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            max_len: 50,
            num_layers: 2,
            num_heads: 1,
            dropout: 0.3,
            lambda: 0.0,
            beta: 0.0,
            negatives: 1,
            learning_rate: 1e-3,
            batch_size: 128,
            seed: 42,
            regularizer: Regularizer::Smoothing,
            item_scope: ItemScope::All,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_owned()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.max_len == 0 {
            return bad("max_len must be at least 1");
        }
        if self.num_heads == 0 || self.dim % self.num_heads != 0 {
            return bad("num_heads must divide dim");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.negatives == 0 {
            return bad("at least one negative per position is required");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.num_heads
    }
}
