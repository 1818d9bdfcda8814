//! Trainable tensors.
//!
//! Parameters are stored at single precision: initialisation and every
//! optimizer step round values to the nearest `f32`, while all arithmetic
//! runs in `f64`. That makes checkpoints (which hold `f32`) an exact image
//! of the in-memory model.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::PAD;
use crate::linalg::Matrix;
use crate::model::config::ModelConfig;

/// Standard deviation of the truncated-normal initialiser.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    fn truncated_normal<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= 2.0 {
                    break round_f32(z * INIT_STD);
                }
            })
            .collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[inline]
pub(crate) fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// One encoder block. Projection weights are stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
}

impl LayerParams {
    const NAMES: [&'static str; 16] = [
        "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1_gain", "ln1_bias", "w1", "b1", "w2",
        "b2", "ln2_gain", "ln2_bias",
    ];

    fn init<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let w = |rng: &mut R| Tensor::truncated_normal(&[d, d], rng);
        LayerParams {
            wq: w(rng),
            bq: Tensor::zeros(&[d]),
            wk: w(rng),
            bk: Tensor::zeros(&[d]),
            wv: w(rng),
            bv: Tensor::zeros(&[d]),
            wo: w(rng),
            bo: Tensor::zeros(&[d]),
            ln1_gain: Tensor::filled(&[d], 1.0),
            ln1_bias: Tensor::zeros(&[d]),
            w1: w(rng),
            b1: Tensor::zeros(&[d]),
            w2: w(rng),
            b2: Tensor::zeros(&[d]),
            ln2_gain: Tensor::filled(&[d], 1.0),
            ln2_bias: Tensor::zeros(&[d]),
        }
    }

    fn tensors(&self) -> [&Tensor; 16] {
        [
            &self.wq, &self.bq, &self.wk, &self.bk, &self.wv, &self.bv, &self.wo, &self.bo,
            &self.ln1_gain, &self.ln1_bias, &self.w1, &self.b1, &self.w2, &self.b2,
            &self.ln2_gain, &self.ln2_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor; 16] {
        [
            &mut self.wq, &mut self.bq, &mut self.wk, &mut self.bk, &mut self.wv, &mut self.bv,
            &mut self.wo, &mut self.bo, &mut self.ln1_gain, &mut self.ln1_bias, &mut self.w1,
            &mut self.b1, &mut self.w2, &mut self.b2, &mut self.ln2_gain, &mut self.ln2_bias,
        ]
    }
}

/// Item table, positional table and encoder blocks.
///
/// Row `0` of the item table is the padding embedding and stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub num_items: usize,
    pub dim: usize,
    pub max_len: usize,
    pub num_heads: usize,
    /// `(num_items + 1) × dim`.
    pub item_emb: Tensor,
    /// `max_len × dim`.
    pub pos_emb: Tensor,
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    /// Truncated-normal (±2σ, σ = 0.02) weights, unit layer-norm gains and
    /// zero biases.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, num_items: usize, rng: &mut R) -> Self {
        let d = cfg.dim;
        let mut item_emb = Tensor::truncated_normal(&[num_items + 1, d], rng);
        item_emb.data[..d].fill(0.0);
        let pos_emb = Tensor::truncated_normal(&[cfg.max_len, d], rng);
        let layers = (0..cfg.num_layers).map(|_| LayerParams::init(d, rng)).collect();
        ModelParams {
            num_items,
            dim: d,
            max_len: cfg.max_len,
            num_heads: cfg.num_heads,
            item_emb,
            pos_emb,
            layers,
        }
    }

    /// A parameter set of the same shape filled with zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, t| t.data.fill(0.0));
        z
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["item_emb".to_owned(), "pos_emb".to_owned()];
        for l in 0..self.layers.len() {
            names.extend(LayerParams::NAMES.iter().map(|n| format!("layer{l}.{n}")));
        }
        names
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.item_emb, &self.pos_emb];
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.item_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.names().into_iter().zip(self.tensors()).collect()
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&str, &mut Tensor)) {
        let names = self.names();
        for (n, t) in names.iter().zip(self.tensors_mut()) {
            f(n, t);
        }
    }

    /// Adds `scale · other` tensor-wise.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn item_row(&self, item: u32) -> &[f64] {
        let d = self.dim;
        &self.item_emb.data[item as usize * d..(item as usize + 1) * d]
    }

    /// Non-padding rows of the item table as a matrix.
    pub fn active_items(&self) -> Matrix {
        let d = self.dim;
        Matrix::from_vec(self.num_items, d, self.item_emb.data[d..].to_vec())
            .expect("item table is finite")
    }

    pub fn zero_padding_row(&mut self) {
        let d = self.dim;
        self.item_emb.data[PAD as usize * d..(PAD as usize + 1) * d].fill(0.0);
    }

    pub fn round_to_f32(&mut self) {
        self.for_each_tensor_mut(|_, t| t.data.iter_mut().for_each(|v| *v = round_f32(*v)));
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Order-sensitive FNV-1a digest of every parameter's bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in self.tensors() {
            for v in &t.data {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}
