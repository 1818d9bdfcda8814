//! Causal self-attention encoder with hand-written reverse-mode gradients.
//!
//! Per sequence of length `n`:
//!
//! ```text
//! x₀[t]  = M[s_t] + P[t]            (0 at padding positions)
//! a      = softmax_causal(Q Kᵀ / √d_h) V      per head, keys ≤ t and non-padding
//! x₁     = LN₁(x + (a W_o + b_o))
//! x₂     = LN₂(x₁ + GELU(x₁ W₁ + b₁) W₂ + b₂)
//! ```
//!
//! Dropout, when enabled, follows the embedding sum, the attention
//! probabilities and both residual branches. A query with no admissible key
//! (a padding position at the start of a left-padded sequence) attends to
//! nothing and receives a zero context vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::PAD;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::model::params::{LayerParams, ModelParams, Tensor};

const LN_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    /// Dropout active; each sequence draws its masks from its own stream of
    /// `seed`, so results do not depend on scheduling.
    Train { dropout: f64, seed: u64 },
}

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    x: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Attention probabilities, `heads × n × n`, zero where masked.
    probs: Vec<f64>,
    probs_drop: Option<Vec<f64>>,
    ctx: Vec<f64>,
    o_drop: Option<Vec<f64>>,
    ln1: LnCache,
    x1: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    f_drop: Option<Vec<f64>>,
    ln2: LnCache,
}

/// Intermediates of one sequence's forward pass.
#[derive(Debug, Clone)]
pub struct SeqCache {
    items: Vec<u32>,
    valid: Vec<bool>,
    emb_drop: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
}

/// Encoder outputs for a batch.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub dim: usize,
    pub max_len: usize,
    /// Per sequence, `max_len × dim` row-major outputs.
    pub h_all: Vec<Vec<f64>>,
    pub(crate) caches: Vec<SeqCache>,
}

impl ForwardOutput {
    pub fn batch_size(&self) -> usize {
        self.h_all.len()
    }

    pub fn h_at(&self, b: usize, t: usize) -> &[f64] {
        &self.h_all[b][t * self.dim..(t + 1) * self.dim]
    }

    /// Final-position outputs, `batch × dim`.
    pub fn h_last(&self) -> Matrix {
        let d = self.dim;
        let n = self.max_len;
        Matrix::from_fn(self.batch_size(), d, |b, j| self.h_all[b][(n - 1) * d + j])
    }
}

/// Runs the encoder over padded id sequences of length `max_len`.
pub fn forward(params: &ModelParams, batch: &[Vec<u32>], mode: Mode) -> Result<ForwardOutput> {
    for seq in batch {
        if seq.len() != params.max_len {
            return Err(Error::InvalidInput(format!(
                "sequence has length {}, model expects {}",
                seq.len(),
                params.max_len
            )));
        }
        if let Some(&bad) = seq.iter().find(|&&v| v as usize > params.num_items) {
            return Err(Error::InvalidInput(format!(
                "item id {bad} out of range 0..={}",
                params.num_items
            )));
        }
    }
    let results: Vec<(Vec<f64>, SeqCache)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let mut rng = match mode {
                Mode::Eval => None,
                Mode::Train { dropout, seed } if dropout > 0.0 => {
                    let mut r = ChaCha8Rng::seed_from_u64(seed);
                    r.set_stream(i as u64);
                    Some((r, dropout))
                }
                Mode::Train { .. } => None,
            };
            forward_sequence(params, seq, rng.as_mut())
        })
        .collect();
    let (h_all, caches) = results.into_iter().unzip();
    Ok(ForwardOutput {
        dim: params.dim,
        max_len: params.max_len,
        h_all,
        caches,
    })
}

/// Dot products of `h` with the item table rows listed in `items`.
pub fn score_items(h: &[f64], params: &ModelParams, items: &[u32]) -> Vec<f64> {
    items.iter().map(|&v| dot(h, params.item_row(v))).collect()
}

/// Scores for every item `1..=num_items`; index `i` holds item `i + 1`.
pub fn score_all(h: &[f64], params: &ModelParams) -> Vec<f64> {
    let d = params.dim;
    params.item_emb.data[d..]
        .chunks_exact(d)
        .map(|row| dot(h, row))
        .collect()
}

fn dropout_mask(rng: &mut Option<(&mut ChaCha8Rng, f64)>, len: usize) -> Option<Vec<f64>> {
    rng.as_mut().map(|(r, p)| {
        let keep = 1.0 / (1.0 - *p);
        (0..len)
            .map(|_| if r.random::<f64>() < *p { 0.0 } else { keep })
            .collect()
    })
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (a, b) in x.iter_mut().zip(m) {
            *a *= b;
        }
    }
}

fn forward_sequence(
    params: &ModelParams,
    items: &[u32],
    rng: Option<&mut (ChaCha8Rng, f64)>,
) -> (Vec<f64>, SeqCache) {
    let mut rng = rng.map(|(r, p)| (r, *p));
    let d = params.dim;
    let n = items.len();
    let valid: Vec<bool> = items.iter().map(|&v| v != PAD).collect();

    let mut x = vec![0.0; n * d];
    for t in 0..n {
        if valid[t] {
            let row = params.item_row(items[t]);
            let pos = &params.pos_emb.data[t * d..(t + 1) * d];
            for j in 0..d {
                x[t * d + j] = row[j] + pos[j];
            }
        }
    }
    let emb_drop = dropout_mask(&mut rng, n * d);
    apply_mask(&mut x, &emb_drop);

    let heads = params.num_heads;
    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let (out, cache) = forward_layer(lp, x, &valid, n, d, heads, &mut rng);
        layers.push(cache);
        x = out;
    }
    (
        x,
        SeqCache {
            items: items.to_vec(),
            valid,
            emb_drop,
            layers,
        },
    )
}

fn linear(x: &[f64], rows: usize, w: &Tensor, b: &Tensor) -> Vec<f64> {
    let (din, dout) = (w.shape[0], w.shape[1]);
    let mut y = Vec::with_capacity(rows * dout);
    for r in 0..rows {
        y.extend_from_slice(&b.data[..dout]);
        let yr = &mut y[r * dout..(r + 1) * dout];
        let xr = &x[r * din..(r + 1) * din];
        for (i, &xi) in xr.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let wr = &w.data[i * dout..(i + 1) * dout];
            for (yo, &wv) in yr.iter_mut().zip(wr) {
                *yo += xi * wv;
            }
        }
    }
    y
}

/// Accumulates `dW += xᵀ dy`, `db += Σ dy` and returns `dx = dy Wᵀ`.
fn linear_back(
    x: &[f64],
    dy: &[f64],
    rows: usize,
    w: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
) -> Vec<f64> {
    let (din, dout) = (w.shape[0], w.shape[1]);
    let mut dx = vec![0.0; rows * din];
    for r in 0..rows {
        let dyr = &dy[r * dout..(r + 1) * dout];
        let xr = &x[r * din..(r + 1) * din];
        for (o, &g) in db.data.iter_mut().zip(dyr) {
            *o += g;
        }
        for i in 0..din {
            let wr = &w.data[i * dout..(i + 1) * dout];
            dx[r * din + i] = dot(dyr, wr);
            let xi = xr[i];
            if xi != 0.0 {
                let dwr = &mut dw.data[i * dout..(i + 1) * dout];
                for (o, &g) in dwr.iter_mut().zip(dyr) {
                    *o += xi * g;
                }
            }
        }
    }
    dx
}

fn layer_norm(x: &[f64], rows: usize, gain: &Tensor, bias: &Tensor) -> (Vec<f64>, LnCache) {
    let d = gain.len();
    let mut y = vec![0.0; rows * d];
    let mut xhat = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for j in 0..d {
            let h = (xr[j] - mean) * is;
            xhat[r * d + j] = h;
            y[r * d + j] = gain.data[j] * h + bias.data[j];
        }
    }
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_back(
    dy: &[f64],
    cache: &LnCache,
    gain: &Tensor,
    dgain: &mut Tensor,
    dbias: &mut Tensor,
) -> Vec<f64> {
    let d = gain.len();
    let rows = cache.inv_std.len();
    let mut dx = vec![0.0; rows * d];
    for r in 0..rows {
        let xh = &cache.xhat[r * d..(r + 1) * d];
        let dyr = &dy[r * d..(r + 1) * d];
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        let mut g = vec![0.0; d];
        for j in 0..d {
            dgain.data[j] += dyr[j] * xh[j];
            dbias.data[j] += dyr[j];
            g[j] = dyr[j] * gain.data[j];
            sum_g += g[j];
            sum_gx += g[j] * xh[j];
        }
        let is = cache.inv_std[r];
        let nd = d as f64;
        for j in 0..d {
            dx[r * d + j] = is / nd * (nd * g[j] - sum_g - xh[j] * sum_gx);
        }
    }
    dx
}

#[inline]
fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044_715 * x * x * x)).tanh())
}

#[inline]
fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044_715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044_715 * x * x)
}

fn forward_layer(
    lp: &LayerParams,
    x: Vec<f64>,
    valid: &[bool],
    n: usize,
    d: usize,
    heads: usize,
    rng: &mut Option<(&mut ChaCha8Rng, f64)>,
) -> (Vec<f64>, LayerCache) {
    let q = linear(&x, n, &lp.wq, &lp.bq);
    let k = linear(&x, n, &lp.wk, &lp.bk);
    let v = linear(&x, n, &lp.wv, &lp.bv);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut probs = vec![0.0; heads * n * n];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            let qi = &q[i * d + off..i * d + off + dh];
            let row = &mut probs[(h * n + i) * n..(h * n + i + 1) * n];
            let mut max = f64::NEG_INFINITY;
            for j in 0..=i {
                if valid[j] {
                    let s = dot(qi, &k[j * d + off..j * d + off + dh]) * scale;
                    row[j] = s;
                    max = max.max(s);
                }
            }
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut z = 0.0;
            for j in 0..=i {
                if valid[j] {
                    row[j] = (row[j] - max).exp();
                    z += row[j];
                }
            }
            for j in 0..=i {
                if valid[j] {
                    row[j] /= z;
                }
            }
        }
    }
    let probs_drop = dropout_mask(rng, heads * n * n);
    let mut eff = probs.clone();
    apply_mask(&mut eff, &probs_drop);

    let mut ctx = vec![0.0; n * d];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            let row = &eff[(h * n + i) * n..(h * n + i + 1) * n];
            let ci = &mut ctx[i * d + off..i * d + off + dh];
            for (j, &a) in row.iter().enumerate().take(i + 1) {
                if a == 0.0 {
                    continue;
                }
                let vj = &v[j * d + off..j * d + off + dh];
                for (c, &vv) in ci.iter_mut().zip(vj) {
                    *c += a * vv;
                }
            }
        }
    }

    let mut o = linear(&ctx, n, &lp.wo, &lp.bo);
    let o_drop = dropout_mask(rng, n * d);
    apply_mask(&mut o, &o_drop);
    let r1: Vec<f64> = x.iter().zip(&o).map(|(a, b)| a + b).collect();
    let (x1, ln1) = layer_norm(&r1, n, &lp.ln1_gain, &lp.ln1_bias);

    let pre = linear(&x1, n, &lp.w1, &lp.b1);
    let act: Vec<f64> = pre.iter().map(|&p| gelu(p)).collect();
    let mut f = linear(&act, n, &lp.w2, &lp.b2);
    let f_drop = dropout_mask(rng, n * d);
    apply_mask(&mut f, &f_drop);
    let r2: Vec<f64> = x1.iter().zip(&f).map(|(a, b)| a + b).collect();
    let (x2, ln2) = layer_norm(&r2, n, &lp.ln2_gain, &lp.ln2_bias);

    (
        x2,
        LayerCache {
            x,
            q,
            k,
            v,
            probs,
            probs_drop,
            ctx,
            o_drop,
            ln1,
            x1,
            pre,
            act,
            f_drop,
            ln2,
        },
    )
}

fn backward_layer(
    lp: &LayerParams,
    g: &mut LayerParams,
    c: &LayerCache,
    d_out: &[f64],
    valid: &[bool],
    n: usize,
    d: usize,
    heads: usize,
) -> Vec<f64> {
    let dr2 = layer_norm_back(d_out, &c.ln2, &lp.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);
    let mut df = dr2.clone();
    apply_mask(&mut df, &c.f_drop);
    let dact = linear_back(&c.act, &df, n, &lp.w2, &mut g.w2, &mut g.b2);
    let dpre: Vec<f64> = dact
        .iter()
        .zip(&c.pre)
        .map(|(g, &p)| g * gelu_grad(p))
        .collect();
    let dx1_ffn = linear_back(&c.x1, &dpre, n, &lp.w1, &mut g.w1, &mut g.b1);
    let dx1: Vec<f64> = dr2.iter().zip(&dx1_ffn).map(|(a, b)| a + b).collect();

    let dr1 = layer_norm_back(&dx1, &c.ln1, &lp.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
    let mut do_ = dr1.clone();
    apply_mask(&mut do_, &c.o_drop);
    let dctx = linear_back(&c.ctx, &do_, n, &lp.wo, &mut g.wo, &mut g.bo);

    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = vec![0.0; n * d];
    let mut dk = vec![0.0; n * d];
    let mut dv = vec![0.0; n * d];
    let mut dp = vec![0.0; n];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..n {
            let base = (h * n + i) * n;
            let probs = &c.probs[base..base + n];
            let dci = &dctx[i * d + off..i * d + off + dh];
            // dL/d(prob) before dropout, and dV.
            let mut weighted = 0.0;
            for j in 0..=i {
                if !valid[j] {
                    dp[j] = 0.0;
                    continue;
                }
                let keep = c.probs_drop.as_ref().map_or(1.0, |m| m[base + j]);
                let vj = &c.v[j * d + off..j * d + off + dh];
                let g_eff = dot(dci, vj);
                dp[j] = g_eff * keep;
                let a_eff = probs[j] * keep;
                if a_eff != 0.0 {
                    let dvj = &mut dv[j * d + off..j * d + off + dh];
                    for (o, &gc) in dvj.iter_mut().zip(dci) {
                        *o += a_eff * gc;
                    }
                }
                weighted += probs[j] * dp[j];
            }
            let qi = &c.q[i * d + off..i * d + off + dh];
            for j in 0..=i {
                if !valid[j] {
                    continue;
                }
                let ds = probs[j] * (dp[j] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                let kj = &c.k[j * d + off..j * d + off + dh];
                for t in 0..dh {
                    dq[i * d + off + t] += ds * kj[t];
                    dk[j * d + off + t] += ds * qi[t];
                }
            }
        }
    }
    let dxq = linear_back(&c.x, &dq, n, &lp.wq, &mut g.wq, &mut g.bq);
    let dxk = linear_back(&c.x, &dk, n, &lp.wk, &mut g.wk, &mut g.bk);
    let dxv = linear_back(&c.x, &dv, n, &lp.wv, &mut g.wv, &mut g.bv);
    (0..n * d)
        .map(|i| dr1[i] + dxq[i] + dxk[i] + dxv[i])
        .collect()
}

/// Back-propagates `d_out` (`max_len × dim`, gradient w.r.t. the encoder
/// outputs) through one sequence, accumulating into `grads`.
pub(crate) fn backward_sequence(
    params: &ModelParams,
    cache: &SeqCache,
    d_out: &[f64],
    grads: &mut ModelParams,
) {
    let d = params.dim;
    let n = cache.items.len();
    let heads = params.num_heads;
    let mut dx = d_out.to_vec();
    for (l, lc) in cache.layers.iter().enumerate().rev() {
        dx = backward_layer(
            &params.layers[l],
            &mut grads.layers[l],
            lc,
            &dx,
            &cache.valid,
            n,
            d,
            heads,
        );
    }
    apply_mask(&mut dx, &cache.emb_drop);
    for t in 0..n {
        if !cache.valid[t] {
            continue;
        }
        let g = &dx[t * d..(t + 1) * d];
        let item = cache.items[t] as usize;
        for j in 0..d {
            grads.item_emb.data[item * d + j] += g[j];
            grads.pos_emb.data[t * d + j] += g[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModelConfig;

    fn setup(layers: usize, heads: usize) -> ModelParams {
        let cfg = ModelConfig {
            dim: 8,
            max_len: 5,
            num_layers: layers,
            num_heads: heads,
            ..ModelConfig::default()
        };
        crate::model::init_params(&cfg, 10, 3)
    }

    #[test]
    fn zero_layers_is_embedding_passthrough() {
        let p = setup(0, 1);
        let out = forward(&p, &[vec![0, 0, 0, 0, 7]], Mode::Eval).unwrap();
        let h = out.h_last();
        for j in 0..8 {
            assert_eq!(h[(0, j)], p.item_row(7)[j] + p.pos_emb.data[4 * 8 + j]);
        }
    }

    #[test]
    fn all_padding_gives_constant_output() {
        let p = setup(2, 2);
        let out = forward(&p, &[vec![0; 5], vec![0; 5], vec![0; 5]], Mode::Eval).unwrap();
        let h = out.h_last();
        assert_eq!(h.row(0), h.row(1));
        assert_eq!(h.row(1), h.row(2));
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let p = setup(1, 1);
        assert!(matches!(
            forward(&p, &[vec![0, 0, 0, 0, 11]], Mode::Eval),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            forward(&p, &[vec![0, 1]], Mode::Eval),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn later_positions_do_not_leak() {
        let p = setup(2, 2);
        let a = forward(&p, &[vec![0, 3, 4, 5, 6]], Mode::Eval).unwrap();
        let b = forward(&p, &[vec![0, 3, 4, 9, 1]], Mode::Eval).unwrap();
        for t in 0..3 {
            assert_eq!(a.h_at(0, t), b.h_at(0, t));
        }
        assert_ne!(a.h_at(0, 3), b.h_at(0, 3));
    }

    #[test]
    fn scoring_is_dot_product() {
        let p = setup(1, 1);
        let h: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let s = score_items(&h, &p, &[1, 5]);
        assert_eq!(s[0], dot(&h, p.item_row(1)));
        assert_eq!(score_all(&h, &p)[4], s[1]);
        assert_eq!(score_items(&[0.0; 8], &p, &[2, 3]), vec![0.0, 0.0]);
    }

    #[test]
    fn dropout_changes_train_but_not_eval() {
        let p = setup(1, 1);
        let seqs = vec![vec![0, 1, 2, 3, 4]];
        let e1 = forward(&p, &seqs, Mode::Eval).unwrap();
        let e2 = forward(&p, &seqs, Mode::Eval).unwrap();
        assert_eq!(e1.h_all, e2.h_all);
        let t1 = forward(&p, &seqs, Mode::Train { dropout: 0.5, seed: 1 }).unwrap();
        let t2 = forward(&p, &seqs, Mode::Train { dropout: 0.5, seed: 1 }).unwrap();
        assert_eq!(t1.h_all, t2.h_all);
        assert_ne!(t1.h_all, e1.h_all);
    }
}
