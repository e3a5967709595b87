//! Two-layer LSTM classifier with recurrent dropout and L2 regularization
//! on kernels and biases; the final hidden state of the second layer feeds
//! a softmax. Gradients come from full backpropagation through time over a
//! single flat parameter vector.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{DynamicDataset, PredictorConfig};
use crate::error::{Error, Result};

const GATES: usize = 4; // input, forget, cell, output

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    w: usize,     // 4 kernels, each h x d, gate-major
    u: usize,     // 4 recurrent kernels, each h x h
    b: usize,     // 4 biases, each h
    input_dim: usize,
}

#[derive(Debug, Clone)]
pub struct LstmModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub l2_kernel: f64,
    pub l2_bias: f64,
}

struct Layout {
    layers: [LayerOffsets; 2],
    w_out: usize,
    b_out: usize,
    total: usize,
}

fn layout(d: usize, h: usize) -> Layout {
    let mut at = 0;
    let mut layer = |input_dim: usize| {
        let w = at;
        at += GATES * h * input_dim;
        let u = at;
        at += GATES * h * h;
        let b = at;
        at += GATES * h;
        LayerOffsets {
            w,
            u,
            b,
            input_dim,
        }
    };
    let l0 = layer(d);
    let l1 = layer(h);
    let w_out = at;
    at += 2 * h;
    let b_out = at;
    at += 2;
    Layout {
        layers: [l0, l1],
        w_out,
        b_out,
        total: at,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax2(z: &[f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// Per-timestep activations cached for backpropagation.
#[derive(Default)]
struct LayerCache {
    xs: Vec<Vec<f64>>,
    h_prev_masked: Vec<Vec<f64>>,
    gate_i: Vec<Vec<f64>>,
    gate_f: Vec<Vec<f64>>,
    gate_g: Vec<Vec<f64>>,
    gate_o: Vec<Vec<f64>>,
    cell: Vec<Vec<f64>>,
    tanh_cell: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

impl LstmModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let l = layout(input_dim, hidden);
        LstmModel {
            input_dim,
            hidden,
            params: vec![0.0; l.total],
            l2_kernel: 0.0,
            l2_bias: 0.0,
        }
    }

    pub fn init(input_dim: usize, hidden: usize, config: &PredictorConfig) -> Self {
        let l = layout(input_dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; l.total];
        for lo in &l.layers {
            let wb = (6.0 / (lo.input_dim + hidden) as f64).sqrt();
            for i in lo.w..lo.u {
                params[i] = rng.random_range(-wb..wb);
            }
            let ub = (6.0 / (2 * hidden) as f64).sqrt();
            for i in lo.u..lo.b {
                params[i] = rng.random_range(-ub..ub);
            }
            // forget-gate bias starts open so state carries at init
            for i in 0..hidden {
                params[lo.b + hidden + i] = 1.0;
            }
        }
        let ob = (6.0 / (hidden + 2) as f64).sqrt();
        for i in l.w_out..l.b_out {
            params[i] = rng.random_range(-ob..ob);
        }
        LstmModel {
            input_dim,
            hidden,
            params,
            l2_kernel: config.l2_kernel,
            l2_bias: config.l2_bias,
        }
    }

    fn layer_forward(&self, off: &LayerOffsets, xs: &[Vec<f64>], rmask: Option<&[f64]>) -> LayerCache {
        let h = self.hidden;
        let d = off.input_dim;
        let p = &self.params;
        let t_len = xs.len();
        let mut cache = LayerCache::default();
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for x in xs.iter().take(t_len) {
            let hm: Vec<f64> = match rmask {
                Some(m) => h_prev.iter().zip(m).map(|(a, b)| a * b).collect(),
                None => h_prev.clone(),
            };
            let mut gates = vec![0.0; GATES * h];
            for (gi, gate) in gates.chunks_mut(h).enumerate() {
                for (i, g) in gate.iter_mut().enumerate() {
                    let mut acc = p[off.b + gi * h + i];
                    let wrow = &p[off.w + (gi * h + i) * d..off.w + (gi * h + i + 1) * d];
                    for (w, xv) in wrow.iter().zip(x) {
                        acc += w * xv;
                    }
                    let urow = &p[off.u + (gi * h + i) * h..off.u + (gi * h + i + 1) * h];
                    for (u, hv) in urow.iter().zip(&hm) {
                        acc += u * hv;
                    }
                    *g = acc;
                }
            }
            let gi: Vec<f64> = gates[0..h].iter().map(|&z| sigmoid(z)).collect();
            let gf: Vec<f64> = gates[h..2 * h].iter().map(|&z| sigmoid(z)).collect();
            let gg: Vec<f64> = gates[2 * h..3 * h].iter().map(|&z| z.tanh()).collect();
            let go: Vec<f64> = gates[3 * h..4 * h].iter().map(|&z| sigmoid(z)).collect();
            let c: Vec<f64> = (0..h).map(|i| gf[i] * c_prev[i] + gi[i] * gg[i]).collect();
            let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let hv: Vec<f64> = (0..h).map(|i| go[i] * tc[i]).collect();
            cache.xs.push(x.clone());
            cache.h_prev_masked.push(hm);
            cache.gate_i.push(gi);
            cache.gate_f.push(gf);
            cache.gate_g.push(gg);
            cache.gate_o.push(go);
            cache.cell.push(c.clone());
            cache.tanh_cell.push(tc);
            cache.hidden.push(hv.clone());
            h_prev = hv;
            c_prev = c;
        }
        cache
    }

    /// Gradient of this layer given upstream gradients on each hidden state;
    /// accumulates parameter gradients into `grad` and returns gradients on
    /// the layer inputs.
    #[allow(clippy::too_many_arguments)]
    fn layer_backward(
        &self,
        off: &LayerOffsets,
        cache: &LayerCache,
        dh_out: &[Vec<f64>],
        rmask: Option<&[f64]>,
        grad: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let d = off.input_dim;
        let p = &self.params;
        let t_len = cache.xs.len();
        let mut dxs = vec![vec![0.0; d]; t_len];
        let mut dh_rec = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..t_len).rev() {
            let dh: Vec<f64> = (0..h).map(|i| dh_out[t][i] + dh_rec[i]).collect();
            let (gi, gf, gg, go) = (
                &cache.gate_i[t],
                &cache.gate_f[t],
                &cache.gate_g[t],
                &cache.gate_o[t],
            );
            let tc = &cache.tanh_cell[t];
            let c_prev: Vec<f64> = if t == 0 {
                vec![0.0; h]
            } else {
                cache.cell[t - 1].clone()
            };
            let mut dc = vec![0.0; h];
            let mut dpre = vec![0.0; GATES * h];
            for i in 0..h {
                dc[i] = dh[i] * go[i] * (1.0 - tc[i] * tc[i]) + dc_next[i];
                let do_ = dh[i] * tc[i];
                let di = dc[i] * gg[i];
                let df = dc[i] * c_prev[i];
                let dg = dc[i] * gi[i];
                dpre[i] = di * gi[i] * (1.0 - gi[i]);
                dpre[h + i] = df * gf[i] * (1.0 - gf[i]);
                dpre[2 * h + i] = dg * (1.0 - gg[i] * gg[i]);
                dpre[3 * h + i] = do_ * go[i] * (1.0 - go[i]);
            }
            // parameter gradients and input/recurrent backflow
            let mut dh_prev_masked = vec![0.0; h];
            for g in 0..GATES {
                for i in 0..h {
                    let dp = dpre[g * h + i];
                    if dp == 0.0 {
                        continue;
                    }
                    grad[off.b + g * h + i] += dp;
                    let wrow = off.w + (g * h + i) * d;
                    for j in 0..d {
                        grad[wrow + j] += dp * cache.xs[t][j];
                        dxs[t][j] += dp * p[wrow + j];
                    }
                    let urow = off.u + (g * h + i) * h;
                    for j in 0..h {
                        grad[urow + j] += dp * cache.h_prev_masked[t][j];
                        dh_prev_masked[j] += dp * p[urow + j];
                    }
                }
            }
            dh_rec = match rmask {
                Some(m) => dh_prev_masked.iter().zip(m).map(|(a, b)| a * b).collect(),
                None => dh_prev_masked,
            };
            dc_next = (0..h).map(|i| dc[i] * gf[i]).collect();
        }
        dxs
    }

    fn forward(&self, seq: &[Vec<f64>], rmasks: Option<(&[f64], &[f64])>) -> (LayerCache, LayerCache, [f64; 2]) {
        let l = layout(self.input_dim, self.hidden);
        let c0 = self.layer_forward(&l.layers[0], seq, rmasks.map(|m| m.0));
        let c1 = self.layer_forward(&l.layers[1], &c0.hidden, rmasks.map(|m| m.1));
        let h = self.hidden;
        let hlast = c1
            .hidden
            .last()
            .cloned()
            .unwrap_or_else(|| vec![0.0; h]);
        let mut z = [0.0; 2];
        for (c, zc) in z.iter_mut().enumerate() {
            let mut acc = self.params[l.b_out + c];
            for i in 0..h {
                acc += self.params[l.w_out + c * h + i] * hlast[i];
            }
            *zc = acc;
        }
        (c0, c1, softmax2(&z))
    }

    pub fn predict(&self, seq: &[Vec<f64>]) -> [f64; 2] {
        self.forward(seq, None).2
    }

    /// Mean cross-entropy plus L2 penalties over a batch of sequences, and
    /// the full parameter gradient. `rmasks`, when given, holds one pair of
    /// per-layer recurrent dropout masks per sequence.
    pub fn batch_loss_and_grad(
        &self,
        seqs: &[&[Vec<f64>]],
        labels: &[bool],
        rmasks: Option<&[(Vec<f64>, Vec<f64>)]>,
    ) -> (f64, Vec<f64>) {
        let l = layout(self.input_dim, self.hidden);
        let h = self.hidden;
        let n = seqs.len() as f64;
        let mut grad = vec![0.0; l.total];
        let mut loss = 0.0;
        for (s, (&seq, &y)) in seqs.iter().zip(labels).enumerate() {
            let masks = rmasks.map(|ms| (ms[s].0.as_slice(), ms[s].1.as_slice()));
            let (c0, c1, probs) = self.forward(seq, masks);
            let yi = usize::from(y);
            loss -= probs[yi].max(1e-300).ln();
            let mut dz = [probs[0] / n, probs[1] / n];
            dz[yi] -= 1.0 / n;
            let t_len = seq.len();
            let hlast = c1
                .hidden
                .last()
                .cloned()
                .unwrap_or_else(|| vec![0.0; h]);
            let mut dh1 = vec![vec![0.0; h]; t_len];
            for (c, &dzc) in dz.iter().enumerate() {
                grad[l.b_out + c] += dzc;
                for i in 0..h {
                    grad[l.w_out + c * h + i] += dzc * hlast[i];
                    if t_len > 0 {
                        dh1[t_len - 1][i] += dzc * self.params[l.w_out + c * h + i];
                    }
                }
            }
            if t_len == 0 {
                continue;
            }
            let dx1 = self.layer_backward(&l.layers[1], &c1, &dh1, masks.map(|m| m.1), &mut grad);
            self.layer_backward(&l.layers[0], &c0, &dx1, masks.map(|m| m.0), &mut grad);
        }
        loss /= n;
        let p = &self.params;
        for lo in &l.layers {
            for i in lo.w..lo.b {
                loss += 0.5 * self.l2_kernel * p[i] * p[i];
                grad[i] += self.l2_kernel * p[i];
            }
            for i in lo.b..lo.b + GATES * h {
                loss += 0.5 * self.l2_bias * p[i] * p[i];
                grad[i] += self.l2_bias * p[i];
            }
        }
        for i in l.w_out..l.b_out {
            loss += 0.5 * self.l2_kernel * p[i] * p[i];
            grad[i] += self.l2_kernel * p[i];
        }
        for i in l.b_out..l.total {
            loss += 0.5 * self.l2_bias * p[i] * p[i];
            grad[i] += self.l2_bias * p[i];
        }
        (loss, grad)
    }
}

fn accuracy(model: &LstmModel, data: &DynamicDataset) -> f64 {
    if data.sequences.is_empty() {
        return 0.0;
    }
    let correct = data
        .sequences
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| (model.predict(x)[1] > 0.5) == y)
        .count();
    correct as f64 / data.sequences.len() as f64
}

fn keep_mask(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - p;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Minibatch gradient descent with recurrent dropout and early stopping on
/// validation accuracy.
pub fn train_lstm(
    train: &DynamicDataset,
    val: &DynamicDataset,
    config: &PredictorConfig,
) -> Result<LstmModel> {
    if train.sequences.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if train.sequences.iter().any(Vec::is_empty) {
        return Err(Error::InvalidInput("empty sequence in training set".into()));
    }
    if train.labels.iter().all(|&l| l) || train.labels.iter().all(|&l| !l) {
        return Err(Error::InvalidInput("training set needs both classes".into()));
    }
    let d = train.sequences[0][0].len();
    let mut model = LstmModel::init(d, config.layer_width, config);
    let mut rng = ChaCha8Rng::seed_from_u64(super::derive_seed(config.seed, 0x15d0, 0));
    let mut order: Vec<usize> = (0..train.sequences.len()).collect();
    let mut best_params = model.params.clone();
    let mut best_acc = accuracy(&model, val);
    let mut since_best = 0usize;
    for _epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let seqs: Vec<&[Vec<f64>]> = chunk.iter().map(|&i| train.sequences[i].as_slice()).collect();
            let labels: Vec<bool> = chunk.iter().map(|&i| train.labels[i]).collect();
            let masks: Option<Vec<(Vec<f64>, Vec<f64>)>> = if config.dropout > 0.0 {
                Some(
                    (0..seqs.len())
                        .map(|_| {
                            (
                                keep_mask(&mut rng, model.hidden, config.dropout),
                                keep_mask(&mut rng, model.hidden, config.dropout),
                            )
                        })
                        .collect(),
                )
            } else {
                None
            };
            let (loss, mut grad) = model.batch_loss_and_grad(&seqs, &labels, masks.as_deref());
            if !loss.is_finite() {
                return Err(Error::Config(format!(
                    "training diverged (width {}, dropout {})",
                    config.layer_width, config.dropout
                )));
            }
            // global-norm clipping keeps the hotter learning rate stable
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > 5.0 {
                let scale = 5.0 / norm;
                for g in grad.iter_mut() {
                    *g *= scale;
                }
            }
            for (w, g) in model.params.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        if !val.sequences.is_empty() {
            let acc = accuracy(&model, val);
            if acc > best_acc {
                best_acc = acc;
                best_params = model.params.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
            // fully separated: no gradient signal left worth the epochs
            if acc == 1.0 && accuracy(&model, train) == 1.0 {
                best_params = model.params.clone();
                break;
            }
        }
    }
    if !val.sequences.is_empty() {
        model.params = best_params;
    }
    Ok(model)
}
