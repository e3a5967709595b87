//! Feed-forward classifier: two fully connected ReLU layers with dropout
//! after each, softmax output, trained by minibatch gradient descent on
//! cross-entropy with L2 penalties. Parameters live in one flat vector so
//! finite-difference checks can walk them directly.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{PredictorConfig, StaticDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
    pub l2_kernel: f64,
    pub l2_bias: f64,
}

struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    total: usize,
}

fn layout(d: usize, h: usize) -> Layout {
    let w1 = 0;
    let b1 = w1 + h * d;
    let w2 = b1 + h;
    let b2 = w2 + h * h;
    let w3 = b2 + h;
    let b3 = w3 + 2 * h;
    Layout {
        w1,
        b1,
        w2,
        b2,
        w3,
        b3,
        total: b3 + 2,
    }
}

fn softmax2(z: &[f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Dropout masks: value is 0.0 (dropped) or 1/(1-p) (kept, inverted scaling).
fn dropout_mask(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - p;
    (0..len)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

impl MlpModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let l = layout(input_dim, hidden);
        MlpModel {
            input_dim,
            hidden,
            params: vec![0.0; l.total],
            l2_kernel: 0.0,
            l2_bias: 0.0,
        }
    }

    /// Uniform +/- sqrt(6 / (fan_in + fan_out)) weight initialization.
    /// Biases get a small random value: exact zeros would park dead-layer
    /// pre-activations directly on the ReLU kink.
    pub fn init(input_dim: usize, hidden: usize, config: &PredictorConfig) -> Self {
        let l = layout(input_dim, hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; l.total];
        let fill = |range: std::ops::Range<usize>, bound: f64, rng: &mut ChaCha8Rng, params: &mut [f64]| {
            for i in range {
                params[i] = rng.random_range(-bound..bound);
            }
        };
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        fill(l.w1..l.b1, glorot(input_dim, hidden), &mut rng, &mut params);
        fill(l.b1..l.w2, 0.01, &mut rng, &mut params);
        fill(l.w2..l.b2, glorot(hidden, hidden), &mut rng, &mut params);
        fill(l.b2..l.w3, 0.01, &mut rng, &mut params);
        fill(l.w3..l.b3, glorot(hidden, 2), &mut rng, &mut params);
        fill(l.b3..l.total, 0.01, &mut rng, &mut params);
        MlpModel {
            input_dim,
            hidden,
            params,
            l2_kernel: config.l2_kernel,
            l2_bias: config.l2_bias,
        }
    }

    fn forward_parts(&self, x: &[f64], m1: Option<&[f64]>, m2: Option<&[f64]>) -> ForwardState {
        let h = self.hidden;
        let l = layout(self.input_dim, h);
        let p = &self.params;
        let mut z1 = vec![0.0; h];
        for i in 0..h {
            let mut acc = p[l.b1 + i];
            let row = &p[l.w1 + i * self.input_dim..l.w1 + (i + 1) * self.input_dim];
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            z1[i] = acc;
        }
        let mut a1d = vec![0.0; h];
        for i in 0..h {
            let a = z1[i].max(0.0);
            a1d[i] = a * m1.map_or(1.0, |m| m[i]);
        }
        let mut z2 = vec![0.0; h];
        for i in 0..h {
            let mut acc = p[l.b2 + i];
            let row = &p[l.w2 + i * h..l.w2 + (i + 1) * h];
            for (w, av) in row.iter().zip(&a1d) {
                acc += w * av;
            }
            z2[i] = acc;
        }
        let mut a2d = vec![0.0; h];
        for i in 0..h {
            let a = z2[i].max(0.0);
            a2d[i] = a * m2.map_or(1.0, |m| m[i]);
        }
        let mut z3 = [0.0; 2];
        for (c, z) in z3.iter_mut().enumerate() {
            let mut acc = p[l.b3 + c];
            let row = &p[l.w3 + c * h..l.w3 + (c + 1) * h];
            for (w, av) in row.iter().zip(&a2d) {
                acc += w * av;
            }
            *z = acc;
        }
        ForwardState {
            z1,
            a1d,
            z2,
            a2d,
            probs: softmax2(&z3),
        }
    }

    /// Class probabilities (dropout inactive).
    pub fn predict(&self, x: &[f64]) -> [f64; 2] {
        self.forward_parts(x, None, None).probs
    }

    /// Mean cross-entropy over a batch plus L2 penalties, and the gradient
    /// w.r.t. every parameter. Masks, when given, are per-sample dropout
    /// masks for the two hidden layers.
    pub fn batch_loss_and_grad(
        &self,
        rows: &[&[f64]],
        labels: &[bool],
        masks: Option<&[(Vec<f64>, Vec<f64>)]>,
    ) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let d = self.input_dim;
        let l = layout(d, h);
        let p = &self.params;
        let n = rows.len() as f64;
        let mut grad = vec![0.0; l.total];
        let mut loss = 0.0;
        for (s, (&x, &y)) in rows.iter().zip(labels).enumerate() {
            let (m1, m2) = match masks {
                Some(ms) => (Some(ms[s].0.as_slice()), Some(ms[s].1.as_slice())),
                None => (None, None),
            };
            let f = self.forward_parts(x, m1, m2);
            let yi = usize::from(y);
            loss -= f.probs[yi].max(1e-300).ln();
            // dz3 = probs - onehot
            let mut dz3 = [f.probs[0], f.probs[1]];
            dz3[yi] -= 1.0;
            let mut da2d = vec![0.0; h];
            for c in 0..2 {
                let g = dz3[c] / n;
                grad[l.b3 + c] += g;
                for i in 0..h {
                    grad[l.w3 + c * h + i] += g * f.a2d[i];
                    da2d[i] += dz3[c] * p[l.w3 + c * h + i];
                }
            }
            let mut dz2 = vec![0.0; h];
            for i in 0..h {
                let da2 = da2d[i] * m2.map_or(1.0, |m| m[i]);
                dz2[i] = if f.z2[i] > 0.0 { da2 } else { 0.0 };
            }
            let mut da1d = vec![0.0; h];
            for i in 0..h {
                let g = dz2[i] / n;
                grad[l.b2 + i] += g;
                for j in 0..h {
                    grad[l.w2 + i * h + j] += g * f.a1d[j];
                    da1d[j] += dz2[i] * p[l.w2 + i * h + j];
                }
            }
            for i in 0..h {
                let da1 = da1d[i] * m1.map_or(1.0, |m| m[i]);
                let dz1 = if f.z1[i] > 0.0 { da1 } else { 0.0 };
                let g = dz1 / n;
                grad[l.b1 + i] += g;
                for j in 0..d {
                    grad[l.w1 + i * d + j] += g * x[j];
                }
            }
        }
        loss /= n;
        // L2 penalties: kernels and biases with separate coefficients
        let kernel_ranges = [l.w1..l.b1, l.w2..l.b2, l.w3..l.b3];
        let bias_ranges = [l.b1..l.w2, l.b2..l.w3, l.b3..l.total];
        for r in kernel_ranges {
            for i in r {
                loss += 0.5 * self.l2_kernel * p[i] * p[i];
                grad[i] += self.l2_kernel * p[i];
            }
        }
        for r in bias_ranges {
            for i in r {
                loss += 0.5 * self.l2_bias * p[i] * p[i];
                grad[i] += self.l2_bias * p[i];
            }
        }
        (loss, grad)
    }
}

struct ForwardState {
    z1: Vec<f64>,
    a1d: Vec<f64>,
    z2: Vec<f64>,
    a2d: Vec<f64>,
    probs: [f64; 2],
}

fn accuracy(model: &MlpModel, data: &StaticDataset) -> f64 {
    if data.rows.is_empty() {
        return 0.0;
    }
    let correct = data
        .rows
        .iter()
        .zip(&data.labels)
        .filter(|(x, &y)| (model.predict(x)[1] > 0.5) == y)
        .count();
    correct as f64 / data.rows.len() as f64
}

/// Minibatch gradient descent with early stopping on validation accuracy
/// (patience in epochs, best weights kept).
pub fn train_mlp(
    train: &StaticDataset,
    val: &StaticDataset,
    config: &PredictorConfig,
) -> Result<MlpModel> {
    if train.rows.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if train.labels.iter().all(|&l| l) || train.labels.iter().all(|&l| !l) {
        return Err(Error::InvalidInput("training set needs both classes".into()));
    }
    let d = train.rows[0].len();
    let mut model = MlpModel::init(d, config.layer_width, config);
    let mut rng = ChaCha8Rng::seed_from_u64(super::derive_seed(config.seed, 0xd0, 0));
    let mut order: Vec<usize> = (0..train.rows.len()).collect();
    let mut best_params = model.params.clone();
    let mut best_acc = accuracy(&model, val);
    let mut since_best = 0usize;
    for _epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let rows: Vec<&[f64]> = chunk.iter().map(|&i| train.rows[i].as_slice()).collect();
            let labels: Vec<bool> = chunk.iter().map(|&i| train.labels[i]).collect();
            let masks: Option<Vec<(Vec<f64>, Vec<f64>)>> = if config.dropout > 0.0 {
                Some(
                    (0..rows.len())
                        .map(|_| {
                            (
                                dropout_mask(&mut rng, model.hidden, config.dropout),
                                dropout_mask(&mut rng, model.hidden, config.dropout),
                            )
                        })
                        .collect(),
                )
            } else {
                None
            };
            let (loss, grad) = model.batch_loss_and_grad(&rows, &labels, masks.as_deref());
            if !loss.is_finite() {
                return Err(Error::Config(format!(
                    "training diverged (width {}, dropout {})",
                    config.layer_width, config.dropout
                )));
            }
            for (w, g) in model.params.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
        }
        if !val.rows.is_empty() {
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
    if !val.rows.is_empty() {
        model.params = best_params;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Method;

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let model = MlpModel::zeros(3, 4);
        let p = model.predict(&[0.4, -1.0, 2.0]);
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let cfg = PredictorConfig::new(Method::Dnn, 7);
        let model = MlpModel::init(5, 8, &cfg);
        let p = model.predict(&[0.1, 0.2, -0.3, 1.0, -2.0]);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let step = 1e-5;
        for seed in 0..10u64 {
            let cfg = PredictorConfig {
                seed,
                ..PredictorConfig::new(Method::Dnn, seed)
            };
            let mut model = MlpModel::init(3, 4, &cfg);
            model.l2_kernel = 1e-3;
            model.l2_bias = 1e-3;
            let rows_owned = vec![
                vec![0.5, -1.0, 0.3],
                vec![-0.2, 0.8, -0.5],
                vec![1.1, 0.1, 0.9],
            ];
            let rows: Vec<&[f64]> = rows_owned.iter().map(Vec::as_slice).collect();
            let labels = vec![true, false, true];
            let (_, grad) = model.batch_loss_and_grad(&rows, &labels, None);
            let mut max_err = 0.0f64;
            for i in 0..model.params.len() {
                let orig = model.params[i];
                model.params[i] = orig + step;
                let (lp, _) = model.batch_loss_and_grad(&rows, &labels, None);
                model.params[i] = orig - step;
                let (lm, _) = model.batch_loss_and_grad(&rows, &labels, None);
                model.params[i] = orig;
                let fd = (lp - lm) / (2.0 * step);
                let err = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-3);
                max_err = max_err.max(err);
            }
            assert!(max_err < 1e-4, "seed {seed}: max relative error {max_err}");
        }
    }

    #[test]
    fn fits_linearly_separable_toy_set() {
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 1.0],
            vec![1.2, 0.8],
            vec![0.8, 1.3],
            vec![1.1, 1.1],
            vec![-1.0, -1.0],
            vec![-1.2, -0.9],
            vec![-0.8, -1.1],
            vec![-1.1, -1.2],
        ];
        let labels = vec![true, true, true, true, false, false, false, false];
        let train = StaticDataset {
            rows: rows.clone(),
            labels: labels.clone(),
        };
        let mut cfg = PredictorConfig::new(Method::Dnn, 3);
        cfg.layer_width = 4;
        cfg.l2_kernel = 0.0;
        cfg.l2_bias = 0.0;
        let model = train_mlp(&train, &StaticDataset::default(), &cfg).unwrap();
        let correct = rows
            .iter()
            .zip(&labels)
            .filter(|(x, &y)| (model.predict(x)[1] > 0.5) == y)
            .count();
        assert_eq!(correct, 8, "training accuracy must reach 1.0");
    }

    #[test]
    fn fixed_seed_training_is_reproducible() {
        let train = StaticDataset {
            rows: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]],
            labels: vec![true, false, true, false],
        };
        let cfg = PredictorConfig::new(Method::Dnn, 11);
        let a = train_mlp(&train, &StaticDataset::default(), &cfg).unwrap();
        let b = train_mlp(&train, &StaticDataset::default(), &cfg).unwrap();
        assert_eq!(a.params, b.params);
    }
}
