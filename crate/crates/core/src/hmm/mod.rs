//! Monophone HMM-GMM acoustic model: three emitting states per phone,
//! left-to-right topology (self-loop + forward only), diagonal-covariance
//! Gaussian mixtures per state.
//!
//! The same model drives forced alignment, the unconstrained phone loop,
//! and decoding; phone-loop scores use free (probability 1) inter-phone
//! transitions so every forced path is also a loop path.

mod align;
mod train;

pub use align::{
    phone_loop_score, phone_loop_score_on, span_loop_score, viterbi_align, viterbi_align_on,
    AlignSpec, AlignToken, AlignedSegment, Network, PhoneAlignment,
};
pub(crate) use align::span_loop_score_with;
pub use train::{default_schedule, flat_start, train_em, StageLog, TrainUtterance, TrainingLog};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const STATES_PER_PHONE: usize = 3;
const MODEL_FILE_VERSION: u32 = 1;

pub type PhoneId = usize;

/// One diagonal-covariance mixture component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gaussian {
    pub log_weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Cached `-0.5 * sum(ln(2*pi*var_d))`; recomputed after load/update.
    #[serde(skip)]
    gconst: f64,
}

impl Gaussian {
    pub fn new(log_weight: f64, mean: Vec<f64>, var: Vec<f64>) -> Self {
        let mut g = Gaussian {
            log_weight,
            mean,
            var,
            gconst: 0.0,
        };
        g.refresh();
        g
    }

    pub fn refresh(&mut self) {
        self.gconst = -0.5
            * self
                .var
                .iter()
                .map(|v| (2.0 * std::f64::consts::PI * v).ln())
                .sum::<f64>();
    }

    pub fn log_pdf(&self, obs: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((&o, &m), &v) in obs.iter().zip(&self.mean).zip(&self.var) {
            let d = o - m;
            acc += d * d / v;
        }
        self.gconst - 0.5 * acc
    }
}

/// Emission distribution of one state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmState {
    pub components: Vec<Gaussian>,
}

impl GmmState {
    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Self {
        GmmState {
            components: vec![Gaussian::new(0.0, mean, var)],
        }
    }

    pub fn log_pdf(&self, obs: &[f64]) -> f64 {
        // streaming log-sum-exp, allocation-free (hot path)
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for c in &self.components {
            let t = c.log_weight + c.log_pdf(obs);
            if t <= max {
                sum += (t - max).exp();
            } else {
                sum = sum * (max - t).exp() + 1.0;
                max = t;
            }
        }
        if !max.is_finite() {
            return max;
        }
        max + sum.ln()
    }
}

/// Per-state transition log-probabilities: stay or advance. The forward
/// transition of the last state is the phone exit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateTrans {
    pub log_self: f64,
    pub log_next: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhoneHmm {
    pub states: Vec<GmmState>,
    pub trans: Vec<StateTrans>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonophoneHmmSet {
    pub version: u32,
    pub phones: Vec<String>,
    pub silence: PhoneId,
    pub dim: usize,
    pub models: Vec<PhoneHmm>,
}

impl MonophoneHmmSet {
    pub fn num_phones(&self) -> usize {
        self.phones.len()
    }

    pub fn phone_id(&self, name: &str) -> Option<PhoneId> {
        self.phones.iter().position(|p| p == name)
    }

    pub fn total_gaussians(&self) -> usize {
        self.models
            .iter()
            .flat_map(|m| m.states.iter())
            .map(|s| s.components.len())
            .sum()
    }

    pub fn state(&self, phone: PhoneId, state: usize) -> &GmmState {
        &self.models[phone].states[state]
    }

    pub fn trans(&self, phone: PhoneId, state: usize) -> StateTrans {
        self.models[phone].trans[state]
    }

    fn refresh_cached(&mut self) {
        for m in &mut self.models {
            for s in &mut m.states {
                for c in &mut s.components {
                    c.refresh();
                }
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut model: MonophoneHmmSet = serde_json::from_str(&text)?;
        if model.version != MODEL_FILE_VERSION {
            return Err(Error::ModelFile(format!(
                "unsupported model file version {}",
                model.version
            )));
        }
        model.refresh_cached();
        Ok(model)
    }

    /// Sanity checks on the stochastic constraints; used by tests and after
    /// deserialization of externally produced files.
    pub fn validate(&self) -> Result<()> {
        for (p, m) in self.models.iter().enumerate() {
            if m.states.len() != STATES_PER_PHONE || m.trans.len() != STATES_PER_PHONE {
                return Err(Error::ModelFile(format!(
                    "phone {} has wrong state count",
                    self.phones[p]
                )));
            }
            for t in &m.trans {
                let row = t.log_self.exp() + t.log_next.exp();
                if (row - 1.0).abs() > 1e-9 {
                    return Err(Error::ModelFile(format!(
                        "transition row of {} sums to {row}",
                        self.phones[p]
                    )));
                }
            }
            for s in &m.states {
                let w: f64 = s.components.iter().map(|c| c.log_weight.exp()).sum();
                if (w - 1.0).abs() > 1e-9 {
                    return Err(Error::ModelFile(format!(
                        "mixture weights of {} sum to {w}",
                        self.phones[p]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-utterance cache of state emission log-densities, `T` frames by
/// `num_phones * STATES_PER_PHONE` global states.
pub struct EmissionTable {
    data: Matrix,
}

impl EmissionTable {
    pub fn build(model: &MonophoneHmmSet, obs: &Matrix) -> Self {
        let n_states = model.num_phones() * STATES_PER_PHONE;
        let mut data = Matrix::zeros(obs.rows(), n_states);
        for t in 0..obs.rows() {
            let frame = obs.row(t);
            for p in 0..model.num_phones() {
                for s in 0..STATES_PER_PHONE {
                    data.set(t, p * STATES_PER_PHONE + s, model.state(p, s).log_pdf(frame));
                }
            }
        }
        EmissionTable { data }
    }

    #[inline]
    pub fn get(&self, t: usize, phone: PhoneId, state: usize) -> f64 {
        self.data.get(t, phone * STATES_PER_PHONE + state)
    }

    pub fn num_frames(&self) -> usize {
        self.data.rows()
    }
}
