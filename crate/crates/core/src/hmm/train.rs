//! Flat-start initialization and Viterbi-style EM training with binary
//! mixture splitting.
//!
//! Each iteration hard-aligns every utterance with the current model, then
//! re-estimates mixture parameters (soft component responsibilities within
//! the aligned state), mixture weights, and transitions. The per-iteration
//! total alignment log-likelihood is non-decreasing within each mixture
//! stage; splits start a new stage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::align::{run_viterbi_for_training, AlignSpec, Network};
use super::{EmissionTable, Gaussian, GmmState, MonophoneHmmSet, PhoneHmm, StateTrans, STATES_PER_PHONE};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};

/// Occupancy floor under which a state keeps its previous parameters.
const MIN_STATE_OCC: f64 = 1e-8;
/// Transition probability floor; keeps every row usable after training.
const TRANS_FLOOR: f64 = 1e-4;
/// Relative variance floor (fraction of the global per-dimension variance).
const VAR_FLOOR_SCALE: f64 = 1e-3;
/// Absolute variance floor for degenerate (constant) dimensions.
const VAR_FLOOR_ABS: f64 = 1e-8;

/// One training utterance: observations plus its phone-level alignment spec
/// (typically with optional inter-word silences).
pub struct TrainUtterance<'a> {
    pub obs: &'a FeatureMatrix,
    pub spec: AlignSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub stages: Vec<StageLog>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageLog {
    pub target_gaussians: usize,
    /// Total alignment log-likelihood recorded at each E-step.
    pub log_likelihoods: Vec<f64>,
}

/// Initialize every state with one Gaussian at the global data mean and
/// variance, and uniform legal transitions.
pub fn flat_start(
    corpus: &[TrainUtterance<'_>],
    phones: &[String],
    silence: &str,
) -> Result<MonophoneHmmSet> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let silence_id = phones
        .iter()
        .position(|p| p == silence)
        .ok_or_else(|| Error::InvalidInput(format!("silence phone {silence} not in phone set")))?;
    let dim = corpus[0].obs.dim();
    let mut n = 0usize;
    let mut sum = vec![0.0; dim];
    let mut sumsq = vec![0.0; dim];
    for utt in corpus {
        if utt.obs.dim() != dim {
            return Err(Error::InvalidInput("inconsistent feature dimension".into()));
        }
        for t in 0..utt.obs.num_frames() {
            for (d, &v) in utt.obs.frames.row(t).iter().enumerate() {
                sum[d] += v;
                sumsq[d] += v * v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let raw_var: Vec<f64> = sumsq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| sq / n as f64 - m * m)
        .collect();
    let floor: Vec<f64> = raw_var
        .iter()
        .map(|v| (VAR_FLOOR_SCALE * v).max(VAR_FLOOR_ABS))
        .collect();
    let var: Vec<f64> = raw_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
    let models = phones
        .iter()
        .map(|_| PhoneHmm {
            states: (0..STATES_PER_PHONE)
                .map(|_| GmmState::single(mean.clone(), var.clone()))
                .collect(),
            trans: vec![
                StateTrans {
                    log_self: 0.5f64.ln(),
                    log_next: 0.5f64.ln(),
                };
                STATES_PER_PHONE
            ],
        })
        .collect();
    Ok(MonophoneHmmSet {
        version: 1,
        phones: phones.to_vec(),
        silence: silence_id,
        dim,
        models,
    })
}

struct StateAcc {
    occ: f64,
    self_count: f64,
    fwd_count: f64,
    comp_occ: Vec<f64>,
    comp_sum: Vec<Vec<f64>>,
    comp_sumsq: Vec<Vec<f64>>,
}

impl StateAcc {
    fn new(n_comps: usize, dim: usize) -> Self {
        StateAcc {
            occ: 0.0,
            self_count: 0.0,
            fwd_count: 0.0,
            comp_occ: vec![0.0; n_comps],
            comp_sum: vec![vec![0.0; dim]; n_comps],
            comp_sumsq: vec![vec![0.0; dim]; n_comps],
        }
    }

    fn merge(&mut self, other: &StateAcc) {
        self.occ += other.occ;
        self.self_count += other.self_count;
        self.fwd_count += other.fwd_count;
        for c in 0..self.comp_occ.len() {
            self.comp_occ[c] += other.comp_occ[c];
            for d in 0..self.comp_sum[c].len() {
                self.comp_sum[c][d] += other.comp_sum[c][d];
                self.comp_sumsq[c][d] += other.comp_sumsq[c][d];
            }
        }
    }
}

fn accumulate_utterance(
    model: &MonophoneHmmSet,
    utt: &TrainUtterance<'_>,
    net: &Network,
    accs: &mut [StateAcc],
) -> Result<f64> {
    let table = EmissionTable::build(model, &utt.obs.frames);
    let (path_states, total) =
        run_viterbi_for_training(net, &table).ok_or(Error::AlignmentInfeasible)?;
    if !total.is_finite() {
        return Err(Error::TrainingDiverged);
    }
    let t_len = path_states.len();
    for t in 0..t_len {
        let (phone, state) = path_states[t];
        let gidx = phone * STATES_PER_PHONE + state;
        let frame = utt.obs.frames.row(t);
        let acc = &mut accs[gidx];
        acc.occ += 1.0;
        // soft responsibilities within the hard-assigned state
        let gmm = model.state(phone, state);
        let mut terms: Vec<f64> = gmm
            .components
            .iter()
            .map(|c| c.log_weight + c.log_pdf(frame))
            .collect();
        let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in terms.iter_mut() {
            *v = (*v - mx).exp();
            z += *v;
        }
        for (c, r) in terms.iter().enumerate() {
            let resp = r / z;
            acc.comp_occ[c] += resp;
            for (d, &x) in frame.iter().enumerate() {
                acc.comp_sum[c][d] += resp * x;
                acc.comp_sumsq[c][d] += resp * x * x;
            }
        }
        if t + 1 < t_len {
            // in a left-to-right topology a repeated (phone, state) pair can
            // only be a self-loop; anything else charges the forward arc
            if path_states[t + 1] == (phone, state) {
                acc.self_count += 1.0;
            } else {
                acc.fwd_count += 1.0;
            }
        }
    }
    Ok(total)
}

fn reestimate(model: &mut MonophoneHmmSet, accs: &[StateAcc], floor: &[f64]) {
    for p in 0..model.num_phones() {
        for s in 0..STATES_PER_PHONE {
            let acc = &accs[p * STATES_PER_PHONE + s];
            if acc.occ < MIN_STATE_OCC {
                continue; // zero-frame state keeps its parameters
            }
            let total_comp: f64 = acc.comp_occ.iter().sum();
            if total_comp > MIN_STATE_OCC {
                let gmm = &mut model.models[p].states[s];
                let mut new_comps = Vec::with_capacity(gmm.components.len());
                for (c, old) in gmm.components.iter().enumerate() {
                    let occ = acc.comp_occ[c];
                    if occ < MIN_STATE_OCC {
                        // starving component: keep parameters, damp weight
                        new_comps.push(Gaussian::new(
                            (occ.max(1e-10) / total_comp).ln(),
                            old.mean.clone(),
                            old.var.clone(),
                        ));
                        continue;
                    }
                    let mean: Vec<f64> = acc.comp_sum[c].iter().map(|v| v / occ).collect();
                    let var: Vec<f64> = acc.comp_sumsq[c]
                        .iter()
                        .zip(&mean)
                        .enumerate()
                        .map(|(d, (sq, m))| (sq / occ - m * m).max(floor[d]))
                        .collect();
                    new_comps.push(Gaussian::new((occ / total_comp).ln(), mean, var));
                }
                // renormalize weights exactly
                let z: f64 = new_comps.iter().map(|c| c.log_weight.exp()).sum();
                for c in new_comps.iter_mut() {
                    c.log_weight -= z.ln();
                }
                gmm.components = new_comps;
            }
            let trans_total = acc.self_count + acc.fwd_count;
            if trans_total > 0.0 {
                let mut p_self = acc.self_count / trans_total;
                p_self = p_self.clamp(TRANS_FLOOR, 1.0 - TRANS_FLOOR);
                model.models[p].trans[s] = StateTrans {
                    log_self: p_self.ln(),
                    log_next: (1.0 - p_self).ln(),
                };
            }
        }
    }
}

/// Allocate a total Gaussian budget across states by a power rule on state
/// occupancy (exponent 0.2), limited to one component per 10 frames.
fn allocate_targets(occ: &[f64], total: usize) -> Vec<usize> {
    let n = occ.len();
    let raw: Vec<f64> = occ.iter().map(|o| o.max(0.0).powf(0.2)).collect();
    let z: f64 = raw.iter().sum();
    let limit: Vec<usize> = occ.iter().map(|o| ((o / 10.0).floor() as usize).max(1)).collect();
    if z <= 0.0 || total <= n {
        return vec![1; n];
    }
    let mut target: Vec<usize> = raw
        .iter()
        .zip(&limit)
        .map(|(r, &lim)| (((total as f64) * r / z).floor() as usize).clamp(1, lim))
        .collect();
    // distribute any remainder by largest fractional part, respecting limits
    let mut assigned: usize = target.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = (total as f64) * raw[a] / z - target[a] as f64;
        let fb = (total as f64) * raw[b] / z - target[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < total && i < order.len() {
        let s = order[i];
        if target[s] < limit[s] {
            target[s] += 1;
            assigned += 1;
        }
        i += 1;
    }
    target
}

/// Split the heaviest component of a state: two halves with means perturbed
/// by +/- 0.2 standard deviations.
fn split_state(gmm: &mut GmmState, times: usize) {
    for _ in 0..times {
        let heaviest = gmm
            .components
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.log_weight.partial_cmp(&b.1.log_weight).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let base = gmm.components[heaviest].clone();
        let sd: Vec<f64> = base.var.iter().map(|v| v.sqrt()).collect();
        let up: Vec<f64> = base.mean.iter().zip(&sd).map(|(m, s)| m + 0.2 * s).collect();
        let down: Vec<f64> = base.mean.iter().zip(&sd).map(|(m, s)| m - 0.2 * s).collect();
        let half = base.log_weight - 2.0f64.ln();
        gmm.components[heaviest] = Gaussian::new(half, down, base.var.clone());
        gmm.components.push(Gaussian::new(half, up, base.var));
    }
}

/// Viterbi-EM training. `schedule` lists non-decreasing total-Gaussian
/// targets; each stage runs `iterations_per_stage` align/re-estimate passes.
pub fn train_em(
    mut model: MonophoneHmmSet,
    corpus: &[TrainUtterance<'_>],
    iterations_per_stage: usize,
    schedule: &[usize],
) -> Result<(MonophoneHmmSet, TrainingLog)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if schedule.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("mixture schedule must be non-decreasing".into()));
    }
    let dim = model.dim;
    // variance floor from the training data
    let floor = {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        for utt in corpus {
            for t in 0..utt.obs.num_frames() {
                for (d, &v) in utt.obs.frames.row(t).iter().enumerate() {
                    sum[d] += v;
                    sumsq[d] += v * v;
                }
                n += 1;
            }
        }
        (0..dim)
            .map(|d| {
                let m = sum[d] / n as f64;
                let v = sumsq[d] / n as f64 - m * m;
                (VAR_FLOOR_SCALE * v).max(VAR_FLOOR_ABS)
            })
            .collect::<Vec<f64>>()
    };
    let networks: Vec<Network> = corpus
        .iter()
        .map(|u| Network::compile(&model, &u.spec))
        .collect::<Result<_>>()?;
    let mut log = TrainingLog::default();
    let n_states = model.num_phones() * STATES_PER_PHONE;
    let mut last_occ = vec![0.0; n_states];
    for &target in schedule {
        if target > model.total_gaussians() {
            grow_mixtures(&mut model, &last_occ, target);
        }
        let mut stage = StageLog {
            target_gaussians: target,
            log_likelihoods: Vec::new(),
        };
        for _iter in 0..iterations_per_stage {
            let results: Vec<Result<(Vec<StateAcc>, f64)>> = corpus
                .par_iter()
                .zip(networks.par_iter())
                .map(|(utt, net)| {
                    let mut accs: Vec<StateAcc> = (0..n_states)
                        .map(|g| {
                            let p = g / STATES_PER_PHONE;
                            let s = g % STATES_PER_PHONE;
                            StateAcc::new(model.state(p, s).components.len(), dim)
                        })
                        .collect();
                    let ll = accumulate_utterance(&model, utt, net, &mut accs)?;
                    Ok((accs, ll))
                })
                .collect();
            // reduce in utterance order for determinism
            let mut total_ll = 0.0;
            let mut merged: Vec<StateAcc> = (0..n_states)
                .map(|g| {
                    let p = g / STATES_PER_PHONE;
                    let s = g % STATES_PER_PHONE;
                    StateAcc::new(model.state(p, s).components.len(), dim)
                })
                .collect();
            for r in results {
                let (accs, ll) = r?;
                total_ll += ll;
                for (m, a) in merged.iter_mut().zip(&accs) {
                    m.merge(a);
                }
            }
            if !total_ll.is_finite() {
                return Err(Error::TrainingDiverged);
            }
            stage.log_likelihoods.push(total_ll);
            for (g, acc) in merged.iter().enumerate() {
                last_occ[g] = acc.occ;
            }
            reestimate(&mut model, &merged, &floor);
        }
        log.stages.push(stage);
    }
    Ok((model, log))
}

fn grow_mixtures(model: &mut MonophoneHmmSet, occ: &[f64], target_total: usize) {
    let targets = allocate_targets(occ, target_total);
    for p in 0..model.num_phones() {
        for s in 0..STATES_PER_PHONE {
            let want = targets[p * STATES_PER_PHONE + s];
            let have = model.models[p].states[s].components.len();
            if want > have {
                split_state(&mut model.models[p].states[s], want - have);
            }
        }
    }
}

/// Default mixture schedule: double the total every stage from one Gaussian
/// per state up to the cap.
pub fn default_schedule(num_states: usize, cap: usize) -> Vec<usize> {
    let mut schedule = vec![num_states];
    let mut total = num_states;
    while total * 2 <= cap {
        total *= 2;
        schedule.push(total);
    }
    schedule
}
