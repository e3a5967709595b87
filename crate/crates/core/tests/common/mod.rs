//! Brute-force oracles shared by the integration tests: exhaustive
//! enumeration over duration compositions of fixed state chains, covering
//! forced alignment, the unconstrained phone loop, and the decoder. These
//! deliberately avoid the production DP code paths.

use hdspeech_core::hmm::{GmmState, MonophoneHmmSet, PhoneHmm, PhoneId, StateTrans, STATES_PER_PHONE};
use hdspeech_core::lm::BigramLm;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Build a random 1-D toy model with the given phone count.
pub fn random_toy_model(rng: &mut ChaCha8Rng, num_phones: usize) -> MonophoneHmmSet {
    let models = (0..num_phones)
        .map(|_| PhoneHmm {
            states: (0..STATES_PER_PHONE)
                .map(|_| {
                    GmmState::single(
                        vec![rng.random_range(-3.0..3.0)],
                        vec![rng.random_range(0.05..0.3)],
                    )
                })
                .collect(),
            trans: (0..STATES_PER_PHONE)
                .map(|_| {
                    let p_self: f64 = rng.random_range(0.3..0.7);
                    StateTrans {
                        log_self: p_self.ln(),
                        log_next: (1.0 - p_self).ln(),
                    }
                })
                .collect(),
        })
        .collect();
    MonophoneHmmSet {
        version: 1,
        phones: (0..num_phones).map(|i| format!("p{i}")).collect(),
        silence: 0,
        dim: 1,
        models,
    }
}

fn emission(model: &MonophoneHmmSet, phone: PhoneId, state: usize, frame: &[f64]) -> f64 {
    model.state(phone, state).log_pdf(frame)
}

/// Best score over all duration compositions of a fixed (phone, state)
/// chain, every chain entry occupying at least one frame. Scores emissions,
/// self-loops, and the advance arc into each later chain entry. Returns the
/// score and the per-entry durations.
pub fn chain_best(
    model: &MonophoneHmmSet,
    rows: &[&[f64]],
    chain: &[(PhoneId, usize)],
) -> Option<(f64, Vec<usize>)> {
    let t_len = rows.len();
    let n = chain.len();
    if n == 0 || t_len < n {
        return None;
    }
    fn recurse(
        model: &MonophoneHmmSet,
        rows: &[&[f64]],
        chain: &[(PhoneId, usize)],
        item: usize,
        t: usize,
        acc: f64,
        durs: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let n = chain.len();
        let t_len = rows.len();
        if item == n {
            if t == t_len && best.as_ref().map_or(true, |(b, _)| acc > *b) {
                *best = Some((acc, durs.clone()));
            }
            return;
        }
        let remaining_items = n - item - 1;
        let (phone, state) = chain[item];
        let advance_in = if item > 0 {
            let (pp, ps) = chain[item - 1];
            model.trans(pp, ps).log_next
        } else {
            0.0
        };
        let max_d = t_len - t - remaining_items;
        let mut seg = advance_in;
        for d in 1..=max_d {
            seg += emission(model, phone, state, rows[t + d - 1]);
            if d > 1 {
                seg += model.trans(phone, state).log_self;
            }
            durs.push(d);
            recurse(model, rows, chain, item + 1, t + d, acc + seg, durs, best);
            durs.pop();
        }
    }
    let mut best = None;
    let mut durs = Vec::new();
    recurse(model, rows, chain, 0, 0, 0.0, &mut durs, &mut best);
    best
}

/// Best unconstrained phone-loop score over the rows: enumerate every phone
/// sequence whose minimum length fits, then every composition.
pub fn loop_oracle(model: &MonophoneHmmSet, rows: &[&[f64]]) -> Option<f64> {
    let t_len = rows.len();
    let max_phones = t_len / STATES_PER_PHONE;
    let mut best: Option<f64> = None;
    let mut seq: Vec<PhoneId> = Vec::new();
    fn expand(seq: &[PhoneId]) -> Vec<(PhoneId, usize)> {
        seq.iter()
            .flat_map(|&p| (0..STATES_PER_PHONE).map(move |s| (p, s)))
            .collect()
    }
    fn recurse(
        model: &MonophoneHmmSet,
        rows: &[&[f64]],
        seq: &mut Vec<PhoneId>,
        max_phones: usize,
        best: &mut Option<f64>,
    ) {
        if !seq.is_empty() {
            if let Some((score, _)) = chain_best(model, rows, &expand(seq)) {
                if best.map_or(true, |b| score > b) {
                    *best = Some(score);
                }
            }
        }
        if seq.len() < max_phones {
            for p in 0..model.num_phones() {
                seq.push(p);
                recurse(model, rows, seq, max_phones, best);
                seq.pop();
            }
        }
    }
    recurse(model, rows, &mut seq, max_phones, &mut best);
    best
}

/// An enumerated forced alignment: total score and phone segments.
pub struct OracleAlignment {
    pub score: f64,
    pub segments: Vec<(PhoneId, usize, usize)>,
    /// Internal span score per segment: emissions, self-loops, and the two
    /// within-phone advance arcs; no entry or exit arcs.
    pub internal: Vec<f64>,
}

/// Exhaustive forced alignment of a phone sequence with optional slots
/// (subset enumeration) against the rows.
pub fn forced_oracle(
    model: &MonophoneHmmSet,
    rows: &[&[f64]],
    slots: &[(PhoneId, bool)],
) -> Option<OracleAlignment> {
    let optional_idx: Vec<usize> = slots
        .iter()
        .enumerate()
        .filter(|(_, (_, opt))| *opt)
        .map(|(i, _)| i)
        .collect();
    let mut best: Option<(f64, Vec<PhoneId>, Vec<usize>)> = None;
    for mask in 0..(1u32 << optional_idx.len()) {
        let mut phones: Vec<PhoneId> = Vec::new();
        for (i, &(p, opt)) in slots.iter().enumerate() {
            if opt {
                let bit = optional_idx.iter().position(|&j| j == i).unwrap();
                if mask & (1 << bit) == 0 {
                    continue;
                }
            }
            let _ = opt;
            phones.push(p);
        }
        if phones.is_empty() {
            continue;
        }
        let chain: Vec<(PhoneId, usize)> = phones
            .iter()
            .flat_map(|&p| (0..STATES_PER_PHONE).map(move |s| (p, s)))
            .collect();
        if let Some((score, durs)) = chain_best(model, rows, &chain) {
            if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
                best = Some((score, phones, durs));
            }
        }
    }
    let (score, phones, durs) = best?;
    let mut segments = Vec::new();
    let mut internal = Vec::new();
    let mut at = 0usize;
    for (k, &phone) in phones.iter().enumerate() {
        let seg_start = at;
        let mut span_score = 0.0;
        for s in 0..STATES_PER_PHONE {
            let d = durs[k * STATES_PER_PHONE + s];
            for t in 0..d {
                span_score += emission(model, phone, s, rows[at + t]);
            }
            span_score += (d - 1) as f64 * model.trans(phone, s).log_self;
            if s > 0 {
                span_score += model.trans(phone, s - 1).log_next;
            }
            at += d;
        }
        segments.push((phone, seg_start, at));
        internal.push(span_score);
    }
    Some(OracleAlignment {
        score,
        segments,
        internal,
    })
}

/// Exhaustive decode: enumerate token sequences (with optional silences
/// before, between, and after words), score each by forced alignment plus
/// `lm_scale` times the bigram sequence log-probability, and return the
/// argmax tokens.
pub fn decode_oracle(
    model: &MonophoneHmmSet,
    rows: &[&[f64]],
    vocab: &[(String, Vec<PhoneId>)],
    lm: &BigramLm,
    lm_scale: f64,
) -> Option<Vec<String>> {
    let sil = model.silence;
    let mut best: Option<(f64, Vec<String>)> = None;
    // empty decode: silence only
    if let Some(a) = forced_oracle(model, rows, &[(sil, false)]) {
        let score = a.score + lm_scale * lm.sequence_logprob(&[]).unwrap();
        best = Some((score, Vec::new()));
    }
    fn recurse(
        model: &MonophoneHmmSet,
        rows: &[&[f64]],
        vocab: &[(String, Vec<PhoneId>)],
        lm: &BigramLm,
        lm_scale: f64,
        seq: &mut Vec<usize>,
        min_frames: usize,
        best: &mut Option<(f64, Vec<String>)>,
    ) {
        let sil = model.silence;
        let t_len = rows.len();
        if !seq.is_empty() {
            let mut slots: Vec<(PhoneId, bool)> = vec![(sil, true)];
            for &w in seq.iter() {
                for &p in &vocab[w].1 {
                    slots.push((p, false));
                }
                slots.push((sil, true));
            }
            if let Some(a) = forced_oracle(model, rows, &slots) {
                let tokens: Vec<String> = seq.iter().map(|&w| vocab[w].0.clone()).collect();
                let lm_score = lm.sequence_logprob(&tokens).unwrap();
                let score = a.score + lm_scale * lm_score;
                if best.as_ref().map_or(true, |(b, _)| score > *b) {
                    *best = Some((score, tokens));
                }
            }
        }
        for (w, (_, pron)) in vocab.iter().enumerate() {
            let next_min = min_frames + pron.len() * STATES_PER_PHONE;
            if next_min > t_len {
                continue;
            }
            seq.push(w);
            recurse(model, rows, vocab, lm, lm_scale, seq, next_min, best);
            seq.pop();
        }
    }
    let mut seq = Vec::new();
    recurse(model, rows, vocab, lm, lm_scale, &mut seq, 0, &mut best);
    best.map(|(_, tokens)| tokens)
}
