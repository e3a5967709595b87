//! Viterbi alignment over compiled state networks: forced alignment to a
//! token sequence (with pronunciation alternatives and skippable silence)
//! and the unconstrained phone loop.
//!
//! Determinism: predecessors are enumerated in ascending state index and a
//! candidate replaces the incumbent only on a strictly greater score, so
//! ties resolve to the lowest-indexed predecessor.

use serde::{Deserialize, Serialize};

use super::{EmissionTable, MonophoneHmmSet, PhoneId, STATES_PER_PHONE};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};

/// One slot of an alignment network: a token with one or more pronunciation
/// alternatives. Optional slots may be skipped at no cost.
#[derive(Debug, Clone)]
pub struct AlignToken {
    pub alternatives: Vec<Vec<PhoneId>>,
    pub optional: bool,
}

impl AlignToken {
    pub fn mandatory(phones: Vec<PhoneId>) -> Self {
        AlignToken {
            alternatives: vec![phones],
            optional: false,
        }
    }

    pub fn optional_silence(sil: PhoneId) -> Self {
        AlignToken {
            alternatives: vec![vec![sil]],
            optional: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlignSpec {
    pub tokens: Vec<AlignToken>,
}

impl AlignSpec {
    /// A fixed phone sequence; `optional` marks skippable slots (silence).
    pub fn from_phones(seq: &[(PhoneId, bool)]) -> Self {
        AlignSpec {
            tokens: seq
                .iter()
                .map(|&(p, optional)| AlignToken {
                    alternatives: vec![vec![p]],
                    optional,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArcKind {
    SelfLoop,
    NextState,
    /// Phone boundary within one pronunciation chain.
    NextPhone,
    /// Token boundary (or phone repeat in the loop network).
    CrossSlot,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    pred: u32,
    score: f64,
    boundary: bool,
}

const NO_SLOT: u32 = u32::MAX;

/// A compiled decoding network over the emitting states of a model.
pub struct Network {
    /// Phone of each emitting network state.
    state_phone: Vec<PhoneId>,
    /// Originating spec slot of each state; `NO_SLOT` in the loop network.
    state_slot: Vec<u32>,
    /// Incoming arcs per state, ascending by predecessor index.
    preds: Vec<Vec<Arc>>,
    starts: Vec<u32>,
    finals: Vec<u32>,
}

impl Network {
    /// Compile a forced-alignment network from a token spec.
    pub fn compile(model: &MonophoneHmmSet, spec: &AlignSpec) -> Result<Network> {
        if spec.tokens.is_empty() {
            return Err(Error::InvalidInput("empty alignment token sequence".into()));
        }
        let mut state_phone: Vec<PhoneId> = Vec::new();
        let mut state_slot: Vec<u32> = Vec::new();
        let mut arcs: Vec<(u32, u32, ArcKind)> = Vec::new();
        let mut entries: Vec<Vec<u32>> = Vec::new();
        let mut exits: Vec<Vec<u32>> = Vec::new();
        for (slot, token) in spec.tokens.iter().enumerate() {
            let mut tok_entries = Vec::new();
            let mut tok_exits = Vec::new();
            for alt in &token.alternatives {
                if alt.is_empty() {
                    return Err(Error::InvalidInput("empty pronunciation alternative".into()));
                }
                let mut prev_exit: Option<u32> = None;
                for &phone in alt {
                    if phone >= model.num_phones() {
                        return Err(Error::InvalidInput(format!("phone id {phone} out of range")));
                    }
                    let base = state_phone.len() as u32;
                    for s in 0..STATES_PER_PHONE {
                        let idx = base + s as u32;
                        state_phone.push(phone);
                        state_slot.push(slot as u32);
                        arcs.push((idx, idx, ArcKind::SelfLoop));
                        if s > 0 {
                            arcs.push((idx - 1, idx, ArcKind::NextState));
                        }
                    }
                    if let Some(prev) = prev_exit {
                        arcs.push((prev, base, ArcKind::NextPhone));
                    } else {
                        tok_entries.push(base);
                    }
                    prev_exit = Some(base + STATES_PER_PHONE as u32 - 1);
                }
                tok_exits.push(prev_exit.unwrap());
            }
            entries.push(tok_entries);
            exits.push(tok_exits);
        }
        // cross-token arcs: from each token to every following token reachable
        // by skipping optional slots
        for i in 0..spec.tokens.len() {
            for j in i + 1..spec.tokens.len() {
                for &src in &exits[i] {
                    for &dst in &entries[j] {
                        arcs.push((src, dst, ArcKind::CrossSlot));
                    }
                }
                if !spec.tokens[j].optional {
                    break;
                }
            }
        }
        let mut starts = Vec::new();
        for (i, token) in spec.tokens.iter().enumerate() {
            starts.extend(entries[i].iter().copied());
            if !token.optional {
                break;
            }
        }
        let mut finals = Vec::new();
        for i in (0..spec.tokens.len()).rev() {
            finals.extend(exits[i].iter().copied());
            if !spec.tokens[i].optional {
                break;
            }
        }
        finals.sort_unstable();
        Ok(Network::assemble(model, state_phone, state_slot, arcs, starts, finals))
    }

    /// The unconstrained phone loop: any phone may follow any phone, with
    /// free (probability 1) inter-phone transitions so the loop's path set
    /// dominates every forced path.
    pub fn phone_loop(model: &MonophoneHmmSet) -> Network {
        let n = model.num_phones();
        let mut state_phone = Vec::with_capacity(n * STATES_PER_PHONE);
        let mut arcs = Vec::new();
        for p in 0..n {
            let base = (p * STATES_PER_PHONE) as u32;
            for s in 0..STATES_PER_PHONE {
                let idx = base + s as u32;
                state_phone.push(p);
                arcs.push((idx, idx, ArcKind::SelfLoop));
                if s > 0 {
                    arcs.push((idx - 1, idx, ArcKind::NextState));
                }
            }
        }
        for q in 0..n {
            let src = (q * STATES_PER_PHONE + STATES_PER_PHONE - 1) as u32;
            for p in 0..n {
                arcs.push((src, (p * STATES_PER_PHONE) as u32, ArcKind::CrossSlot));
            }
        }
        let starts = (0..n).map(|p| (p * STATES_PER_PHONE) as u32).collect();
        let finals = (0..n)
            .map(|p| (p * STATES_PER_PHONE + STATES_PER_PHONE - 1) as u32)
            .collect();
        let state_slot = vec![NO_SLOT; state_phone.len()];
        Network::assemble(model, state_phone, state_slot, arcs, starts, finals)
    }

    fn assemble(
        model: &MonophoneHmmSet,
        state_phone: Vec<PhoneId>,
        state_slot: Vec<u32>,
        arcs: Vec<(u32, u32, ArcKind)>,
        starts: Vec<u32>,
        finals: Vec<u32>,
    ) -> Network {
        let n = state_phone.len();
        let mut preds: Vec<Vec<Arc>> = vec![Vec::new(); n];
        for (src, dst, kind) in arcs {
            let src_phone = state_phone[src as usize];
            let src_state = Self::state_of(src);
            let score = match kind {
                ArcKind::SelfLoop => model.trans(src_phone, src_state).log_self,
                ArcKind::NextState => model.trans(src_phone, src_state).log_next,
                // exit the source phone; entering the next one is free
                ArcKind::NextPhone | ArcKind::CrossSlot => model.trans(src_phone, src_state).log_next,
            };
            preds[dst as usize].push(Arc {
                pred: src,
                score,
                boundary: matches!(kind, ArcKind::NextPhone | ArcKind::CrossSlot),
            });
        }
        for list in &mut preds {
            list.sort_by_key(|a| a.pred);
        }
        Network {
            state_phone,
            state_slot,
            preds,
            starts,
            finals,
        }
    }

    fn state_of(idx: u32) -> usize {
        idx as usize % STATES_PER_PHONE
    }

    pub fn num_states(&self) -> usize {
        self.state_phone.len()
    }
}

/// A phone segment of an alignment. `log_likelihood` attributes each frame's
/// emission plus the transition taken into that frame, so segment scores sum
/// exactly to the path total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignedSegment {
    pub phone: PhoneId,
    pub start: usize,
    pub end: usize,
    pub log_likelihood: f64,
    /// Spec slot this segment belongs to; None for phone-loop alignments.
    pub slot: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhoneAlignment {
    pub segments: Vec<AlignedSegment>,
    pub total_log_likelihood: f64,
    pub frame_count: usize,
    pub phone_sequence: Vec<PhoneId>,
    /// Emission log-density of the path state at each frame.
    pub emission_scores: Vec<f64>,
    /// Log-probability of the transition taken into each frame; index 0 is 0.
    pub transition_scores: Vec<f64>,
}

impl PhoneAlignment {
    /// Score of the path restricted to `[start, end)` counting only arcs
    /// internal to the span. This is the numerator span score of the
    /// pronunciation-fit measure.
    pub fn internal_span_score(&self, start: usize, end: usize) -> f64 {
        let mut acc = 0.0;
        for t in start..end {
            acc += self.emission_scores[t];
            if t > start {
                acc += self.transition_scores[t];
            }
        }
        acc
    }
}

struct ViterbiOutcome {
    path: Vec<u32>,
    boundary: Vec<bool>,
    total: f64,
}

/// Core DP over `[start, end)` of the emission table. Returns `None` when no
/// legal path exists.
fn run_viterbi(
    net: &Network,
    table: &EmissionTable,
    start: usize,
    end: usize,
) -> Option<ViterbiOutcome> {
    let n = net.num_states();
    let t_len = end.saturating_sub(start);
    if t_len == 0 || n == 0 {
        return None;
    }
    let emis = |t: usize, ns: usize| -> f64 {
        table.get(start + t, net.state_phone[ns], Network::state_of(ns as u32))
    };
    let mut prev = vec![f64::NEG_INFINITY; n];
    let mut cur = vec![f64::NEG_INFINITY; n];
    // back[t * n + ns]: predecessor and boundary flag of the arc taken;
    // boundary encoded in the top bit
    const BOUNDARY_BIT: u32 = 1 << 31;
    let mut back = vec![u32::MAX; t_len * n];
    for &s in &net.starts {
        prev[s as usize] = emis(0, s as usize);
    }
    for t in 1..t_len {
        let back_row = &mut back[t * n..(t + 1) * n];
        for ns in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_arc = u32::MAX;
            for arc in &net.preds[ns] {
                let base = prev[arc.pred as usize];
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let cand = base + arc.score;
                if cand > best {
                    best = cand;
                    best_arc = arc.pred | if arc.boundary { BOUNDARY_BIT } else { 0 };
                }
            }
            cur[ns] = if best_arc != u32::MAX {
                back_row[ns] = best_arc;
                best + emis(t, ns)
            } else {
                f64::NEG_INFINITY
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_state = u32::MAX;
    for &f in &net.finals {
        if prev[f as usize] > best {
            best = prev[f as usize];
            best_state = f;
        }
    }
    if best == f64::NEG_INFINITY {
        return None;
    }
    let mut path = vec![0u32; t_len];
    let mut boundary = vec![false; t_len];
    let mut state = best_state;
    for t in (0..t_len).rev() {
        path[t] = state;
        if t > 0 {
            let cell = back[t * n + state as usize];
            boundary[t] = cell & BOUNDARY_BIT != 0;
            state = cell & !BOUNDARY_BIT;
        }
    }
    Some(ViterbiOutcome {
        path,
        boundary,
        total: best,
    })
}

fn alignment_from_outcome(net: &Network, table: &EmissionTable, out: &ViterbiOutcome) -> PhoneAlignment {
    let t_len = out.path.len();
    let mut emission_scores = Vec::with_capacity(t_len);
    let mut transition_scores = vec![0.0; t_len];
    for t in 0..t_len {
        let ns = out.path[t] as usize;
        emission_scores.push(table.get(t, net.state_phone[ns], Network::state_of(out.path[t])));
    }
    for t in 1..t_len {
        let ns = out.path[t] as usize;
        let pred = out.path[t - 1];
        let mut score = f64::NEG_INFINITY;
        for arc in &net.preds[ns] {
            if arc.pred == pred {
                score = arc.score;
                break;
            }
        }
        transition_scores[t] = score;
    }
    let mut segments = Vec::new();
    let mut seg_start = 0usize;
    for t in 1..=t_len {
        if t == t_len || out.boundary[t] {
            let first = out.path[seg_start] as usize;
            let phone = net.state_phone[first];
            let slot = match net.state_slot[first] {
                NO_SLOT => None,
                s => Some(s as usize),
            };
            let mut ll = 0.0;
            for u in seg_start..t {
                ll += emission_scores[u];
                if u > 0 {
                    ll += transition_scores[u];
                }
            }
            segments.push(AlignedSegment {
                phone,
                start: seg_start,
                end: t,
                log_likelihood: ll,
                slot,
            });
            seg_start = t;
        }
    }
    let phone_sequence = segments.iter().map(|s| s.phone).collect();
    PhoneAlignment {
        segments,
        total_log_likelihood: out.total,
        frame_count: t_len,
        phone_sequence,
        emission_scores,
        transition_scores,
    }
}

/// Best path exposed as (phone, state) pairs for the EM accumulators.
pub(crate) fn run_viterbi_for_training(
    net: &Network,
    table: &EmissionTable,
) -> Option<(Vec<(PhoneId, usize)>, f64)> {
    let out = run_viterbi(net, table, 0, table.num_frames())?;
    let path = out
        .path
        .iter()
        .map(|&ns| (net.state_phone[ns as usize], Network::state_of(ns)))
        .collect();
    Some((path, out.total))
}

/// Force-align observations to a token spec. Errors when no legal path fits
/// the frame budget (each mandatory phone needs at least three frames).
pub fn viterbi_align(
    model: &MonophoneHmmSet,
    obs: &FeatureMatrix,
    spec: &AlignSpec,
) -> Result<PhoneAlignment> {
    let table = EmissionTable::build(model, &obs.frames);
    viterbi_align_on(model, &table, spec)
}

/// As `viterbi_align` over a pre-computed emission table.
pub fn viterbi_align_on(
    model: &MonophoneHmmSet,
    table: &EmissionTable,
    spec: &AlignSpec,
) -> Result<PhoneAlignment> {
    let net = Network::compile(model, spec)?;
    let out = run_viterbi(&net, table, 0, table.num_frames()).ok_or(Error::AlignmentInfeasible)?;
    Ok(alignment_from_outcome(&net, table, &out))
}

/// Best path through the unconstrained phone loop.
pub fn phone_loop_score(
    model: &MonophoneHmmSet,
    obs: &FeatureMatrix,
) -> Result<(f64, Vec<PhoneId>, PhoneAlignment)> {
    let table = EmissionTable::build(model, &obs.frames);
    phone_loop_score_on(model, &table)
}

/// As `phone_loop_score` over a pre-computed emission table.
pub fn phone_loop_score_on(
    model: &MonophoneHmmSet,
    table: &EmissionTable,
) -> Result<(f64, Vec<PhoneId>, PhoneAlignment)> {
    let net = Network::phone_loop(model);
    let out = run_viterbi(&net, table, 0, table.num_frames()).ok_or(Error::AlignmentInfeasible)?;
    let alignment = alignment_from_outcome(&net, table, &out);
    Ok((
        alignment.total_log_likelihood,
        alignment.phone_sequence.clone(),
        alignment,
    ))
}

/// Best phone-loop score over the frame span `[start, end)` of a
/// pre-computed emission table. The span decode starts at any phone-initial
/// state and ends at any phone-final state, counting only arcs internal to
/// the span, so it dominates any forced segment over the same frames.
pub fn span_loop_score(
    model: &MonophoneHmmSet,
    table: &EmissionTable,
    start: usize,
    end: usize,
) -> Result<f64> {
    let net = Network::phone_loop(model);
    span_loop_score_with(&net, table, start, end)
}

pub(crate) fn span_loop_score_with(
    net: &Network,
    table: &EmissionTable,
    start: usize,
    end: usize,
) -> Result<f64> {
    let out = run_viterbi(net, table, start, end).ok_or(Error::AlignmentInfeasible)?;
    Ok(out.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{GmmState, PhoneHmm, StateTrans};
    use crate::matrix::Matrix;

    fn model_1d(means: &[[f64; 3]], var: f64) -> MonophoneHmmSet {
        let models = means
            .iter()
            .map(|state_means| PhoneHmm {
                states: state_means
                    .iter()
                    .map(|&m| GmmState::single(vec![m], vec![var]))
                    .collect(),
                trans: vec![
                    StateTrans {
                        log_self: 0.5f64.ln(),
                        log_next: 0.5f64.ln(),
                    };
                    3
                ],
            })
            .collect();
        MonophoneHmmSet {
            version: 1,
            phones: (0..means.len()).map(|i| format!("p{i}")).collect(),
            silence: 0,
            dim: 1,
            models,
        }
    }

    fn obs(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(
            Matrix::from_rows(values.iter().map(|&v| vec![v]).collect()),
            0.01,
            0.025,
        )
    }

    #[test]
    fn single_phone_spans_all_frames() {
        let model = model_1d(&[[0.0, 1.0, 2.0]], 0.1);
        let o = obs(&[0.0, 1.0, 2.0, 2.0, 2.0]);
        let a = viterbi_align(&model, &o, &AlignSpec::from_phones(&[(0, false)])).unwrap();
        assert_eq!(a.segments.len(), 1);
        assert_eq!(a.segments[0].start, 0);
        assert_eq!(a.segments[0].end, 5);
        assert!((a.segments[0].log_likelihood - a.total_log_likelihood).abs() < 1e-9);
    }

    #[test]
    fn segments_tile_frames_and_sum_to_total() {
        let model = model_1d(&[[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]], 0.2);
        let o = obs(&[0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0]);
        let spec = AlignSpec::from_phones(&[(0, false), (1, false)]);
        let a = viterbi_align(&model, &o, &spec).unwrap();
        assert_eq!(a.segments.len(), 2);
        assert_eq!(a.segments[0].start, 0);
        assert_eq!(a.segments[0].end, 3);
        assert_eq!(a.segments[1].start, 3);
        assert_eq!(a.segments[1].end, 7);
        let sum: f64 = a.segments.iter().map(|s| s.log_likelihood).sum();
        assert!((sum - a.total_log_likelihood).abs() < 1e-6);
    }

    #[test]
    fn too_few_frames_is_infeasible() {
        let model = model_1d(&[[0.0, 0.0, 0.0]], 0.1);
        let o = obs(&[0.0, 0.0]);
        let err = viterbi_align(&model, &o, &AlignSpec::from_phones(&[(0, false)]));
        assert!(matches!(err, Err(Error::AlignmentInfeasible)));
        let err = Network::compile(&model, &AlignSpec { tokens: vec![] });
        assert!(err.is_err());
    }

    #[test]
    fn optional_silence_is_skippable() {
        let model = model_1d(&[[0.0, 0.0, 0.0], [5.0, 5.0, 5.0], [-9.0, -9.0, -9.0]], 0.2);
        let sil = 2;
        let spec = AlignSpec {
            tokens: vec![
                AlignToken::mandatory(vec![0]),
                AlignToken::optional_silence(sil),
                AlignToken::mandatory(vec![1]),
            ],
        };
        // no silence in the data: silence slot must be skipped
        let o = obs(&[0.0, 0.0, 0.0, 5.0, 5.0, 5.0]);
        let a = viterbi_align(&model, &o, &spec).unwrap();
        assert_eq!(a.phone_sequence, vec![0, 1]);
        // silence present: slot should be used
        let o = obs(&[0.0, 0.0, 0.0, -9.0, -9.0, -9.0, 5.0, 5.0, 5.0]);
        let a = viterbi_align(&model, &o, &spec).unwrap();
        assert_eq!(a.phone_sequence, vec![0, 2, 1]);
        assert_eq!(a.segments[1].start, 3);
        assert_eq!(a.segments[1].end, 6);
    }

    #[test]
    fn loop_dominates_any_forced_sequence() {
        let model = model_1d(&[[0.0, 1.0, 2.0], [4.0, 5.0, 6.0]], 0.3);
        let o = obs(&[0.1, 0.9, 2.2, 4.0, 5.1, 5.9, 6.0, 0.2, 1.0, 2.1]);
        let (loop_ll, _, _) = phone_loop_score(&model, &o).unwrap();
        for seq in [vec![0], vec![1], vec![0, 1], vec![0, 1, 0], vec![1, 0]] {
            let phones: Vec<(PhoneId, bool)> = seq.iter().map(|&p| (p, false)).collect();
            if let Ok(a) = viterbi_align(&model, &o, &AlignSpec::from_phones(&phones)) {
                assert!(
                    loop_ll >= a.total_log_likelihood - 1e-9,
                    "loop {loop_ll} < forced {} for {seq:?}",
                    a.total_log_likelihood
                );
            }
        }
    }

    #[test]
    fn single_phone_loop_equals_best_forced_repeat() {
        let model = model_1d(&[[0.0, 1.0, 2.0]], 0.5);
        let o = obs(&[0.0, 1.0, 2.0, 0.1, 0.9, 2.0, 0.0]);
        let (loop_ll, _, _) = phone_loop_score(&model, &o).unwrap();
        let mut best = f64::NEG_INFINITY;
        for k in 1..=2 {
            let phones: Vec<(PhoneId, bool)> = (0..k).map(|_| (0, false)).collect();
            if let Ok(a) = viterbi_align(&model, &o, &AlignSpec::from_phones(&phones)) {
                best = best.max(a.total_log_likelihood);
            }
        }
        assert!((loop_ll - best).abs() < 1e-9);
    }
}
