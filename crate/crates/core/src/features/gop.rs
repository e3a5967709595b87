//! Pronunciation-fit scoring: per-phone normalized log-likelihood ratio
//! between the forced alignment and an unconstrained phone loop decoded
//! over the same frame span.
//!
//! For a forced segment on `[s, e)` the numerator is the forced path's
//! span score (emissions plus arcs internal to the span) and the
//! denominator is the best phone-loop path over exactly those frames. The
//! loop starts at any phone-initial state and ends at any phone-final
//! state, so the forced segment is always one of its candidate paths and
//! the score never exceeds zero.

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureMatrix;
use crate::error::Result;
use crate::hmm::{span_loop_score_with, EmissionTable, MonophoneHmmSet, Network, PhoneAlignment, PhoneId};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GopScore {
    pub phone: PhoneId,
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Per-segment scores for every segment of `forced`, silence included;
/// callers decide which segments feed features.
pub fn compute_gop(
    model: &MonophoneHmmSet,
    obs: &FeatureMatrix,
    forced: &PhoneAlignment,
) -> Result<Vec<GopScore>> {
    let net = Network::phone_loop(model);
    let table = EmissionTable::build(model, &obs.frames);
    let mut out = Vec::with_capacity(forced.segments.len());
    for seg in &forced.segments {
        let numerator = forced.internal_span_score(seg.start, seg.end);
        let denominator = span_loop_score_with(&net, &table, seg.start, seg.end)?;
        out.push(GopScore {
            phone: seg.phone,
            start: seg.start,
            end: seg.end,
            score: (numerator - denominator) / (seg.end - seg.start) as f64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{viterbi_align, AlignSpec, GmmState, MonophoneHmmSet, PhoneHmm, StateTrans};
    use crate::matrix::Matrix;

    fn model_1d(means: &[[f64; 3]], var: f64) -> MonophoneHmmSet {
        let models = means
            .iter()
            .map(|m| PhoneHmm {
                states: m.iter().map(|&x| GmmState::single(vec![x], vec![var])).collect(),
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
    fn perfectly_matching_segment_scores_zero() {
        // single phone in the set: the loop over a forced segment's span can
        // only be that phone, so numerator equals denominator
        let model = model_1d(&[[0.0, 1.0, 2.0]], 0.2);
        let o = obs(&[0.0, 1.0, 2.0, 2.1]);
        let forced = viterbi_align(&model, &o, &AlignSpec::from_phones(&[(0, false)])).unwrap();
        let gop = compute_gop(&model, &o, &forced).unwrap();
        assert_eq!(gop.len(), 1);
        assert!(gop[0].score.abs() < 1e-12);
    }

    #[test]
    fn scores_never_positive() {
        let model = model_1d(&[[0.0, 1.0, 2.0], [5.0, 6.0, 7.0]], 0.4);
        let o = obs(&[0.2, 1.1, 1.9, 5.2, 6.0, 6.8, 7.0, 0.1, 0.8, 2.0]);
        let spec = AlignSpec::from_phones(&[(0, false), (1, false), (0, false)]);
        let forced = viterbi_align(&model, &o, &spec).unwrap();
        for g in compute_gop(&model, &o, &forced).unwrap() {
            assert!(g.score <= 1e-9, "GoP {} for phone {}", g.score, g.phone);
        }
    }

    #[test]
    fn eq_arithmetic_ten_frames() {
        // (-110 - -100) / 10 = -1.0
        assert_eq!((-110.0f64 - -100.0) / 10.0, -1.0);
    }

    #[test]
    fn mismatched_phone_scores_negative() {
        let model = model_1d(&[[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]], 0.2);
        // force phone 0 against data that matches phone 1
        let o = obs(&[5.0, 5.1, 4.9, 5.0]);
        let forced = viterbi_align(&model, &o, &AlignSpec::from_phones(&[(0, false)])).unwrap();
        let gop = compute_gop(&model, &o, &forced).unwrap();
        assert!(gop[0].score < -1.0, "expected strongly negative, got {}", gop[0].score);
    }
}
