//! Clinically inspired utterance-level features (fillers, pauses, speech
//! rate, pronunciation fit), speaker-dependent z-normalization, speaker-level
//! summary statistics, and variance/information-gain filtering.

pub mod gop;

pub use gop::{compute_gop, GopScore};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::MonophoneHmmSet;
use crate::transcript::TokenKind;
use crate::transcription::{Mode, UtteranceResult};

/// Stable, ordered feature-name list shared by every speaker in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
}

impl FeatureSchema {
    /// Schema for a transcription mode. The filler block is omitted in the
    /// passage-alignment mode, which by construction contains no fillers.
    pub fn for_mode(mode: Mode, model: &MonophoneHmmSet) -> FeatureSchema {
        let mut names = Vec::new();
        if mode != Mode::FaGf {
            for n in [
                "filler_count",
                "fillers_per_sec",
                "fillers_per_word",
                "fillers_per_phone",
                "filler_dur",
                "filler_dur_per_sec",
            ] {
                names.push(n.to_string());
            }
        }
        for n in [
            "pause_count",
            "pauses_per_sec",
            "pauses_per_word",
            "pauses_per_phone",
            "pause_dur",
            "pause_dur_per_sec",
        ] {
            names.push(n.to_string());
        }
        for n in [
            "phone_count",
            "phones_per_sec",
            "phones_per_word",
            "word_count",
            "words_per_sec",
        ] {
            names.push(n.to_string());
        }
        names.push("gop_mean".to_string());
        names.push("gop_min".to_string());
        names.push("gop_sd".to_string());
        for (p, name) in model.phones.iter().enumerate() {
            if p != model.silence {
                names.push(format!("gop_phone_{name}"));
            }
        }
        FeatureSchema { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Feature values for one utterance, ordered by the schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceFeatureVector {
    pub values: Vec<f64>,
    pub duration_secs: f64,
}

/// Utterance features from a transcribed utterance. Pauses are aligned
/// silence runs of at least `pause_min_secs` (inclusive); fillers come from
/// token kinds and their aligned durations; speech-rate counts come from
/// the alignment; pronunciation-fit scores are aggregated per utterance and
/// per phone identity. Fillers do not count as words.
pub fn extract_utterance_features(
    schema: &FeatureSchema,
    model: &MonophoneHmmSet,
    utt: &UtteranceResult,
    gop: &[GopScore],
    mode: Mode,
    pause_min_secs: f64,
) -> Result<UtteranceFeatureVector> {
    let shift = utt.frame_shift;
    let duration = utt.alignment.frame_count as f64 * shift;
    if duration <= 0.0 {
        return Err(Error::InvalidInput("utterance duration must be positive".into()));
    }
    let sil = model.silence;

    let word_count = utt
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Word)
        .count() as f64;
    let filler_count = utt
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Filler)
        .count() as f64;

    // aligned duration of filler tokens
    let mut filler_dur = 0.0;
    for (seg, tok) in utt.alignment.segments.iter().zip(&utt.segment_tokens) {
        if let Some(ti) = tok {
            if utt.tokens[*ti].kind == TokenKind::Filler {
                filler_dur += (seg.end - seg.start) as f64 * shift;
            }
        }
    }

    // pauses: silence segments meeting the threshold
    let mut pause_count = 0.0;
    let mut pause_dur = 0.0;
    for seg in &utt.alignment.segments {
        if seg.phone == sil {
            let d = (seg.end - seg.start) as f64 * shift;
            if d >= pause_min_secs {
                pause_count += 1.0;
                pause_dur += d;
            }
        }
    }

    let phone_count = utt
        .alignment
        .segments
        .iter()
        .filter(|s| s.phone != sil)
        .count() as f64;

    let per_word = |x: f64| if word_count > 0.0 { x / word_count } else { 0.0 };
    let per_phone = |x: f64| if phone_count > 0.0 { x / phone_count } else { 0.0 };

    let mut values = Vec::with_capacity(schema.len());
    if mode != Mode::FaGf {
        values.push(filler_count);
        values.push(filler_count / duration);
        values.push(per_word(filler_count));
        values.push(per_phone(filler_count));
        values.push(filler_dur);
        values.push(filler_dur / duration);
    }
    values.push(pause_count);
    values.push(pause_count / duration);
    values.push(per_word(pause_count));
    values.push(per_phone(pause_count));
    values.push(pause_dur);
    values.push(pause_dur / duration);
    values.push(phone_count);
    values.push(phone_count / duration);
    values.push(per_word(phone_count));
    values.push(word_count);
    values.push(word_count / duration);

    // pronunciation-fit aggregates over non-silence segments
    let scores: Vec<f64> = gop
        .iter()
        .filter(|g| g.phone != sil)
        .map(|g| g.score)
        .collect();
    let (mean, min, sd) = if scores.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let m = scores.iter().sum::<f64>() / scores.len() as f64;
        let v = scores.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / scores.len() as f64;
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        (m, min, v.sqrt())
    };
    values.push(mean);
    values.push(min);
    values.push(sd);
    for p in 0..model.num_phones() {
        if p == sil {
            continue;
        }
        let phone_scores: Vec<f64> = gop
            .iter()
            .filter(|g| g.phone == p)
            .map(|g| g.score)
            .collect();
        let v = if phone_scores.is_empty() {
            0.0
        } else {
            phone_scores.iter().sum::<f64>() / phone_scores.len() as f64
        };
        values.push(v);
    }
    debug_assert_eq!(values.len(), schema.len());
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature value".into()));
    }
    Ok(UtteranceFeatureVector {
        values,
        duration_secs: duration,
    })
}

/// Speaker-dependent z-normalization with the population standard
/// deviation. Zero-variance features (and single-utterance speakers)
/// normalize to zero.
pub fn znormalize_speaker(vectors: &[UtteranceFeatureVector]) -> Vec<UtteranceFeatureVector> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let dim = vectors[0].values.len();
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (d, &x) in v.values.iter().enumerate() {
            mean[d] += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut sd = vec![0.0; dim];
    for v in vectors {
        for (d, &x) in v.values.iter().enumerate() {
            sd[d] += (x - mean[d]) * (x - mean[d]);
        }
    }
    for s in sd.iter_mut() {
        *s = (*s / n).sqrt();
    }
    vectors
        .iter()
        .map(|v| UtteranceFeatureVector {
            values: v
                .values
                .iter()
                .enumerate()
                .map(|(d, &x)| if sd[d] > 0.0 { (x - mean[d]) / sd[d] } else { 0.0 })
                .collect(),
            duration_secs: v.duration_secs,
        })
        .collect()
}

pub const SUMMARY_STATS: [&str; 8] = ["max", "min", "mean", "sd", "range", "q25", "q50", "q75"];

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Eight summary statistics per feature, grouped per feature in schema
/// order: max, min, mean, sd, range, q25, q50, q75.
pub fn summarize_speaker(vectors: &[UtteranceFeatureVector]) -> Vec<f64> {
    assert!(!vectors.is_empty(), "summary of zero utterances");
    let dim = vectors[0].values.len();
    let n = vectors.len() as f64;
    let mut out = Vec::with_capacity(dim * SUMMARY_STATS.len());
    for d in 0..dim {
        let mut vals: Vec<f64> = vectors.iter().map(|v| v.values[d]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let max = *vals.last().unwrap();
        let min = vals[0];
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        out.push(max);
        out.push(min);
        out.push(mean);
        out.push(sd);
        out.push(max - min);
        out.push(quantile(&vals, 0.25));
        out.push(quantile(&vals, 0.50));
        out.push(quantile(&vals, 0.75));
    }
    out
}

/// Names of the summarized (speaker-level) features for a schema.
pub fn summary_names(schema: &FeatureSchema) -> Vec<String> {
    let mut out = Vec::with_capacity(schema.len() * SUMMARY_STATS.len());
    for name in &schema.names {
        for stat in SUMMARY_STATS {
            out.push(format!("{name}_{stat}"));
        }
    }
    out
}

fn entropy(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    let mut h = 0.0;
    for q in [p, 1.0 - p] {
        if q > 0.0 {
            h -= q * q.log2();
        }
    }
    h
}

/// Information gain of a feature after median-split binarization.
pub fn information_gain(values: &[f64], labels: &[bool]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = quantile(&sorted, 0.5);
    let total = values.len() as f64;
    let pos_total = labels.iter().filter(|&&l| l).count() as f64;
    let mut lo_n = 0.0;
    let mut lo_pos = 0.0;
    let mut hi_n = 0.0;
    let mut hi_pos = 0.0;
    for (&v, &l) in values.iter().zip(labels) {
        if v <= median {
            lo_n += 1.0;
            if l {
                lo_pos += 1.0;
            }
        } else {
            hi_n += 1.0;
            if l {
                hi_pos += 1.0;
            }
        }
    }
    let h_class = entropy(pos_total, total);
    let h_cond = (lo_n / total) * entropy(lo_pos, lo_n) + (hi_n / total) * entropy(hi_pos, hi_n);
    h_class - h_cond
}

pub const VARIANCE_EPS: f64 = 1e-12;
pub const INFO_GAIN_EPS: f64 = 1e-12;

/// Indices of features that survive the zero-variance and
/// zero-information-gain filters, computed on training rows only.
pub fn filter_features(rows: &[Vec<f64>], labels: &[bool]) -> Result<Vec<usize>> {
    filter_features_with(rows, labels, VARIANCE_EPS, INFO_GAIN_EPS)
}

/// As `filter_features` with explicit thresholds.
pub fn filter_features_with(
    rows: &[Vec<f64>],
    labels: &[bool],
    variance_eps: f64,
    info_gain_eps: f64,
) -> Result<Vec<usize>> {
    if rows.len() < 2 {
        return Err(Error::InvalidInput("need at least two rows to filter".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::InvalidInput("both classes required for filtering".into()));
    }
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mut retained = Vec::new();
    for d in 0..dim {
        let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        if var < variance_eps {
            continue;
        }
        if information_gain(&col, labels) < info_gain_eps {
            continue;
        }
        retained.push(d);
    }
    if retained.is_empty() {
        return Err(Error::NoInformativeFeatures);
    }
    Ok(retained)
}

/// Project rows onto retained feature indices.
pub fn apply_filter(rows: &[Vec<f64>], retained: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| retained.iter().map(|&d| r[d]).collect())
        .collect()
}
