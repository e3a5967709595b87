//! Synthetic corpus generation: observation streams emitted directly from a
//! generating HMM in feature space (no waveform synthesis), with matching
//! annotated transcripts, a lexicon, a canonical passage, and ground-truth
//! metadata for every injected filler, pause, pronunciation error, and
//! segment boundary.
//!
//! Per-stage effect knobs control speaking rate (state durations), pause
//! and filler injection rates, pronunciation-error probability, and an
//! emission-mean offset that degrades pronunciation fit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classify::derive_seed;
use crate::corpus::{Label, SpeakerRecord, Stage, Utterance};
use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{GmmState, MonophoneHmmSet, PhoneHmm, PhoneId, StateTrans, STATES_PER_PHONE};
use crate::lexicon::FILLER_TOKENS;
use crate::matrix::Matrix;
use crate::transcript::{AnnotatedTranscript, Token, TokenKind, TranscriptUtterance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEffects {
    /// Multiplies mean state durations; > 1 is slower speech.
    pub rate_factor: f64,
    /// Expected pauses per utterance (Poisson).
    pub pause_rate: f64,
    /// Inclusive frame range of one pause.
    pub pause_frames: (usize, usize),
    /// Expected fillers per utterance (Poisson).
    pub filler_rate: f64,
    /// Per-word probability of a pronunciation error.
    pub error_rate: f64,
    /// Magnitude of the speaker's per-phone emission-mean offset.
    pub gop_shift: f64,
}

impl StageEffects {
    pub fn clean() -> Self {
        StageEffects {
            rate_factor: 1.0,
            pause_rate: 0.0,
            pause_frames: (16, 28),
            filler_rate: 0.0,
            error_rate: 0.0,
            gop_shift: 0.0,
        }
    }

    fn validate(&self, stage: &str) -> Result<()> {
        if self.rate_factor <= 0.0
            || self.pause_rate < 0.0
            || self.filler_rate < 0.0
            || !(0.0..=1.0).contains(&self.error_rate)
            || self.gop_shift < 0.0
            || self.pause_frames.0 > self.pause_frames.1
        {
            return Err(Error::InvalidInput(format!("invalid effects for stage {stage}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub control: usize,
    pub premanifest: usize,
    pub early: usize,
    pub late: usize,
}

impl StageCounts {
    pub fn total(&self) -> usize {
        self.control + self.premanifest + self.early + self.late
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    /// Non-silence phone count.
    pub num_phones: usize,
    pub vocab_size: usize,
    pub sentences: usize,
    pub sentence_len: (usize, usize),
    /// Mean frames per HMM state at rate factor 1.
    pub state_duration_mean: f64,
    /// Distance scale between generating state means.
    pub mean_separation: f64,
    /// Emission noise standard deviation (0 = noiseless).
    pub noise_scale: f64,
    pub frame_shift: f64,
    pub counts: StageCounts,
    pub control: StageEffects,
    pub premanifest: StageEffects,
    pub early: StageEffects,
    pub late: StageEffects,
}

impl SynthSpec {
    pub fn effects(&self, stage: Stage) -> &StageEffects {
        match stage {
            Stage::Control => &self.control,
            Stage::Premanifest => &self.premanifest,
            Stage::Early => &self.early,
            Stage::Late => &self.late,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_phones == 0 || self.vocab_size == 0 || self.sentences == 0 {
            return Err(Error::InvalidInput("zero-sized synthetic spec".into()));
        }
        if self.sentence_len.0 == 0 || self.sentence_len.0 > self.sentence_len.1 {
            return Err(Error::InvalidInput("bad sentence length range".into()));
        }
        if self.noise_scale < 0.0 || self.state_duration_mean < 1.0 {
            return Err(Error::InvalidInput("bad noise or duration parameters".into()));
        }
        if 3usize.pow(self.dim as u32) < (self.num_phones + 1) * STATES_PER_PHONE {
            return Err(Error::InvalidInput(
                "dim too small to separate all state means".into(),
            ));
        }
        self.control.validate("control")?;
        self.premanifest.validate("premanifest")?;
        self.early.validate("early")?;
        self.late.validate("late")?;
        Ok(())
    }

    /// Strongly separable populations: every disease stage carries large
    /// effects in rate, pauses, fillers, and pronunciation fit.
    pub fn separable() -> Self {
        let hd = StageEffects {
            rate_factor: 1.6,
            pause_rate: 2.5,
            pause_frames: (18, 30),
            filler_rate: 2.0,
            error_rate: 0.25,
            gop_shift: 0.5,
        };
        SynthSpec {
            dim: 6,
            num_phones: 10,
            vocab_size: 14,
            sentences: 10,
            sentence_len: (4, 7),
            state_duration_mean: 4.0,
            mean_separation: 1.0,
            noise_scale: 0.08,
            frame_shift: 0.01,
            counts: StageCounts {
                control: 10,
                premanifest: 3,
                early: 3,
                late: 4,
            },
            control: StageEffects {
                pause_rate: 0.2,
                filler_rate: 0.1,
                ..StageEffects::clean()
            },
            premanifest: hd,
            early: hd,
            late: hd,
        }
    }

    /// Graded effect sizes: premanifest < early < late.
    pub fn graded() -> Self {
        SynthSpec {
            counts: StageCounts {
                control: 8,
                premanifest: 4,
                early: 4,
                late: 4,
            },
            control: StageEffects {
                pause_rate: 0.15,
                filler_rate: 0.1,
                ..StageEffects::clean()
            },
            premanifest: StageEffects {
                rate_factor: 1.08,
                pause_rate: 0.5,
                pause_frames: (16, 24),
                filler_rate: 0.35,
                error_rate: 0.04,
                gop_shift: 0.1,
            },
            early: StageEffects {
                rate_factor: 1.35,
                pause_rate: 1.5,
                pause_frames: (17, 27),
                filler_rate: 1.0,
                error_rate: 0.12,
                gop_shift: 0.3,
            },
            late: StageEffects {
                rate_factor: 1.7,
                pause_rate: 2.6,
                pause_frames: (18, 30),
                filler_rate: 1.8,
                error_rate: 0.25,
                gop_shift: 0.55,
            },
            ..SynthSpec::separable()
        }
    }

    /// Zero rates, zero noise, zero shift: the decoder must be exact here.
    pub fn noiseless() -> Self {
        SynthSpec {
            noise_scale: 0.0,
            sentences: 6,
            counts: StageCounts {
                control: 4,
                premanifest: 2,
                early: 2,
                late: 2,
            },
            control: StageEffects::clean(),
            premanifest: StageEffects::clean(),
            early: StageEffects::clean(),
            late: StageEffects::clean(),
            ..SynthSpec::separable()
        }
    }

    /// Clean controls, impaired speakers with idiosyncratic pronunciation
    /// errors and shifted emissions: recognition quality must degrade for
    /// the impaired population.
    pub fn asr_noise() -> Self {
        let hd = StageEffects {
            rate_factor: 1.3,
            pause_rate: 1.0,
            pause_frames: (16, 26),
            filler_rate: 0.8,
            error_rate: 0.35,
            gop_shift: 0.35,
        };
        SynthSpec {
            noise_scale: 0.06,
            sentences: 6,
            counts: StageCounts {
                control: 5,
                premanifest: 1,
                early: 2,
                late: 2,
            },
            control: StageEffects::clean(),
            premanifest: hd,
            early: hd,
            late: hd,
            ..SynthSpec::separable()
        }
    }
}

/// Ground-truth segment of a generated utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSegment {
    pub phone: PhoneId,
    pub start: usize,
    pub end: usize,
    /// Token index within the utterance; None for silence.
    pub token: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UttGroundTruth {
    pub segments: Vec<GenSegment>,
    pub pauses: usize,
    pub fillers: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpeakerGroundTruth {
    pub utterances: Vec<UttGroundTruth>,
}

/// A generated corpus plus every shared resource the pipeline needs.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub speakers: Vec<SpeakerRecord>,
    pub phones: Vec<String>,
    pub lexicon_text: String,
    pub passage: Vec<Vec<String>>,
    pub generating_model: MonophoneHmmSet,
    pub ground_truth: Vec<SpeakerGroundTruth>,
}

/// State mean pattern: global state index written in base 3 over `dim`
/// digits, mapped to {-1, 0, +1} and scaled. Distinct states therefore
/// differ by at least `separation` in some dimension.
fn state_mean(global_state: usize, dim: usize, separation: f64) -> Vec<f64> {
    let mut digits = Vec::with_capacity(dim);
    let mut g = global_state;
    for _ in 0..dim {
        digits.push((g % 3) as f64 - 1.0);
        g /= 3;
    }
    digits.iter().map(|d| d * separation).collect()
}

fn build_generating_model(spec: &SynthSpec, phones: &[String]) -> MonophoneHmmSet {
    let var = (spec.noise_scale * spec.noise_scale).max(1e-6);
    // self-loop probability matching the mean state duration
    let p_self = 1.0 - 1.0 / spec.state_duration_mean;
    let p_self = p_self.clamp(0.1, 0.95);
    let models = (0..phones.len())
        .map(|p| PhoneHmm {
            states: (0..STATES_PER_PHONE)
                .map(|s| {
                    GmmState::single(
                        state_mean(p * STATES_PER_PHONE + s, spec.dim, spec.mean_separation),
                        vec![var; spec.dim],
                    )
                })
                .collect(),
            trans: vec![
                StateTrans {
                    log_self: p_self.ln(),
                    log_next: (1.0 - p_self).ln(),
                };
                STATES_PER_PHONE
            ],
        })
        .collect();
    MonophoneHmmSet {
        version: 1,
        phones: phones.to_vec(),
        silence: 0,
        dim: spec.dim,
        models,
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, rate: f64) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let p = Poisson::new(rate).expect("validated rate");
    let v: f64 = p.sample(rng);
    v as usize
}

struct PhonePlanItem {
    phone: PhoneId,
    token: Option<usize>,
    /// explicit total frame count (pauses); None = sample per state
    fixed_frames: Option<usize>,
}

/// Generate the corpus for `spec` with a fixed seed. Byte-identical on
/// regeneration with the same inputs.
pub fn generate_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut phones = vec!["sil".to_string()];
    for i in 0..spec.num_phones {
        phones.push(format!("p{i:02}"));
    }
    let model = build_generating_model(spec, &phones);

    // vocabulary: distinct pronunciations over non-silence phones
    const VOCAB_STREAM: u64 = 0xc0fa_0001;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, VOCAB_STREAM, 0));
    let mut prons: Vec<Vec<PhoneId>> = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut lexicon_text = String::new();
    let mut used: std::collections::BTreeSet<Vec<PhoneId>> = std::collections::BTreeSet::new();
    for f in FILLER_TOKENS {
        loop {
            let len = rng.random_range(1..=2);
            let pron: Vec<PhoneId> = (0..len).map(|_| rng.random_range(1..=spec.num_phones)).collect();
            if used.insert(pron.clone()) {
                lexicon_text.push_str(&format!(
                    "{f} {}\n",
                    pron.iter().map(|&p| phones[p].clone()).collect::<Vec<_>>().join(" ")
                ));
                words.push(f.to_string());
                prons.push(pron);
                break;
            }
        }
    }
    for w in 0..spec.vocab_size {
        let name = format!("w{w:02}");
        loop {
            let len = rng.random_range(2..=4);
            let pron: Vec<PhoneId> = (0..len).map(|_| rng.random_range(1..=spec.num_phones)).collect();
            if used.insert(pron.clone()) {
                lexicon_text.push_str(&format!(
                    "{name} {}\n",
                    pron.iter().map(|&p| phones[p].clone()).collect::<Vec<_>>().join(" ")
                ));
                words.push(name);
                prons.push(pron);
                break;
            }
        }
    }
    let word_pron = |name: &str| -> &Vec<PhoneId> {
        let idx = words.iter().position(|w| w == name).unwrap();
        &prons[idx]
    };

    // passage: fixed sentences of content words, shared by all speakers
    let content_words: Vec<String> = words
        .iter()
        .filter(|w| !FILLER_TOKENS.contains(&w.as_str()))
        .cloned()
        .collect();
    let passage: Vec<Vec<String>> = (0..spec.sentences)
        .map(|_| {
            let len = rng.random_range(spec.sentence_len.0..=spec.sentence_len.1);
            (0..len)
                .map(|_| content_words[rng.random_range(0..content_words.len())].clone())
                .collect()
        })
        .collect();

    // speaker roster: controls first, then stages in order
    let mut roster: Vec<Stage> = Vec::new();
    roster.extend(std::iter::repeat(Stage::Control).take(spec.counts.control));
    roster.extend(std::iter::repeat(Stage::Premanifest).take(spec.counts.premanifest));
    roster.extend(std::iter::repeat(Stage::Early).take(spec.counts.early));
    roster.extend(std::iter::repeat(Stage::Late).take(spec.counts.late));

    // one disease direction per phone, shared by every impaired speaker
    let disease_dirs: Vec<Vec<f64>> = (0..phones.len())
        .map(|_| {
            let dir: Vec<f64> = (0..spec.dim)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v
                })
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
            dir.into_iter().map(|v| v / norm).collect()
        })
        .collect();

    let mut speakers = Vec::with_capacity(roster.len());
    let mut ground_truth = Vec::with_capacity(roster.len());
    for (spk_idx, &stage) in roster.iter().enumerate() {
        let speaker_id = format!("s{spk_idx:02}");
        let label = if stage == Stage::Control { Label::Hc } else { Label::Hd };
        let effects = spec.effects(stage);
        let mut srng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5bea_c0de, spk_idx as u64));

        // emission offset per phone: a corpus-wide disease direction scaled
        // by the stage shift, plus a small speaker-specific wobble
        let offsets: Vec<Vec<f64>> = (0..phones.len())
            .map(|p| {
                let wobble: Vec<f64> = (0..spec.dim)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(&mut srng);
                        v
                    })
                    .collect();
                let wn = wobble.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
                disease_dirs[p]
                    .iter()
                    .zip(&wobble)
                    .map(|(d, w)| (d + 0.2 * w / wn) * effects.gop_shift)
                    .collect()
            })
            .collect();

        let mut utterances = Vec::with_capacity(passage.len());
        let mut transcript = AnnotatedTranscript::default();
        let mut spk_truth = SpeakerGroundTruth::default();
        let mut full_rows: Vec<Vec<f64>> = Vec::new();
        let mut clock_frames = 0usize;

        let max_len = passage.iter().map(Vec::len).max().unwrap() as f64;
        for (ui, sentence) in passage.iter().enumerate() {
            // sentence-driven intensity: longer sentences provoke more
            // events, giving every speaker of a class a shared profile
            let intensity = sentence.len() as f64 / max_len;
            // tokens: sentence words plus fillers at deterministic slots
            let mut tokens: Vec<Token> = sentence.iter().map(|w| Token::word(w)).collect();
            let filler_count = if effects.filler_rate > 0.0 {
                (effects.filler_rate * intensity + 0.5).floor() as usize
                    + usize::from(srng.random::<f64>() < 0.15)
            } else {
                0
            };
            for j in 0..filler_count {
                let pos = ((j + 1) * (tokens.len() + 1) / (filler_count + 1)).min(tokens.len());
                let f = FILLER_TOKENS[(ui + j) % FILLER_TOKENS.len()];
                tokens.insert(pos, Token::filler(f));
            }
            // pronunciation errors on word tokens
            let mut errors = 0usize;
            for tok in tokens.iter_mut() {
                if tok.kind == TokenKind::Word && srng.random::<f64>() < effects.error_rate {
                    let canonical = word_pron(&tok.text).clone();
                    let mut produced = canonical.clone();
                    let pos = srng.random_range(0..produced.len());
                    let mut replacement = srng.random_range(1..=spec.num_phones);
                    while replacement == produced[pos] && spec.num_phones > 1 {
                        replacement = srng.random_range(1..=spec.num_phones);
                    }
                    produced[pos] = replacement;
                    tok.error = Some(crate::lexicon::ErrorAnnotation {
                        intended: tok.text.clone(),
                        produced_phones: produced.iter().map(|&p| phones[p].clone()).collect(),
                    });
                    errors += 1;
                }
            }
            // phone plan with pauses at evenly spread gaps
            let mut plan: Vec<PhonePlanItem> = Vec::new();
            let pause_count = if effects.pause_rate > 0.0 {
                ((effects.pause_rate * intensity + 0.5).floor() as usize
                    + usize::from(srng.random::<f64>() < 0.15))
                .min(tokens.len().saturating_sub(1))
            } else {
                0
            };
            let pause_gaps: Vec<usize> = (0..pause_count)
                .map(|j| ((j + 1) * tokens.len() / (pause_count + 1)).max(1))
                .collect();
            for (ti, tok) in tokens.iter().enumerate() {
                if pause_gaps.contains(&ti) {
                    let lo = effects.pause_frames.0;
                    let hi = effects.pause_frames.1;
                    let mid = (lo + hi) / 2;
                    let jitter = srng.random_range(0..=(hi - lo) / 4 + 1);
                    let frames = (mid + jitter).clamp(lo, hi);
                    plan.push(PhonePlanItem {
                        phone: 0,
                        token: None,
                        fixed_frames: Some(frames),
                    });
                }
                let pron = match &tok.error {
                    Some(ann) => ann
                        .produced_phones
                        .iter()
                        .map(|p| phones.iter().position(|q| q == p).unwrap())
                        .collect::<Vec<_>>(),
                    None => word_pron(&tok.text).clone(),
                };
                for phone in pron {
                    plan.push(PhonePlanItem {
                        phone,
                        token: Some(ti),
                        fixed_frames: None,
                    });
                }
            }
            // emit frames
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut truth = UttGroundTruth {
                pauses: pause_gaps.len(),
                fillers: filler_count,
                errors,
                ..UttGroundTruth::default()
            };
            for item in &plan {
                let seg_start = rows.len();
                let state_frames: [usize; STATES_PER_PHONE] = match item.fixed_frames {
                    Some(total) => {
                        let base = (total / STATES_PER_PHONE).max(1);
                        let mut d = [base; STATES_PER_PHONE];
                        d[1] = total.saturating_sub(2 * base).max(1);
                        d
                    }
                    None => {
                        let mean = spec.state_duration_mean * effects.rate_factor;
                        let mut d = [1usize; STATES_PER_PHONE];
                        for v in d.iter_mut() {
                            *v = 1 + poisson_count(&mut srng, mean - 1.0);
                        }
                        d
                    }
                };
                // impaired offsets scale with sentence intensity; a small
                // shared per-utterance articulation wobble keeps control
                // trajectories structured rather than flat
                let offset_scale = 0.6 + 0.8 * intensity;
                let quality = if spec.noise_scale > 0.0 {
                    0.35 * spec.noise_scale * ((ui % 3) as f64 - 1.0)
                } else {
                    0.0
                };
                for (s, &count) in state_frames.iter().enumerate() {
                    let g = item.phone * STATES_PER_PHONE + s;
                    let mean = state_mean(g, spec.dim, spec.mean_separation);
                    for _ in 0..count {
                        let row: Vec<f64> = (0..spec.dim)
                            .map(|d| {
                                let noise: f64 = if spec.noise_scale > 0.0 {
                                    let v: f64 = StandardNormal.sample(&mut srng);
                                    v * spec.noise_scale
                                } else {
                                    0.0
                                };
                                mean[d]
                                    + offset_scale * offsets[item.phone][d]
                                    + quality * disease_dirs[item.phone][d]
                                    + noise
                            })
                            .collect();
                        rows.push(row);
                    }
                }
                truth.segments.push(GenSegment {
                    phone: item.phone,
                    start: seg_start,
                    end: rows.len(),
                    token: item.token,
                });
            }
            // inter-utterance silence in the full stream
            let gap_frames = 12 + poisson_count(&mut srng, 4.0);
            let sil_mid = STATES_PER_PHONE / 2; // silence phone is index 0
            for _ in 0..gap_frames {
                let mean = state_mean(sil_mid, spec.dim, spec.mean_separation);
                let row: Vec<f64> = (0..spec.dim)
                    .map(|d| {
                        let noise: f64 = if spec.noise_scale > 0.0 {
                            let v: f64 = StandardNormal.sample(&mut srng);
                            v * spec.noise_scale
                        } else {
                            0.0
                        };
                        mean[d] + noise
                    })
                    .collect();
                full_rows.push(row);
            }
            let start_secs = (clock_frames + gap_frames) as f64 * spec.frame_shift;
            let end_secs = start_secs + rows.len() as f64 * spec.frame_shift;
            clock_frames += gap_frames + rows.len();
            full_rows.extend(rows.iter().cloned());

            transcript.utterances.push(TranscriptUtterance {
                start_secs,
                end_secs,
                tokens,
            });
            utterances.push(Utterance {
                index: ui,
                features: FeatureMatrix::new(Matrix::from_rows(rows), spec.frame_shift, 0.025),
            });
            spk_truth.utterances.push(truth);
        }

        let record = SpeakerRecord {
            speaker_id,
            label,
            stage,
            utterances,
            full_features: FeatureMatrix::new(Matrix::from_rows(full_rows), spec.frame_shift, 0.025),
            transcript,
        };
        record.validate()?;
        speakers.push(record);
        ground_truth.push(spk_truth);
    }

    Ok(SyntheticCorpus {
        speakers,
        phones,
        lexicon_text,
        passage,
        generating_model: model,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_spec_has_no_events() {
        let spec = SynthSpec::noiseless();
        let corpus = generate_synthetic_corpus(&spec, 7).unwrap();
        for (spk, truth) in corpus.speakers.iter().zip(&corpus.ground_truth) {
            for (utt, t) in spk.transcript.utterances.iter().zip(&truth.utterances) {
                assert_eq!(t.pauses, 0);
                assert_eq!(t.fillers, 0);
                assert_eq!(t.errors, 0);
                assert!(utt.tokens.iter().all(|tok| tok.kind == TokenKind::Word));
                assert!(utt.tokens.iter().all(|tok| tok.error.is_none()));
            }
        }
    }

    #[test]
    fn fixed_seed_regenerates_identically() {
        let spec = SynthSpec::graded();
        let a = generate_synthetic_corpus(&spec, 42).unwrap();
        let b = generate_synthetic_corpus(&spec, 42).unwrap();
        assert_eq!(a.lexicon_text, b.lexicon_text);
        assert_eq!(a.passage, b.passage);
        assert_eq!(a.ground_truth, b.ground_truth);
        for (x, y) in a.speakers.iter().zip(&b.speakers) {
            assert_eq!(x.speaker_id, y.speaker_id);
            assert_eq!(x.transcript, y.transcript);
            assert_eq!(x.full_features, y.full_features);
            for (u, v) in x.utterances.iter().zip(&y.utterances) {
                assert_eq!(u.features, v.features);
            }
        }
        let c = generate_synthetic_corpus(&spec, 43).unwrap();
        assert_ne!(
            a.speakers[0].full_features, c.speakers[0].full_features,
            "different seeds must differ"
        );
    }

    #[test]
    fn pause_counts_concentrate_near_expectation() {
        // pause rate 2/utterance over 50 utterances: total within +/- 20%
        let mut spec = SynthSpec::separable();
        spec.sentences = 50;
        spec.counts = StageCounts {
            control: 0,
            premanifest: 0,
            early: 0,
            late: 1,
        };
        spec.late.pause_rate = 2.0;
        spec.sentence_len = (6, 8);
        let corpus = generate_synthetic_corpus(&spec, 11).unwrap();
        let total: usize = corpus.ground_truth[0].utterances.iter().map(|u| u.pauses).sum();
        assert!(
            (80..=120).contains(&total),
            "expected about 100 pauses, got {total}"
        );
    }

    #[test]
    fn ground_truth_segments_tile_each_utterance() {
        let corpus = generate_synthetic_corpus(&SynthSpec::graded(), 5).unwrap();
        for (spk, truth) in corpus.speakers.iter().zip(&corpus.ground_truth) {
            for (utt, t) in spk.utterances.iter().zip(&truth.utterances) {
                let mut at = 0;
                for seg in &t.segments {
                    assert_eq!(seg.start, at);
                    assert!(seg.end > seg.start);
                    at = seg.end;
                }
                assert_eq!(at, utt.features.num_frames());
            }
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut spec = SynthSpec::separable();
        spec.late.pause_rate = -1.0;
        assert!(generate_synthetic_corpus(&spec, 1).is_err());
    }
}
