//! The three transcription regimes: forced alignment to oracle transcripts,
//! forced alignment to the canonical passage, and recognition with known
//! segmentation. Each yields per-utterance token sequences, phone
//! alignments, and phone-loop scores.

pub mod decoder;
pub mod wer;

pub use decoder::decode_utterance;
pub use wer::{compute_wer, WerBreakdown};

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{
    phone_loop_score_on, viterbi_align, viterbi_align_on, AlignSpec, AlignToken, EmissionTable,
    MonophoneHmmSet, PhoneAlignment, PhoneId,
};
use crate::lexicon::Lexicon;
use crate::lm::BigramLm;
use crate::matrix::Matrix;
use crate::transcript::{AnnotatedTranscript, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    FaOrat,
    FaGf,
    Asrt,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FaOrat, Mode::FaGf, Mode::Asrt];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::FaOrat => "fa-orat",
            Mode::FaGf => "fa-gf",
            Mode::Asrt => "asrt",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s.to_lowercase().as_str() {
            "fa-orat" | "orat" => Ok(Mode::FaOrat),
            "fa-gf" | "gf" => Ok(Mode::FaGf),
            "asrt" | "asr" => Ok(Mode::Asrt),
            other => Err(Error::Config(format!("unknown mode {other}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One transcribed utterance. `segment_tokens[i]` maps alignment segment `i`
/// back to an index into `tokens`; silence segments map to None.
#[derive(Debug, Clone)]
pub struct UtteranceResult {
    pub index: usize,
    pub tokens: Vec<Token>,
    pub alignment: PhoneAlignment,
    pub segment_tokens: Vec<Option<usize>>,
    pub phone_loop_ll: f64,
    pub frame_shift: f64,
    /// The observation stream the alignment refers to (needed downstream
    /// for span-restricted pronunciation-fit scoring).
    pub obs: FeatureMatrix,
}

#[derive(Debug, Clone)]
pub struct TranscriptionResult {
    pub mode: Mode,
    pub speaker_id: String,
    pub utterances: Vec<UtteranceResult>,
    /// Utterance indices flagged infeasible and excluded.
    pub skipped: Vec<usize>,
}

/// Expand tokens into an alignment spec with optional leading, inter-word,
/// and trailing silences, using the inventory order for phone ids (usable
/// before an acoustic model exists). Returns the spec and, per slot, the
/// index of the token it covers (None for silence slots).
pub fn align_spec_for_phones(
    phones: &[String],
    silence: PhoneId,
    lexicon: &Lexicon,
    tokens: &[Token],
) -> Result<(AlignSpec, Vec<Option<usize>>)> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput("no tokens to align".into()));
    }
    let phone_id = |name: &str| -> Result<PhoneId> {
        phones
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::InvalidInput(format!("phone {name} not in inventory")))
    };
    let mut spec_tokens = Vec::with_capacity(tokens.len() * 2 + 1);
    let mut slot_tokens = Vec::with_capacity(tokens.len() * 2 + 1);
    spec_tokens.push(AlignToken::optional_silence(silence));
    slot_tokens.push(None);
    for (i, tok) in tokens.iter().enumerate() {
        let prons = lexicon
            .pronunciations(&tok.text)
            .ok_or_else(|| Error::OutOfVocab(tok.text.clone()))?;
        let mut alternatives = Vec::with_capacity(prons.len());
        for pron in prons {
            alternatives.push(pron.iter().map(|p| phone_id(p)).collect::<Result<Vec<_>>>()?);
        }
        spec_tokens.push(AlignToken {
            alternatives,
            optional: false,
        });
        slot_tokens.push(Some(i));
        spec_tokens.push(AlignToken::optional_silence(silence));
        slot_tokens.push(None);
    }
    Ok((
        AlignSpec {
            tokens: spec_tokens,
        },
        slot_tokens,
    ))
}

/// As `align_spec_for_phones`, resolving phone ids through the model.
pub fn build_align_spec(
    model: &MonophoneHmmSet,
    lexicon: &Lexicon,
    tokens: &[Token],
) -> Result<(AlignSpec, Vec<Option<usize>>)> {
    align_spec_for_phones(&model.phones, model.silence, lexicon, tokens)
}

fn align_utterance(
    model: &MonophoneHmmSet,
    obs: &FeatureMatrix,
    lexicon: &Lexicon,
    tokens: Vec<Token>,
    index: usize,
) -> Result<UtteranceResult> {
    let (spec, slot_tokens) = build_align_spec(model, lexicon, &tokens)?;
    let table = EmissionTable::build(model, &obs.frames);
    let alignment = viterbi_align_on(model, &table, &spec)?;
    let segment_tokens = alignment
        .segments
        .iter()
        .map(|seg| seg.slot.and_then(|s| slot_tokens[s]))
        .collect();
    let (phone_loop_ll, _, _) = phone_loop_score_on(model, &table)?;
    Ok(UtteranceResult {
        index,
        tokens,
        alignment,
        segment_tokens,
        phone_loop_ll,
        frame_shift: obs.frame_shift,
        obs: obs.clone(),
    })
}

/// Force-align each utterance to its manual transcript tokens (fillers
/// included). Infeasible utterances are flagged and excluded.
pub fn prepare_fa_orat(
    speaker_id: &str,
    utterance_obs: &[FeatureMatrix],
    transcript: &AnnotatedTranscript,
    model: &MonophoneHmmSet,
    lexicon: &Lexicon,
) -> Result<TranscriptionResult> {
    if utterance_obs.len() != transcript.utterances.len() {
        return Err(Error::InvalidInput(format!(
            "speaker {speaker_id}: {} observation streams vs {} transcript utterances",
            utterance_obs.len(),
            transcript.utterances.len()
        )));
    }
    let mut result = TranscriptionResult {
        mode: Mode::FaOrat,
        speaker_id: speaker_id.to_string(),
        utterances: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, (obs, utt)) in utterance_obs.iter().zip(&transcript.utterances).enumerate() {
        match align_utterance(model, obs, lexicon, utt.tokens.clone(), i) {
            Ok(u) => result.utterances.push(u),
            Err(Error::AlignmentInfeasible) | Err(Error::UtteranceTooShort) => {
                result.skipped.push(i);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

/// Align the whole recording to the canonical passage text, then split into
/// one utterance per sentence. The result never contains fillers.
pub fn prepare_fa_gf(
    speaker_id: &str,
    full_obs: &FeatureMatrix,
    passage: &[Vec<String>],
    model: &MonophoneHmmSet,
    lexicon: &Lexicon,
) -> Result<TranscriptionResult> {
    if passage.is_empty() {
        return Err(Error::InvalidInput("empty passage".into()));
    }
    let tokens: Vec<Token> = passage
        .iter()
        .flat_map(|sentence| sentence.iter().map(|w| Token::word(w)))
        .collect();
    let mut sentence_of: Vec<usize> = Vec::with_capacity(tokens.len());
    for (si, sentence) in passage.iter().enumerate() {
        sentence_of.extend(std::iter::repeat(si).take(sentence.len()));
    }
    let (spec, slot_tokens) = build_align_spec(model, lexicon, &tokens)?;
    let alignment = viterbi_align(model, full_obs, &spec)?;
    let seg_token: Vec<Option<usize>> = alignment
        .segments
        .iter()
        .map(|seg| seg.slot.and_then(|s| slot_tokens[s]))
        .collect();

    // frame range per sentence: first to last frame of its word segments
    let mut ranges: Vec<Option<(usize, usize)>> = vec![None; passage.len()];
    for (seg, tok) in alignment.segments.iter().zip(&seg_token) {
        if let Some(ti) = tok {
            let si = sentence_of[*ti];
            let r = ranges[si].get_or_insert((seg.start, seg.end));
            r.0 = r.0.min(seg.start);
            r.1 = r.1.max(seg.end);
        }
    }
    let mut result = TranscriptionResult {
        mode: Mode::FaGf,
        speaker_id: speaker_id.to_string(),
        utterances: Vec::new(),
        skipped: Vec::new(),
    };
    for (si, sentence) in passage.iter().enumerate() {
        let (start, end) = match ranges[si] {
            Some(r) => r,
            None => {
                result.skipped.push(si);
                continue;
            }
        };
        let rows: Vec<Vec<f64>> = (start..end)
            .map(|t| full_obs.frames.row(t).to_vec())
            .collect();
        let sub = FeatureMatrix::new(
            Matrix::from_rows(rows),
            full_obs.frame_shift,
            full_obs.frame_length,
        );
        let sent_tokens: Vec<Token> = sentence.iter().map(|w| Token::word(w)).collect();
        match align_utterance(model, &sub, lexicon, sent_tokens, si) {
            Ok(u) => result.utterances.push(u),
            Err(Error::AlignmentInfeasible) => result.skipped.push(si),
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

/// Decode each segmented utterance, then force-align it to its own decoded
/// tokens. Utterances that decode to nothing are flagged and excluded.
pub fn prepare_asrt(
    speaker_id: &str,
    utterance_obs: &[FeatureMatrix],
    model: &MonophoneHmmSet,
    lexicon: &Lexicon,
    lm: &BigramLm,
    lm_scale: f64,
) -> Result<TranscriptionResult> {
    let mut result = TranscriptionResult {
        mode: Mode::Asrt,
        speaker_id: speaker_id.to_string(),
        utterances: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, obs) in utterance_obs.iter().enumerate() {
        let decoded = match decode_utterance(model, obs, lexicon, lm, lm_scale) {
            Ok(tokens) => tokens,
            Err(Error::AlignmentInfeasible) => {
                result.skipped.push(i);
                continue;
            }
            Err(e) => return Err(e),
        };
        if decoded.is_empty() {
            result.skipped.push(i);
            continue;
        }
        match align_utterance(model, obs, lexicon, decoded, i) {
            Ok(u) => result.utterances.push(u),
            Err(Error::AlignmentInfeasible) => result.skipped.push(i),
            Err(e) => return Err(e),
        }
    }
    Ok(result)
}

pub fn token_texts(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.text.clone()).collect()
}

pub fn has_fillers(result: &TranscriptionResult) -> bool {
    result
        .utterances
        .iter()
        .any(|u| u.tokens.iter().any(|t| t.kind == TokenKind::Filler))
}
