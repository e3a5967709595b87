//! Annotated transcripts: a simplified machine-readable stand-in for the
//! manual transcription protocol. One file per speaker, utterance blocks
//! with time spans, `&` marks fillers, bracket attributes carry observed
//! pronunciation errors.
//!
//! ```text
//! [utt 0.000 5.200]
//! the old &um banner[intended=banner,phones=b ae n]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::ErrorAnnotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Filler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    pub error: Option<ErrorAnnotation>,
}

impl Token {
    pub fn word(text: &str) -> Self {
        Token {
            text: text.to_string(),
            kind: TokenKind::Word,
            error: None,
        }
    }

    pub fn filler(text: &str) -> Self {
        Token {
            text: text.to_string(),
            kind: TokenKind::Filler,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptUtterance {
    pub start_secs: f64,
    pub end_secs: f64,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTranscript {
    pub utterances: Vec<TranscriptUtterance>,
}

impl AnnotatedTranscript {
    /// All error annotations in utterance order.
    pub fn error_annotations(&self) -> Vec<ErrorAnnotation> {
        self.utterances
            .iter()
            .flat_map(|u| u.tokens.iter())
            .filter_map(|t| t.error.clone())
            .collect()
    }

    /// Utterance spans must be increasing and disjoint.
    pub fn validate(&self) -> Result<()> {
        let mut prev_end = f64::NEG_INFINITY;
        for (i, u) in self.utterances.iter().enumerate() {
            if u.end_secs <= u.start_secs {
                return Err(Error::InvalidInput(format!(
                    "utterance {i} has non-positive duration"
                )));
            }
            if u.start_secs < prev_end {
                return Err(Error::InvalidInput(format!(
                    "utterance {i} overlaps the previous one"
                )));
            }
            prev_end = u.end_secs;
        }
        Ok(())
    }
}

fn parse_token(raw: &str, line: usize) -> Result<Token> {
    let (body, kind) = if let Some(rest) = raw.strip_prefix('&') {
        (rest, TokenKind::Filler)
    } else {
        (raw, TokenKind::Word)
    };
    if let Some(open) = body.find('[') {
        let text = body[..open].to_lowercase();
        let close = body.rfind(']').ok_or(Error::Transcript {
            line,
            message: format!("unclosed annotation in {raw}"),
        })?;
        let mut intended = None;
        let mut phones = None;
        for attr in body[open + 1..close].split(',') {
            let (k, v) = attr.split_once('=').ok_or(Error::Transcript {
                line,
                message: format!("bad attribute {attr}"),
            })?;
            match k.trim() {
                "intended" => intended = Some(v.trim().to_lowercase()),
                "phones" => {
                    phones = Some(v.split_whitespace().map(str::to_string).collect::<Vec<_>>())
                }
                other => {
                    return Err(Error::Transcript {
                        line,
                        message: format!("unknown attribute {other}"),
                    })
                }
            }
        }
        let (intended, produced_phones) = match (intended, phones) {
            (Some(i), Some(p)) if !p.is_empty() => (i, p),
            _ => {
                return Err(Error::Transcript {
                    line,
                    message: "error annotation needs intended= and phones=".into(),
                })
            }
        };
        Ok(Token {
            text,
            kind,
            error: Some(ErrorAnnotation {
                intended,
                produced_phones,
            }),
        })
    } else {
        Ok(Token {
            text: body.to_lowercase(),
            kind,
            error: None,
        })
    }
}

/// Split a token line on whitespace outside bracket annotations.
fn split_tokens(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0usize;
    for ch in line.chars() {
        match ch {
            '[' => {
                depth += 1;
                cur.push(ch);
            }
            ']' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn parse_transcript(text: &str) -> Result<AnnotatedTranscript> {
    let mut utterances: Vec<TranscriptUtterance> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("[utt") {
            let rest = rest.trim_end_matches(']').trim();
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Transcript {
                    line: i + 1,
                    message: "expected [utt <start> <end>]".into(),
                });
            }
            let start: f64 = parts[0].parse().map_err(|_| Error::Transcript {
                line: i + 1,
                message: format!("bad start time {}", parts[0]),
            })?;
            let end: f64 = parts[1].parse().map_err(|_| Error::Transcript {
                line: i + 1,
                message: format!("bad end time {}", parts[1]),
            })?;
            utterances.push(TranscriptUtterance {
                start_secs: start,
                end_secs: end,
                tokens: Vec::new(),
            });
        } else {
            let utt = utterances.last_mut().ok_or(Error::Transcript {
                line: i + 1,
                message: "token line before any [utt ...] header".into(),
            })?;
            for tok in split_tokens(line) {
                utt.tokens.push(parse_token(&tok, i + 1)?);
            }
        }
    }
    let transcript = AnnotatedTranscript { utterances };
    transcript.validate()?;
    Ok(transcript)
}

pub fn load_transcript(path: &std::path::Path) -> Result<AnnotatedTranscript> {
    parse_transcript(&std::fs::read_to_string(path)?)
}

pub fn format_transcript(transcript: &AnnotatedTranscript) -> String {
    let mut out = String::new();
    for u in &transcript.utterances {
        out.push_str(&format!("[utt {:.3} {:.3}]\n", u.start_secs, u.end_secs));
        let mut line = String::new();
        for t in &u.tokens {
            if !line.is_empty() {
                line.push(' ');
            }
            if t.kind == TokenKind::Filler {
                line.push('&');
            }
            line.push_str(&t.text);
            if let Some(err) = &t.error {
                line.push_str(&format!(
                    "[intended={},phones={}]",
                    err.intended,
                    err.produced_phones.join(" ")
                ));
            }
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}
