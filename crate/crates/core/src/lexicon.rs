//! Word-to-phone lexicon: base pronunciations from a dictionary file plus
//! error-form augmentation from annotated transcripts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filler tokens recognized by the pipeline.
pub const FILLER_TOKENS: [&str; 4] = ["um", "uh", "ah", "eh"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Lexicon {
    /// Word -> pronunciations, each a phone-name sequence. BTreeMap keeps
    /// iteration (and serialization) order stable.
    pub entries: BTreeMap<String, Vec<Vec<String>>>,
    pub filler_tokens: Vec<String>,
}

impl Lexicon {
    pub fn is_filler(&self, token: &str) -> bool {
        self.filler_tokens.iter().any(|f| f == token)
    }

    pub fn pronunciations(&self, word: &str) -> Option<&Vec<Vec<String>>> {
        self.entries.get(word)
    }

    /// Add a pronunciation unless the word already has an identical one.
    pub fn add_pronunciation(&mut self, word: &str, phones: Vec<String>) -> bool {
        let prons = self.entries.entry(word.to_string()).or_default();
        if prons.iter().any(|p| *p == phones) {
            false
        } else {
            prons.push(phones);
            true
        }
    }

    /// All distinct phones used by any pronunciation, sorted.
    pub fn phone_inventory(&self) -> Vec<String> {
        let mut set: Vec<String> = self
            .entries
            .values()
            .flatten()
            .flatten()
            .cloned()
            .collect();
        set.sort();
        set.dedup();
        set
    }

    pub fn words(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }
}

/// Parse a dictionary file: one `WORD PH1 PH2 ...` per line, alternate
/// pronunciations via repeated word lines, `#` comments allowed. Phone
/// symbols are validated against `phone_set`.
pub fn load_lexicon(path: &Path, phone_set: &[String]) -> Result<Lexicon> {
    let text = std::fs::read_to_string(path)?;
    parse_lexicon(&text, phone_set)
}

pub fn parse_lexicon(text: &str, phone_set: &[String]) -> Result<Lexicon> {
    let mut lex = Lexicon {
        entries: BTreeMap::new(),
        filler_tokens: Vec::new(),
    };
    let mut any = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap().to_lowercase();
        let phones: Vec<String> = parts.map(str::to_string).collect();
        if phones.is_empty() {
            return Err(Error::Lexicon {
                line: i + 1,
                message: format!("no phones for word {word}"),
            });
        }
        for p in &phones {
            if !phone_set.contains(p) {
                return Err(Error::Lexicon {
                    line: i + 1,
                    message: format!("unknown phone symbol {p}"),
                });
            }
        }
        lex.add_pronunciation(&word, phones);
        any = true;
    }
    if !any {
        return Err(Error::Lexicon {
            line: 0,
            message: "empty dictionary".into(),
        });
    }
    lex.filler_tokens = FILLER_TOKENS
        .iter()
        .filter(|f| lex.entries.contains_key(**f))
        .map(|f| f.to_string())
        .collect();
    Ok(lex)
}

/// An observed pronunciation error: the intended word and what was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub intended: String,
    pub produced_phones: Vec<String>,
}

/// Add every observed error form as an alternate pronunciation of the
/// intended word. Idempotent; never removes pronunciations. Words absent
/// from the lexicon are added with only the error form and reported back.
pub fn augment_lexicon(lexicon: &mut Lexicon, annotations: &[ErrorAnnotation]) -> Vec<String> {
    let mut new_words = Vec::new();
    for ann in annotations {
        let word = ann.intended.to_lowercase();
        if !lexicon.entries.contains_key(&word) {
            new_words.push(word.clone());
        }
        lexicon.add_pronunciation(&word, ann.produced_phones.clone());
    }
    new_words
}

/// Render in the dictionary file format (round-trips value-exactly).
pub fn format_lexicon(lexicon: &Lexicon) -> String {
    let mut out = String::new();
    for (word, prons) in &lexicon.entries {
        for pron in prons {
            out.push_str(word);
            for p in pron {
                out.push(' ');
                out.push_str(p);
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phones() -> Vec<String> {
        ["g", "r", "ae", "n", "d", "f", "aa", "dh", "er", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn parses_single_entry() {
        let lex = parse_lexicon("grandfather g r ae n d f aa dh er\n", &phones()).unwrap();
        assert_eq!(lex.entries["grandfather"].len(), 1);
        assert_eq!(lex.entries["grandfather"][0][0], "g");
    }

    #[test]
    fn repeated_word_lines_become_alternates() {
        let text = "banner b ae n er\nbanner b ae n\n";
        let lex = parse_lexicon(text, &phones()).unwrap();
        assert_eq!(lex.entries["banner"].len(), 2);
    }

    #[test]
    fn unknown_phone_is_an_error_with_line_number() {
        let err = parse_lexicon("banner b ae n er\nbad zz\n", &phones()).unwrap_err();
        match err {
            Error::Lexicon { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("zz"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(parse_lexicon("", &phones()).is_err());
        assert!(parse_lexicon("# only a comment\n", &phones()).is_err());
    }

    #[test]
    fn augmentation_is_idempotent_and_monotone() {
        let mut lex = parse_lexicon("banner b ae n er\n", &phones()).unwrap();
        let anns = vec![ErrorAnnotation {
            intended: "banner".into(),
            produced_phones: vec!["b".into(), "ae".into(), "n".into()],
        }];
        let new_words = augment_lexicon(&mut lex, &anns);
        assert!(new_words.is_empty());
        assert_eq!(lex.entries["banner"].len(), 2);
        augment_lexicon(&mut lex, &anns);
        assert_eq!(lex.entries["banner"].len(), 2, "second pass must not change");
    }

    #[test]
    fn unknown_intended_word_is_added_and_reported() {
        let mut lex = parse_lexicon("banner b ae n er\n", &phones()).unwrap();
        let anns = vec![ErrorAnnotation {
            intended: "grand".into(),
            produced_phones: vec!["g".into(), "r".into(), "ae".into()],
        }];
        let new_words = augment_lexicon(&mut lex, &anns);
        assert_eq!(new_words, vec!["grand".to_string()]);
        assert_eq!(lex.entries["grand"].len(), 1);
    }

    #[test]
    fn file_format_round_trip() {
        let mut lex = parse_lexicon("banner b ae n er\nbanner b ae n\n", &phones()).unwrap();
        lex.filler_tokens.clear();
        let text = format_lexicon(&lex);
        let mut back = parse_lexicon(&text, &phones()).unwrap();
        back.filler_tokens.clear();
        assert_eq!(lex.entries, back.entries);
    }
}
