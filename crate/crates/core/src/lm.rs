//! Bigram language model with add-one smoothing over a closed vocabulary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BigramLm {
    /// Real tokens (no markers), sorted.
    pub vocab: Vec<String>,
    /// counts[history][next]; histories are tokens plus `<s>`, successors
    /// are tokens plus `</s>`.
    counts: BTreeMap<String, BTreeMap<String, u64>>,
    history_totals: BTreeMap<String, u64>,
}

impl BigramLm {
    /// Maximum-likelihood bigram counts from token sequences; sentence
    /// start/end markers are added per sequence.
    pub fn train(sequences: &[Vec<String>]) -> Result<BigramLm> {
        if sequences.iter().all(|s| s.is_empty()) {
            return Err(Error::EmptyCorpus);
        }
        let mut vocab: Vec<String> = sequences.iter().flatten().cloned().collect();
        vocab.sort();
        vocab.dedup();
        let mut counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        let mut history_totals: BTreeMap<String, u64> = BTreeMap::new();
        for seq in sequences {
            let mut prev = SENTENCE_START.to_string();
            for tok in seq.iter().chain(std::iter::once(&SENTENCE_END.to_string())) {
                *counts.entry(prev.clone()).or_default().entry(tok.clone()).or_insert(0) += 1;
                *history_totals.entry(prev).or_insert(0) += 1;
                prev = tok.clone();
            }
        }
        Ok(BigramLm {
            vocab,
            counts,
            history_totals,
        })
    }

    fn successor_vocab_size(&self) -> u64 {
        self.vocab.len() as u64 + 1 // tokens plus </s>
    }

    fn check_token(&self, token: &str) -> Result<()> {
        if token == SENTENCE_START || token == SENTENCE_END || self.vocab.iter().any(|v| v == token)
        {
            Ok(())
        } else {
            Err(Error::OutOfVocab(token.to_string()))
        }
    }

    /// Smoothed conditional probability `p(next | history)`.
    pub fn prob(&self, history: &str, next: &str) -> Result<f64> {
        self.check_token(history)?;
        self.check_token(next)?;
        let c = self
            .counts
            .get(history)
            .and_then(|m| m.get(next))
            .copied()
            .unwrap_or(0);
        let total = self.history_totals.get(history).copied().unwrap_or(0);
        Ok((c as f64 + 1.0) / (total as f64 + self.successor_vocab_size() as f64))
    }

    pub fn log_prob(&self, history: &str, next: &str) -> Result<f64> {
        Ok(self.prob(history, next)?.ln())
    }

    /// Log-probability of a full token sequence including start/end
    /// transitions. The empty sequence scores `log p(</s> | <s>)`.
    pub fn sequence_logprob(&self, tokens: &[String]) -> Result<f64> {
        let mut acc = 0.0;
        let mut prev = SENTENCE_START;
        for tok in tokens {
            acc += self.log_prob(prev, tok)?;
            prev = tok;
        }
        acc += self.log_prob(prev, SENTENCE_END)?;
        Ok(acc)
    }

    /// Plain-text table of raw counts for inspection: `history next count`.
    pub fn export_counts(&self) -> String {
        let mut out = String::new();
        for (h, succ) in &self.counts {
            for (w, c) in succ {
                out.push_str(&format!("{h} {w} {c}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn add_one_counts_match_hand_computation() {
        let lm = BigramLm::train(&[toks("a b a b")]).unwrap();
        // count(a->b)=2, count(a->.)=2, successors {a,b,</s>} -> V=3
        assert!((lm.prob("a", "b").unwrap() - 0.6).abs() < 1e-12);
        // unseen bigram b->b still positive: (0+1)/(2+3)
        assert!((lm.prob("b", "b").unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one_for_every_history() {
        let lm = BigramLm::train(&[toks("a b a b"), toks("b a"), toks("a")]).unwrap();
        let mut histories = vec![SENTENCE_START.to_string()];
        histories.extend(lm.vocab.clone());
        for h in &histories {
            let mut sum = 0.0;
            for w in lm.vocab.iter().map(String::as_str).chain(std::iter::once(SENTENCE_END)) {
                sum += lm.prob(h, w).unwrap();
            }
            assert!((sum - 1.0).abs() < 1e-9, "row {h} sums to {sum}");
        }
    }

    #[test]
    fn single_token_corpus_is_well_defined() {
        let lm = BigramLm::train(&[toks("a")]).unwrap();
        assert!(lm.prob("<s>", "a").unwrap() > 0.0);
        assert!(lm.prob("a", "</s>").unwrap() > 0.0);
    }

    #[test]
    fn sequence_logprob_sums_the_smoothed_terms() {
        let lm = BigramLm::train(&[toks("a b a b")]).unwrap();
        let expect = lm.log_prob("<s>", "a").unwrap()
            + lm.log_prob("a", "b").unwrap()
            + lm.log_prob("b", "</s>").unwrap();
        let got = lm.sequence_logprob(&toks("a b")).unwrap();
        assert!((got - expect).abs() < 1e-12);
        assert!(got <= 0.0);
        // empty sequence = boundary-only
        let empty = lm.sequence_logprob(&[]).unwrap();
        assert!((empty - lm.log_prob("<s>", "</s>").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn oov_token_is_an_error() {
        let lm = BigramLm::train(&[toks("a b")]).unwrap();
        assert!(matches!(
            lm.sequence_logprob(&toks("a z")),
            Err(Error::OutOfVocab(_))
        ));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(BigramLm::train(&[]).is_err());
        assert!(BigramLm::train(&[vec![]]).is_err());
    }
}
