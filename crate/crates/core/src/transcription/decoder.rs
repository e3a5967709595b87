//! Small-vocabulary recognition: exact Viterbi over a token-loop graph.
//!
//! Word interiors are pronunciation chains of the acoustic model; the
//! bigram cost is applied on word entry, maximized over the predecessor
//! word, which is exact for a bigram model. Optional silence may precede
//! the first word and follow any word. No pruning is applied, so the
//! decoder's answer equals the brute-force argmax over token sequences.

use crate::dsp::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{EmissionTable, MonophoneHmmSet, PhoneId, StateTrans, STATES_PER_PHONE};
use crate::lexicon::Lexicon;
use crate::lm::{BigramLm, SENTENCE_END, SENTENCE_START};
use crate::transcript::Token;

const NO_LINK: u32 = u32::MAX;

struct DecWord {
    text: String,
    is_filler: bool,
    prons: Vec<Vec<PhoneId>>,
}

struct Graph {
    words: Vec<DecWord>,
    /// (phone, hmm state) per graph state.
    state_phone: Vec<(PhoneId, usize)>,
    /// per word, per pronunciation: index of the chain's first state.
    pron_start: Vec<Vec<usize>>,
    /// per word: first state of the trailing-silence appendix.
    appendix_start: Vec<usize>,
    /// first state of the leading-silence chain.
    lead_sil: usize,
    num_states: usize,
}

fn build_graph(model: &MonophoneHmmSet, lexicon: &Lexicon, lm: &BigramLm) -> Result<Graph> {
    let sil = model.silence;
    let mut words = Vec::new();
    for text in &lm.vocab {
        let prons = lexicon
            .pronunciations(text)
            .ok_or_else(|| Error::OutOfVocab(text.clone()))?;
        let mut mapped = Vec::with_capacity(prons.len());
        for pron in prons {
            let phones: Result<Vec<PhoneId>> = pron
                .iter()
                .map(|p| {
                    model
                        .phone_id(p)
                        .ok_or_else(|| Error::InvalidInput(format!("phone {p} not in model")))
                })
                .collect();
            mapped.push(phones?);
        }
        words.push(DecWord {
            text: text.clone(),
            is_filler: lexicon.is_filler(text),
            prons: mapped,
        });
    }
    let mut state_phone = Vec::new();
    let mut pron_start = Vec::new();
    let mut appendix_start = Vec::new();
    for w in &words {
        let mut starts = Vec::new();
        for pron in &w.prons {
            starts.push(state_phone.len());
            for &p in pron {
                for s in 0..STATES_PER_PHONE {
                    state_phone.push((p, s));
                }
            }
        }
        pron_start.push(starts);
        appendix_start.push(state_phone.len());
        for s in 0..STATES_PER_PHONE {
            state_phone.push((sil, s));
        }
    }
    let lead_sil = state_phone.len();
    for s in 0..STATES_PER_PHONE {
        state_phone.push((sil, s));
    }
    Ok(Graph {
        num_states: state_phone.len(),
        words,
        state_phone,
        pron_start,
        appendix_start,
        lead_sil,
    })
}

#[derive(Clone, Copy)]
struct Cell {
    score: f64,
    link: u32,
}

impl Cell {
    const DEAD: Cell = Cell {
        score: f64::NEG_INFINITY,
        link: NO_LINK,
    };
}

#[derive(Default)]
struct LinkArena {
    words: Vec<u32>,
    prevs: Vec<u32>,
}

impl LinkArena {
    fn push(&mut self, word: u32, prev: u32) -> u32 {
        self.words.push(word);
        self.prevs.push(prev);
        (self.words.len() - 1) as u32
    }

    fn unwind(&self, mut link: u32) -> Vec<u32> {
        let mut seq = Vec::new();
        while link != NO_LINK {
            seq.push(self.words[link as usize]);
            link = self.prevs[link as usize];
        }
        seq.reverse();
        seq
    }
}

/// Best direct (no trailing silence) end of word `w` at the frame described
/// by `scores`, with the word pushed onto the link chain.
fn wend_direct<F: Fn(usize) -> StateTrans>(
    graph: &Graph,
    scores: &[Cell],
    trans: &F,
    w: usize,
    arena: &mut LinkArena,
) -> Cell {
    let mut best = Cell::DEAD;
    for (v, &start) in graph.pron_start[w].iter().enumerate() {
        let last = start + graph.words[w].prons[v].len() * STATES_PER_PHONE - 1;
        if scores[last].score == f64::NEG_INFINITY {
            continue;
        }
        let s = scores[last].score + trans(last).log_next;
        if s > best.score {
            best = Cell {
                score: s,
                link: scores[last].link,
            };
        }
    }
    if best.score > f64::NEG_INFINITY {
        best.link = arena.push(w as u32, best.link);
    }
    best
}

/// Word-end cells at a frame: the better of the direct pronunciation exit
/// and the trailing-silence exit (whose cells already carry the word link).
fn compute_word_ends<F: Fn(usize) -> StateTrans>(
    graph: &Graph,
    scores: &[Cell],
    trans: &F,
    wend: &mut [Cell],
    arena: &mut LinkArena,
) {
    for (w, out) in wend.iter_mut().enumerate() {
        let mut best = wend_direct(graph, scores, trans, w, arena);
        let app_exit = graph.appendix_start[w] + STATES_PER_PHONE - 1;
        if scores[app_exit].score > f64::NEG_INFINITY {
            let s = scores[app_exit].score + trans(app_exit).log_next;
            if s > best.score {
                best = Cell {
                    score: s,
                    link: scores[app_exit].link,
                };
            }
        }
        *out = best;
    }
}

/// Maximum-likelihood token sequence for one utterance under
/// `acoustic + lm_scale * bigram` scoring.
pub fn decode_utterance(
    model: &MonophoneHmmSet,
    obs: &FeatureMatrix,
    lexicon: &Lexicon,
    lm: &BigramLm,
    lm_scale: f64,
) -> Result<Vec<Token>> {
    let graph = build_graph(model, lexicon, lm)?;
    let t_len = obs.num_frames();
    if t_len == 0 {
        return Err(Error::AlignmentInfeasible);
    }
    let table = EmissionTable::build(model, &obs.frames);
    let emis = |t: usize, st: usize| {
        let (p, s) = graph.state_phone[st];
        table.get(t, p, s)
    };
    let trans = |st: usize| {
        let (p, s) = graph.state_phone[st];
        model.trans(p, s)
    };
    let n_words = graph.words.len();
    let mut arena = LinkArena::default();
    let mut prev = vec![Cell::DEAD; graph.num_states];
    let mut cur = vec![Cell::DEAD; graph.num_states];
    let mut wend_prev = vec![Cell::DEAD; n_words];
    let mut wend = vec![Cell::DEAD; n_words];

    for (w, starts) in graph.pron_start.iter().enumerate() {
        let lmcost = lm_scale * lm.log_prob(SENTENCE_START, &graph.words[w].text)?;
        for &st in starts {
            prev[st] = Cell {
                score: lmcost + emis(0, st),
                link: NO_LINK,
            };
        }
    }
    prev[graph.lead_sil] = Cell {
        score: emis(0, graph.lead_sil),
        link: NO_LINK,
    };
    compute_word_ends(&graph, &prev, &trans, &mut wend, &mut arena);
    wend_prev.copy_from_slice(&wend);

    for t in 1..t_len {
        // best entry per word: predecessor word ends and the leading silence
        let lead_exit = prev[graph.lead_sil + STATES_PER_PHONE - 1];
        let lead_exit_score = if lead_exit.score > f64::NEG_INFINITY {
            lead_exit.score + trans(graph.lead_sil + STATES_PER_PHONE - 1).log_next
        } else {
            f64::NEG_INFINITY
        };
        let mut entry = vec![Cell::DEAD; n_words];
        for (w, e) in entry.iter_mut().enumerate() {
            let mut best = Cell::DEAD;
            for (h, hc) in wend_prev.iter().enumerate() {
                if hc.score == f64::NEG_INFINITY {
                    continue;
                }
                let s =
                    hc.score + lm_scale * lm.log_prob(&graph.words[h].text, &graph.words[w].text)?;
                if s > best.score {
                    best = Cell {
                        score: s,
                        link: hc.link,
                    };
                }
            }
            if lead_exit_score > f64::NEG_INFINITY {
                let s = lead_exit_score + lm_scale * lm.log_prob(SENTENCE_START, &graph.words[w].text)?;
                if s > best.score {
                    best = Cell {
                        score: s,
                        link: lead_exit.link,
                    };
                }
            }
            *e = best;
        }

        // self-loops and within-phone forward arcs (state groups are contiguous)
        for st in 0..graph.num_states {
            let (_, hmm_s) = graph.state_phone[st];
            let mut best = Cell::DEAD;
            if prev[st].score > f64::NEG_INFINITY {
                best = Cell {
                    score: prev[st].score + trans(st).log_self,
                    link: prev[st].link,
                };
            }
            if hmm_s > 0 && prev[st - 1].score > f64::NEG_INFINITY {
                let s = prev[st - 1].score + trans(st - 1).log_next;
                if s > best.score {
                    best = Cell {
                        score: s,
                        link: prev[st - 1].link,
                    };
                }
            }
            cur[st] = best;
        }
        // phone-to-phone arcs inside pronunciation chains
        for (w, starts) in graph.pron_start.iter().enumerate() {
            for (v, &start) in starts.iter().enumerate() {
                for ph in 1..graph.words[w].prons[v].len() {
                    let dst = start + ph * STATES_PER_PHONE;
                    let src = dst - 1;
                    if prev[src].score > f64::NEG_INFINITY {
                        let s = prev[src].score + trans(src).log_next;
                        if s > cur[dst].score {
                            cur[dst] = Cell {
                                score: s,
                                link: prev[src].link,
                            };
                        }
                    }
                }
            }
        }
        // trailing-silence entries from the direct word ends at t-1
        for (w, &app) in graph.appendix_start.iter().enumerate() {
            let cell = wend_direct(&graph, &prev, &trans, w, &mut arena);
            if cell.score > cur[app].score {
                cur[app] = cell;
            }
        }
        // word entries land on every pronunciation's first state
        for (w, starts) in graph.pron_start.iter().enumerate() {
            if entry[w].score == f64::NEG_INFINITY {
                continue;
            }
            for &st in starts {
                if entry[w].score > cur[st].score {
                    cur[st] = entry[w];
                }
            }
        }
        for st in 0..graph.num_states {
            if cur[st].score > f64::NEG_INFINITY {
                cur[st].score += emis(t, st);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        compute_word_ends(&graph, &prev, &trans, &mut wend, &mut arena);
        wend_prev.copy_from_slice(&wend);
    }

    // sentence end: best completed word, or an empty decode through silence
    let mut best = f64::NEG_INFINITY;
    let mut best_link = NO_LINK;
    for (w, cell) in wend_prev.iter().enumerate() {
        if cell.score == f64::NEG_INFINITY {
            continue;
        }
        let s = cell.score + lm_scale * lm.log_prob(&graph.words[w].text, SENTENCE_END)?;
        if s > best {
            best = s;
            best_link = cell.link;
        }
    }
    let lead_exit = prev[graph.lead_sil + STATES_PER_PHONE - 1];
    if lead_exit.score > f64::NEG_INFINITY {
        let s = lead_exit.score
            + trans(graph.lead_sil + STATES_PER_PHONE - 1).log_next
            + lm_scale * lm.log_prob(SENTENCE_START, SENTENCE_END)?;
        if s > best {
            best = s;
            best_link = NO_LINK;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::AlignmentInfeasible);
    }
    Ok(arena
        .unwind(best_link)
        .into_iter()
        .map(|w| {
            let word = &graph.words[w as usize];
            if word.is_filler {
                Token::filler(&word.text)
            } else {
                Token::word(&word.text)
            }
        })
        .collect())
}
