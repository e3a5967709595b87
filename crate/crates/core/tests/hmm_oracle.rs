//! Alignment, phone-loop, pronunciation-fit, and decoder results checked
//! against exhaustive path enumeration on randomized toy instances.

mod common;

use common::{decode_oracle, forced_oracle, loop_oracle, random_toy_model};
use hdspeech_core::dsp::FeatureMatrix;
use hdspeech_core::features::compute_gop;
use hdspeech_core::hmm::{phone_loop_score, viterbi_align, AlignSpec, PhoneId};
use hdspeech_core::lexicon::parse_lexicon;
use hdspeech_core::lm::BigramLm;
use hdspeech_core::matrix::Matrix;
use hdspeech_core::transcription::decode_utterance;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn obs_from(values: &[f64]) -> FeatureMatrix {
    FeatureMatrix::new(
        Matrix::from_rows(values.iter().map(|&v| vec![v]).collect()),
        0.01,
        0.025,
    )
}

fn rows_of(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().map(|&v| vec![v]).collect()
}

#[test]
fn forced_alignment_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11c);
    for trial in 0..40 {
        let num_phones = 1 + trial % 3;
        let model = random_toy_model(&mut rng, num_phones);
        let seq_len = 1 + (trial / 3) % 2;
        let t_len = (seq_len * 3) + rng.random_range(0..=3);
        let values: Vec<f64> = (0..t_len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let phones: Vec<(PhoneId, bool)> = (0..seq_len)
            .map(|_| (rng.random_range(0..num_phones), false))
            .collect();
        let rows = rows_of(&values);
        let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let got = viterbi_align(&model, &obs_from(&values), &AlignSpec::from_phones(&phones));
        let want = forced_oracle(&model, &row_refs, &phones);
        match (got, want) {
            (Ok(a), Some(o)) => {
                assert!(
                    (a.total_log_likelihood - o.score).abs() < 1e-8,
                    "trial {trial}: {} vs {}",
                    a.total_log_likelihood,
                    o.score
                );
                let got_segs: Vec<(PhoneId, usize, usize)> = a
                    .segments
                    .iter()
                    .map(|s| (s.phone, s.start, s.end))
                    .collect();
                assert_eq!(got_segs, o.segments, "trial {trial} segmentation");
            }
            (Err(_), None) => {}
            (g, w) => panic!(
                "trial {trial}: feasibility disagreement (impl {:?}, oracle {:?})",
                g.is_ok(),
                w.is_some()
            ),
        }
    }
}

#[test]
fn phone_loop_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x100b);
    for trial in 0..30 {
        let num_phones = 1 + trial % 3;
        let model = random_toy_model(&mut rng, num_phones);
        let t_len = rng.random_range(3..=6);
        let values: Vec<f64> = (0..t_len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rows = rows_of(&values);
        let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let (got, _, _) = phone_loop_score(&model, &obs_from(&values)).unwrap();
        let want = loop_oracle(&model, &row_refs).unwrap();
        assert!(
            (got - want).abs() < 1e-8,
            "trial {trial}: loop {got} vs oracle {want}"
        );
    }
}

#[test]
fn three_frame_two_phone_loop_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3f2);
    let model = random_toy_model(&mut rng, 2);
    let values = [0.5, -1.0, 2.0];
    let rows = rows_of(&values);
    let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let (score, seq, _) = phone_loop_score(&model, &obs_from(&values)).unwrap();
    assert_eq!(seq.len(), 1, "three frames fit exactly one phone");
    let want = loop_oracle(&model, &row_refs).unwrap();
    assert!((score - want).abs() < 1e-10);
}

#[test]
fn gop_matches_enumeration_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x90b);
    let mut checked = 0;
    for trial in 0..60 {
        let num_phones = 1 + trial % 3;
        let model = random_toy_model(&mut rng, num_phones);
        let seq_len = 1 + (trial / 5) % 2;
        let t_len = (seq_len * 3) + rng.random_range(0..=(6usize.saturating_sub(seq_len * 3)));
        let values: Vec<f64> = (0..t_len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let phones: Vec<(PhoneId, bool)> = (0..seq_len)
            .map(|_| (rng.random_range(0..num_phones), false))
            .collect();
        let rows = rows_of(&values);
        let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let obs = obs_from(&values);
        let Ok(alignment) = viterbi_align(&model, &obs, &AlignSpec::from_phones(&phones)) else {
            continue;
        };
        let oracle = forced_oracle(&model, &row_refs, &phones).expect("oracle feasible");
        let gop = compute_gop(&model, &obs, &alignment).unwrap();
        assert_eq!(gop.len(), oracle.segments.len());
        for (g, ((_, s, e), num)) in gop.iter().zip(oracle.segments.iter().zip(&oracle.internal)) {
            let span = &row_refs[*s..*e];
            let den = loop_oracle(&model, span).expect("span loop feasible");
            let want = (num - den) / (e - s) as f64;
            assert!(
                (g.score - want).abs() < 1e-8,
                "trial {trial}: GoP {} vs oracle {want}",
                g.score
            );
            assert!(g.score <= 1e-9, "trial {trial}: GoP must not be positive");
            checked += 1;
        }
    }
    assert!(checked >= 20, "only {checked} segments checked");
}

#[test]
fn decoder_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdec0);
    for trial in 0..12 {
        let num_phones = 3;
        let model = random_toy_model(&mut rng, num_phones);
        // small vocabulary over the non-silence phones
        let vocab: Vec<(String, Vec<PhoneId>)> = vec![
            ("va".into(), vec![1]),
            ("vb".into(), vec![2]),
            ("vc".into(), vec![1, 2]),
        ];
        let phone_names: Vec<String> = model.phones.clone();
        let lexicon_text: String = vocab
            .iter()
            .map(|(w, pron)| {
                format!(
                    "{w} {}\n",
                    pron.iter().map(|&p| phone_names[p].clone()).collect::<Vec<_>>().join(" ")
                )
            })
            .collect();
        let lexicon = parse_lexicon(&lexicon_text, &phone_names).unwrap();
        let lm = BigramLm::train(&[
            vec!["va".into(), "vb".into()],
            vec!["vb".into(), "va".into()],
            vec!["vc".into()],
        ])
        .unwrap();
        let t_len = rng.random_range(6..=9);
        let values: Vec<f64> = (0..t_len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rows = rows_of(&values);
        let row_refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        for lm_scale in [0.0, 1.0] {
            let got = decode_utterance(&model, &obs_from(&values), &lexicon, &lm, lm_scale);
            let want = decode_oracle(&model, &row_refs, &vocab, &lm, lm_scale);
            match (got, want) {
                (Ok(tokens), Some(expect)) => {
                    let texts: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
                    assert_eq!(texts, expect, "trial {trial} scale {lm_scale}");
                }
                (Err(_), None) => {}
                (g, w) => panic!("trial {trial}: decoder feasibility mismatch ({g:?} vs {w:?})"),
            }
        }
    }
}

#[test]
fn decoder_two_word_concatenation() {
    // two words with separated means; observations are the concatenated
    // word frames; the decoder must return both words in order
    let mut rng = ChaCha8Rng::seed_from_u64(0x2b);
    let mut model = random_toy_model(&mut rng, 3);
    // make phone 1 and 2 well separated
    for (p, center) in [(1usize, -2.0f64), (2, 2.0)] {
        for s in 0..3 {
            let st = &mut model.models[p].states[s];
            st.components[0].mean = vec![center + s as f64 * 0.3];
            st.components[0].var = vec![0.05];
            st.components[0].refresh();
        }
    }
    let phone_names = model.phones.clone();
    let lexicon = parse_lexicon(
        &format!("va {}\nvb {}\n", phone_names[1], phone_names[2]),
        &phone_names,
    )
    .unwrap();
    let lm = BigramLm::train(&[vec!["va".into(), "vb".into()]]).unwrap();
    let mut values = Vec::new();
    for s in 0..3 {
        for _ in 0..2 {
            values.push(-2.0 + s as f64 * 0.3);
        }
    }
    for s in 0..3 {
        for _ in 0..2 {
            values.push(2.0 + s as f64 * 0.3);
        }
    }
    let tokens = decode_utterance(&model, &obs_from(&values), &lexicon, &lm, 1.0).unwrap();
    let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    assert_eq!(texts, vec!["va", "vb"]);
}
