use hdspeech_core::eval::{generate_synthetic_corpus, SynthSpec};
use hdspeech_core::eval::loso::{CorpusResources, LosoHarness, RunSettings};
use hdspeech_core::lexicon::parse_lexicon;
use hdspeech_core::transcription::Mode;
use hdspeech_core::classify::dtw_distance;

fn main() {
    let corpus = generate_synthetic_corpus(&SynthSpec::separable(), 1).unwrap();
    let resources = CorpusResources {
        lexicon: parse_lexicon(&corpus.lexicon_text, &corpus.phones).unwrap(),
        passage: corpus.passage.clone(),
        phones: corpus.phones.clone(),
        silence: "sil".into(),
    };
    let settings = RunSettings { max_gaussians: 66, em_iterations_per_stage: 3, ..Default::default() };
    // single fold to inspect
    let mut sub: Vec<_> = corpus.speakers[..5].to_vec();
    sub.extend(corpus.speakers[10..15].iter().cloned());
    let harness = LosoHarness::build(&sub, &resources, &[Mode::FaOrat], settings).unwrap();
    let fold = &harness.folds[0];
    let data = &fold.modes[&Mode::FaOrat];
    eprintln!("schema {} dims, dynamic filter keeps {}", data.schema.names.len(), data.dynamic_filter.len());
    eprintln!("static filter keeps {}", data.static_filter.len());
    let kept: Vec<&str> = data.dynamic_filter.iter().map(|&i| data.schema.names[i].as_str()).collect();
    eprintln!("kept: {kept:?}");
    for id in ["s01", "s02", "s10", "s11"] {
        if let Some(sd) = data.speakers.get(id) {
            let (pos, _) = fold.speaker_labels[id];
            eprintln!("{id} positive={pos} seq_len={} first_row={:?}", sd.dynamic.len(),
                sd.dynamic[0].iter().map(|v| (v*100.0).round()/100.0).collect::<Vec<_>>());
        }
    }
    // DTW distance matrix across a few speakers
    let ids = ["s01", "s02", "s03", "s10", "s11", "s12"];
    for a in ids {
        let mut row = String::new();
        for b in ids {
            let (sa, sb) = (&data.speakers[a], &data.speakers[b]);
            let d = dtw_distance(&sa.dynamic, &sb.dynamic).unwrap();
            row.push_str(&format!("{d:8.2} "));
        }
        eprintln!("{a}: {row}");
    }
}
