use std::time::Instant;
use hdspeech_core::eval::{generate_synthetic_corpus, SynthSpec};
use hdspeech_core::eval::loso::{CorpusResources, LosoHarness, RunSettings};
use hdspeech_core::lexicon::parse_lexicon;
use hdspeech_core::transcription::Mode;
use hdspeech_core::classify::Method;

fn main() {
    let t0 = Instant::now();
    let corpus = generate_synthetic_corpus(&SynthSpec::separable(), 1).unwrap();
    eprintln!("synth: {:?}", t0.elapsed());
    let resources = CorpusResources {
        lexicon: parse_lexicon(&corpus.lexicon_text, &corpus.phones).unwrap(),
        passage: corpus.passage.clone(),
        phones: corpus.phones.clone(),
        silence: "sil".into(),
    };
    let settings = RunSettings { max_gaussians: 66, em_iterations_per_stage: 3, ..Default::default() };
    let t1 = Instant::now();
    let harness = LosoHarness::build(&corpus.speakers, &resources, &[Mode::FaOrat], settings).unwrap();
    eprintln!("harness ({} folds): {:?}", harness.folds.len(), t1.elapsed());
    for method in [Method::Knn, Method::DtwKnn, Method::Dnn, Method::Lstm] {
        let t = Instant::now();
        let run = harness.run(Mode::FaOrat, method, 1).unwrap();
        let acc = run.predictions.iter().filter(|p| p.predicted == p.label_positive).count() as f64
            / run.predictions.len() as f64;
        eprintln!("{method}: acc {acc:.3} in {:?}", t.elapsed());
    }
}
