//! End-to-end pipeline checks on small synthetic corpora: determinism,
//! mode selection, artifact presence, and report invariants.

use hdspeech_core::config::RunConfig;
use hdspeech_core::eval::loso::CorpusResources;
use hdspeech_core::eval::{generate_synthetic_corpus, SynthSpec};
use hdspeech_core::lexicon::parse_lexicon;
use hdspeech_core::pipeline::run_pipeline;

fn resources_for(corpus: &hdspeech_core::eval::SyntheticCorpus) -> CorpusResources {
    CorpusResources {
        lexicon: parse_lexicon(&corpus.lexicon_text, &corpus.phones).unwrap(),
        passage: corpus.passage.clone(),
        phones: corpus.phones.clone(),
        silence: "sil".to_string(),
    }
}

fn tiny_spec() -> SynthSpec {
    let mut spec = SynthSpec::separable();
    spec.sentences = 4;
    spec.counts = hdspeech_core::eval::StageCounts {
        control: 3,
        premanifest: 1,
        early: 1,
        late: 1,
    };
    spec
}

#[test]
fn pipeline_is_deterministic_and_writes_artifacts() {
    let corpus = generate_synthetic_corpus(&tiny_spec(), 31).unwrap();
    let resources = resources_for(&corpus);
    let mut config = RunConfig::new(31);
    config.modes = vec!["fa-orat".into()];
    config.methods = vec!["knn".into(), "dtw".into()];
    config.max_gaussians = 40;
    config.em_iterations_per_stage = 2;

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let report_a = run_pipeline(&config, &corpus.speakers, &resources, dir_a.path()).unwrap();
    let report_b = run_pipeline(&config, &corpus.speakers, &resources, dir_b.path()).unwrap();
    assert_eq!(report_a, report_b, "same seed and corpus must agree");

    let bytes_a = std::fs::read(dir_a.path().join("report.json")).unwrap();
    let bytes_b = std::fs::read(dir_b.path().join("report.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "emitted reports must be byte-identical");

    // artifacts
    assert!(dir_a.path().join("results_table.csv").exists());
    assert!(dir_a.path().join("confusion_table.csv").exists());
    assert!(dir_a.path().join("predictions.csv").exists());
    assert!(dir_a.path().join("significance_table.csv").exists() || report_a.stage_significance.is_none());
    assert!(dir_a.path().join("folds").join("seed31_fold00_model.json").exists());
    assert!(dir_a.path().join("sweep_seed31_fa-orat_knn.csv").exists());
    assert!(dir_a.path().join("features_seed31_fa-orat_dynamic.csv").exists());
    assert!(dir_a.path().join("features_seed31_fa-orat_static.csv").exists());

    // report shape: 1 mode x 2 methods, every speaker predicted once
    assert_eq!(report_a.runs.len(), 2);
    for run in &report_a.runs {
        assert_eq!(run.predictions.len(), corpus.speakers.len());
    }
    for row in report_a.confusion.rows.values() {
        assert!((row[0] + row[1] - 1.0).abs() < 1e-9);
    }
    // results CSV rows = runs
    let results = std::fs::read_to_string(dir_a.path().join("results_table.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + report_a.runs.len());
}

#[test]
fn mode_selection_limits_report_columns() {
    let corpus = generate_synthetic_corpus(&tiny_spec(), 7).unwrap();
    let resources = resources_for(&corpus);
    let mut config = RunConfig::new(7);
    config.modes = vec!["fa-gf".into()];
    config.methods = vec!["knn".into()];
    config.max_gaussians = 40;
    config.em_iterations_per_stage = 2;
    let dir = tempfile::tempdir().unwrap();
    let report = run_pipeline(&config, &corpus.speakers, &resources, dir.path()).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.runs[0].mode, "fa-gf");
    assert!(report.wer.is_none(), "no recognition table without the ASR mode");
    assert!(
        report.stage_significance.is_none(),
        "stage analysis is defined over the oracle-transcript mode"
    );
}
