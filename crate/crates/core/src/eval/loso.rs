//! Leave-one-subject-out orchestration. Every fold trains the acoustic
//! model, language model, lexicon augmentation, and feature filters on the
//! training speakers alone; the held-out speaker only ever flows through
//! frozen artifacts. Provenance lists on every artifact back a no-leakage
//! audit.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    derive_seed, ensemble_predict, sweep_hyperparams, train_ensemble, DynamicDataset, Method,
    Predictor, PredictorConfig, Sample, StaticDataset, SweepCell,
};
use crate::corpus::{Label, SpeakerRecord, Stage};
use crate::error::{Error, Result};
use crate::features::{
    apply_filter, compute_gop, extract_utterance_features, filter_features_with,
    summarize_speaker, znormalize_speaker, FeatureSchema,
};
use crate::hmm::{default_schedule, flat_start, train_em, AlignSpec, MonophoneHmmSet, TrainUtterance, TrainingLog, STATES_PER_PHONE};
use crate::lexicon::{augment_lexicon, Lexicon};
use crate::lm::BigramLm;
use crate::transcription::{
    align_spec_for_phones, compute_wer, prepare_asrt, prepare_fa_gf, prepare_fa_orat,
    token_texts, Mode, TranscriptionResult, WerBreakdown,
};

/// Shared, fold-independent corpus resources.
#[derive(Debug, Clone)]
pub struct CorpusResources {
    pub lexicon: Lexicon,
    pub passage: Vec<Vec<String>>,
    /// Full phone inventory including the silence phone.
    pub phones: Vec<String>,
    pub silence: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RunSettings {
    pub pause_min_secs: f64,
    pub lm_scale: f64,
    pub max_gaussians: usize,
    pub em_iterations_per_stage: usize,
    pub variance_eps: f64,
    pub info_gain_eps: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            pause_min_secs: 0.150,
            lm_scale: 1.0,
            max_gaussians: 500,
            em_iterations_per_stage: 4,
            variance_eps: crate::features::VARIANCE_EPS,
            info_gain_eps: crate::features::INFO_GAIN_EPS,
        }
    }
}

/// Per-speaker data prepared under one transcription mode within a fold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeakerModeData {
    /// Filtered, z-normalized utterance rows in utterance order.
    pub dynamic: Vec<Vec<f64>>,
    /// Filtered speaker-level summary row.
    pub static_row: Vec<f64>,
    /// Unfiltered z-normalized utterance rows (schema order).
    pub normalized: Vec<Vec<f64>>,
    /// Recognition quality against the oracle transcript (ASRT only).
    pub wer: Option<WerBreakdown>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldModeData {
    pub schema: FeatureSchema,
    pub dynamic_filter: Vec<usize>,
    pub static_filter: Vec<usize>,
    pub filter_sources: Vec<String>,
    pub speakers: BTreeMap<String, SpeakerModeData>,
}

/// Everything trained within one fold, with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldArtifacts {
    pub fold_id: usize,
    pub test_speaker: String,
    pub train_speakers: Vec<String>,
    pub am_sources: Vec<String>,
    pub lm_sources: Vec<String>,
    pub lexicon_sources: Vec<String>,
    pub model: MonophoneHmmSet,
    pub lexicon: Lexicon,
    pub lm: BigramLm,
    pub training_log: TrainingLog,
    pub speaker_labels: BTreeMap<String, (bool, Stage)>,
    pub modes: BTreeMap<Mode, FoldModeData>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerPrediction {
    pub speaker_id: String,
    pub stage: Stage,
    pub label_positive: bool,
    pub predicted: bool,
}

/// Outcome of one (mode x method) LOSO run.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub mode: Mode,
    pub method: Method,
    pub predictions: Vec<SpeakerPrediction>,
    pub fold_sweeps: Vec<Vec<SweepCell>>,
    pub fold_configs: Vec<PredictorConfig>,
}

fn transcribe_speaker(
    speaker: &SpeakerRecord,
    mode: Mode,
    model: &MonophoneHmmSet,
    lexicon: &Lexicon,
    lm: &BigramLm,
    resources: &CorpusResources,
    settings: &RunSettings,
) -> Result<TranscriptionResult> {
    let obs = speaker.utterance_features();
    match mode {
        Mode::FaOrat => prepare_fa_orat(&speaker.speaker_id, &obs, &speaker.transcript, model, lexicon),
        Mode::FaGf => prepare_fa_gf(
            &speaker.speaker_id,
            &speaker.full_features,
            &resources.passage,
            model,
            lexicon,
        ),
        Mode::Asrt => prepare_asrt(&speaker.speaker_id, &obs, model, lexicon, lm, settings.lm_scale),
    }
}

/// Per-speaker WER of the recognized transcript against the oracle tokens.
/// Skipped utterances count as fully deleted references.
fn speaker_wer(speaker: &SpeakerRecord, result: &TranscriptionResult) -> Result<WerBreakdown> {
    let mut ins = 0;
    let mut del = 0;
    let mut sub = 0;
    let mut ref_len = 0;
    for (i, utt) in speaker.transcript.utterances.iter().enumerate() {
        let reference = token_texts(&utt.tokens);
        let hyp = result
            .utterances
            .iter()
            .find(|u| u.index == i)
            .map(|u| token_texts(&u.tokens))
            .unwrap_or_default();
        if reference.is_empty() {
            continue;
        }
        let w = compute_wer(&reference, &hyp)?;
        ins += w.insertions;
        del += w.deletions;
        sub += w.substitutions;
        ref_len += w.ref_len;
    }
    if ref_len == 0 {
        return Err(Error::InvalidInput(format!(
            "speaker {} has an empty reference transcript",
            speaker.speaker_id
        )));
    }
    Ok(WerBreakdown {
        wer_percent: 100.0 * (ins + del + sub) as f64 / ref_len as f64,
        insertions: ins,
        deletions: del,
        substitutions: sub,
        ref_len,
    })
}

fn fold_mode_data(
    corpus: &[SpeakerRecord],
    fold: usize,
    mode: Mode,
    model: &MonophoneHmmSet,
    lexicon: &Lexicon,
    lm: &BigramLm,
    resources: &CorpusResources,
    settings: &RunSettings,
) -> Result<FoldModeData> {
    let schema = FeatureSchema::for_mode(mode, model);
    let mut speakers = BTreeMap::new();
    for speaker in corpus {
        let result = transcribe_speaker(speaker, mode, model, lexicon, lm, resources, settings)?;
        let wer = if mode == Mode::Asrt {
            Some(speaker_wer(speaker, &result)?)
        } else {
            None
        };
        let mut vectors = Vec::with_capacity(result.utterances.len());
        for utt in &result.utterances {
            let gop = compute_gop(model, &utt.obs, &utt.alignment)?;
            vectors.push(extract_utterance_features(
                &schema,
                model,
                utt,
                &gop,
                mode,
                settings.pause_min_secs,
            )?);
        }
        if vectors.is_empty() {
            return Err(Error::InvalidInput(format!(
                "speaker {} has no usable utterances under {mode}",
                speaker.speaker_id
            )));
        }
        let normalized = znormalize_speaker(&vectors);
        speakers.insert(
            speaker.speaker_id.clone(),
            SpeakerModeData {
                dynamic: Vec::new(),
                static_row: Vec::new(),
                normalized: normalized.iter().map(|v| v.values.clone()).collect(),
                wer,
            },
        );
    }
    // dynamic filter on pooled training-speaker utterance rows
    let test_id = &corpus[fold].speaker_id;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut filter_sources = Vec::new();
    for speaker in corpus {
        if &speaker.speaker_id == test_id {
            continue;
        }
        filter_sources.push(speaker.speaker_id.clone());
        for row in &speakers[&speaker.speaker_id].normalized {
            rows.push(row.clone());
            labels.push(speaker.label.is_positive());
        }
    }
    let dynamic_filter = filter_features_with(&rows, &labels, settings.variance_eps, settings.info_gain_eps)?;
    // static filter on training-speaker summaries of the filtered rows
    let mut static_rows = Vec::new();
    let mut static_labels = Vec::new();
    for speaker in corpus {
        if &speaker.speaker_id == test_id {
            continue;
        }
        let data = &speakers[&speaker.speaker_id];
        let filtered: Vec<crate::features::UtteranceFeatureVector> = apply_filter(&data.normalized, &dynamic_filter)
            .into_iter()
            .map(|values| crate::features::UtteranceFeatureVector {
                values,
                duration_secs: 0.0,
            })
            .collect();
        static_rows.push(summarize_speaker(&filtered));
        static_labels.push(speaker.label.is_positive());
    }
    let static_filter =
        filter_features_with(&static_rows, &static_labels, settings.variance_eps, settings.info_gain_eps)?;
    // project every speaker through the frozen filters
    for speaker in corpus {
        let data = speakers.get_mut(&speaker.speaker_id).unwrap();
        data.dynamic = apply_filter(&data.normalized, &dynamic_filter);
        let filtered: Vec<crate::features::UtteranceFeatureVector> = data
            .dynamic
            .iter()
            .map(|values| crate::features::UtteranceFeatureVector {
                values: values.clone(),
                duration_secs: 0.0,
            })
            .collect();
        let summary = summarize_speaker(&filtered);
        data.static_row = static_filter.iter().map(|&i| summary[i]).collect();
    }
    Ok(FoldModeData {
        schema,
        dynamic_filter,
        static_filter,
        filter_sources,
        speakers,
    })
}

fn compute_fold(
    corpus: &[SpeakerRecord],
    resources: &CorpusResources,
    fold: usize,
    modes: &[Mode],
    settings: &RunSettings,
) -> Result<FoldArtifacts> {
    let test = &corpus[fold];
    let train: Vec<&SpeakerRecord> = corpus
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fold)
        .map(|(_, s)| s)
        .collect();
    let train_ids: Vec<String> = train.iter().map(|s| s.speaker_id.clone()).collect();
    if !train.iter().any(|s| s.label == Label::Hc) || !train.iter().any(|s| s.label == Label::Hd) {
        return Err(Error::InvalidInput(format!(
            "fold {fold}: training set lacks one of the classes"
        )));
    }

    // lexicon augmentation from training transcripts only
    let mut lexicon = resources.lexicon.clone();
    let annotations: Vec<_> = train
        .iter()
        .flat_map(|s| s.transcript.error_annotations())
        .collect();
    augment_lexicon(&mut lexicon, &annotations);

    // bigram model over training transcripts
    let sequences: Vec<Vec<String>> = train
        .iter()
        .flat_map(|s| s.transcript.utterances.iter().map(|u| token_texts(&u.tokens)))
        .collect();
    let lm = BigramLm::train(&sequences)?;

    // acoustic model on training utterances
    let sil_id = resources
        .phones
        .iter()
        .position(|p| p == &resources.silence)
        .ok_or_else(|| Error::InvalidInput("silence phone missing from inventory".into()))?;
    let mut specs: Vec<(usize, usize, AlignSpec)> = Vec::new();
    for (si, speaker) in train.iter().enumerate() {
        for (ui, utt) in speaker.transcript.utterances.iter().enumerate() {
            let (spec, _) = align_spec_for_phones(&resources.phones, sil_id, &lexicon, &utt.tokens)?;
            specs.push((si, ui, spec));
        }
    }
    let train_corpus: Vec<TrainUtterance<'_>> = specs
        .iter()
        .map(|(si, ui, spec)| TrainUtterance {
            obs: &train[*si].utterances[*ui].features,
            spec: spec.clone(),
        })
        .collect();
    let flat = flat_start(&train_corpus, &resources.phones, &resources.silence)?;
    let n_states = resources.phones.len() * STATES_PER_PHONE;
    let schedule = default_schedule(n_states, settings.max_gaussians.max(n_states));
    let (model, training_log) = train_em(
        flat,
        &train_corpus,
        settings.em_iterations_per_stage,
        &schedule,
    )?;

    let mut mode_map = BTreeMap::new();
    for &mode in modes {
        mode_map.insert(
            mode,
            fold_mode_data(corpus, fold, mode, &model, &lexicon, &lm, resources, settings)?,
        );
    }
    let speaker_labels = corpus
        .iter()
        .map(|s| (s.speaker_id.clone(), (s.label.is_positive(), s.stage)))
        .collect();
    Ok(FoldArtifacts {
        fold_id: fold,
        test_speaker: test.speaker_id.clone(),
        train_speakers: train_ids.clone(),
        am_sources: train_ids.clone(),
        lm_sources: train_ids.clone(),
        lexicon_sources: train_ids,
        model,
        lexicon,
        lm,
        training_log,
        speaker_labels,
        modes: mode_map,
    })
}

/// All folds of a corpus with their trained artifacts.
pub struct LosoHarness {
    pub folds: Vec<FoldArtifacts>,
    settings: RunSettings,
}

impl LosoHarness {
    /// Reassemble a harness from previously saved fold artifacts.
    pub fn from_folds(folds: Vec<FoldArtifacts>, settings: RunSettings) -> Result<LosoHarness> {
        if folds.is_empty() {
            return Err(Error::InvalidInput("no fold artifacts".into()));
        }
        let harness = LosoHarness { folds, settings };
        harness.audit_no_leakage()?;
        Ok(harness)
    }
}

impl LosoHarness {
    /// Build every fold (in parallel); `modes` selects which transcription
    /// regimes to prepare.
    pub fn build(
        corpus: &[SpeakerRecord],
        resources: &CorpusResources,
        modes: &[Mode],
        settings: RunSettings,
    ) -> Result<LosoHarness> {
        if corpus.len() < 4 {
            return Err(Error::InvalidInput("need at least four speakers for LOSO".into()));
        }
        if modes.is_empty() {
            return Err(Error::Config("no transcription modes requested".into()));
        }
        let folds: Vec<Result<FoldArtifacts>> = (0..corpus.len())
            .into_par_iter()
            .map(|fold| compute_fold(corpus, resources, fold, modes, &settings))
            .collect();
        let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
        let harness = LosoHarness { folds, settings };
        harness.audit_no_leakage()?;
        Ok(harness)
    }

    /// Assert that no fold's artifacts were built from its held-out speaker.
    pub fn audit_no_leakage(&self) -> Result<()> {
        for fold in &self.folds {
            let test = &fold.test_speaker;
            for (name, sources) in [
                ("acoustic model", &fold.am_sources),
                ("language model", &fold.lm_sources),
                ("lexicon augmentation", &fold.lexicon_sources),
            ] {
                if sources.iter().any(|s| s == test) {
                    return Err(Error::InvalidInput(format!(
                        "fold {}: {name} built from held-out speaker {test}",
                        fold.fold_id
                    )));
                }
            }
            for (mode, data) in &fold.modes {
                if data.filter_sources.iter().any(|s| s == test) {
                    return Err(Error::InvalidInput(format!(
                        "fold {}: {mode} feature filter built from held-out speaker {test}",
                        fold.fold_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// One (mode x method) LOSO pass over all folds.
    pub fn run(&self, mode: Mode, method: Method, seed: u64) -> Result<MethodRun> {
        let outcomes: Vec<Result<(SpeakerPrediction, Vec<SweepCell>, PredictorConfig)>> = self
            .folds
            .par_iter()
            .map(|fold| classify_fold(fold, mode, method, seed, &self.settings))
            .collect();
        let mut predictions = Vec::with_capacity(self.folds.len());
        let mut fold_sweeps = Vec::with_capacity(self.folds.len());
        let mut fold_configs = Vec::with_capacity(self.folds.len());
        for o in outcomes {
            let (p, cells, cfg) = o?;
            predictions.push(p);
            fold_sweeps.push(cells);
            fold_configs.push(cfg);
        }
        predictions.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
        Ok(MethodRun {
            mode,
            method,
            predictions,
            fold_sweeps,
            fold_configs,
        })
    }
}

const SPLIT_STREAM: u64 = 0x5711_0000;

/// Stratified 80/20 split of the training speakers at speaker granularity.
fn split_train_val(
    fold: &FoldArtifacts,
    seed: u64,
) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM, fold.fold_id as u64));
    let mut train80 = Vec::new();
    let mut val20 = Vec::new();
    for positive in [false, true] {
        let mut ids: Vec<String> = fold
            .train_speakers
            .iter()
            .filter(|id| fold.speaker_labels[*id].0 == positive)
            .cloned()
            .collect();
        ids.sort();
        ids.shuffle(&mut rng);
        let n_val = ((ids.len() as f64 * 0.2).round() as usize).clamp(1, ids.len().saturating_sub(1));
        for (i, id) in ids.into_iter().enumerate() {
            if i < n_val {
                val20.push(id);
            } else {
                train80.push(id);
            }
        }
    }
    train80.sort();
    val20.sort();
    (train80, val20)
}

fn datasets_for(
    data: &FoldModeData,
    fold: &FoldArtifacts,
    ids: &[String],
) -> (StaticDataset, DynamicDataset) {
    let mut st = StaticDataset::default();
    let mut dy = DynamicDataset::default();
    for id in ids {
        let sd = &data.speakers[id];
        let positive = fold.speaker_labels[id].0;
        st.rows.push(sd.static_row.clone());
        st.labels.push(positive);
        dy.sequences.push(sd.dynamic.clone());
        dy.labels.push(positive);
    }
    (st, dy)
}

fn classify_fold(
    fold: &FoldArtifacts,
    mode: Mode,
    method: Method,
    seed: u64,
    _settings: &RunSettings,
) -> Result<(SpeakerPrediction, Vec<SweepCell>, PredictorConfig)> {
    let data = fold
        .modes
        .get(&mode)
        .ok_or_else(|| Error::Config(format!("mode {mode} not prepared in fold {}", fold.fold_id)))?;
    let (train80, val20) = split_train_val(fold, seed);
    // leakage guard: the held-out speaker must not be in either side
    if train80.iter().chain(val20.iter()).any(|id| id == &fold.test_speaker) {
        return Err(Error::InvalidInput(format!(
            "fold {}: held-out speaker leaked into the inner split",
            fold.fold_id
        )));
    }
    let (static_train, dynamic_train) = datasets_for(data, fold, &train80);
    let (static_val, dynamic_val) = datasets_for(data, fold, &val20);
    let mode_idx = Mode::ALL.iter().position(|m| *m == mode).unwrap() as u64;
    let method_idx = Method::ALL.iter().position(|m| *m == method).unwrap() as u64;
    let base_seed = derive_seed(
        derive_seed(seed, 0xf01d, fold.fold_id as u64),
        0x300d,
        mode_idx * 8 + method_idx,
    );
    let base = PredictorConfig::new(method, base_seed);
    let (best_config, cells) = sweep_hyperparams(
        method,
        &base,
        &static_train,
        &dynamic_train,
        &static_val,
        &dynamic_val,
    )?;
    let models: Vec<Predictor> = train_ensemble(
        &best_config,
        &static_train,
        &dynamic_train,
        &static_val,
        &dynamic_val,
    )?;
    let test_data = &data.speakers[&fold.test_speaker];
    let sample = if method.is_dynamic() {
        Sample::Dynamic(&test_data.dynamic)
    } else {
        Sample::Static(&test_data.static_row)
    };
    let predicted = ensemble_predict(&models, sample)?;
    let (label_positive, stage) = fold.speaker_labels[&fold.test_speaker];
    Ok((
        SpeakerPrediction {
            speaker_id: fold.test_speaker.clone(),
            stage,
            label_positive,
            predicted,
        },
        cells,
        best_config,
    ))
}

/// Convenience single-call LOSO for one (mode, method).
pub fn run_loso(
    corpus: &[SpeakerRecord],
    resources: &CorpusResources,
    mode: Mode,
    method: Method,
    seed: u64,
    settings: RunSettings,
) -> Result<MethodRun> {
    let harness = LosoHarness::build(corpus, resources, &[mode], settings)?;
    harness.run(mode, method, seed)
}
