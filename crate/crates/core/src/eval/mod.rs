//! Leave-one-subject-out evaluation: fold orchestration, metrics, the
//! statistical analyses, and synthetic corpus generation.

pub mod loso;
pub mod metrics;
pub mod stats;
pub mod synth;

pub use loso::{run_loso, FoldArtifacts, LosoHarness, MethodRun, SpeakerPrediction};
pub use metrics::{compute_metrics, Metrics};
pub use stats::{cochrans_q, stage_feature_directions, t_test_two_sample, CochranQ, Direction, TTest};
pub use synth::{generate_synthetic_corpus, StageCounts, StageEffects, SynthSpec, SyntheticCorpus};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Stage;
use crate::error::{Error, Result};

/// Row-normalized stage-by-prediction confusion table. Rows follow
/// `Stage::ALL` order (control, premanifest, early, late); columns are
/// (predicted healthy, predicted positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionByStage {
    pub rows: BTreeMap<Stage, [f64; 2]>,
}

/// Average the per-stage prediction fractions over one or more prediction
/// sets (each weighted equally, as when pooling classifiers and modes).
pub fn confusion_by_stage(sets: &[Vec<SpeakerPrediction>]) -> Result<ConfusionByStage> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no prediction sets".into()));
    }
    let mut acc: BTreeMap<Stage, [f64; 2]> = BTreeMap::new();
    let mut counts: BTreeMap<Stage, usize> = BTreeMap::new();
    for set in sets {
        let mut per_stage: BTreeMap<Stage, (f64, f64)> = BTreeMap::new();
        for p in set {
            let e = per_stage.entry(p.stage).or_insert((0.0, 0.0));
            if p.predicted {
                e.1 += 1.0;
            } else {
                e.0 += 1.0;
            }
        }
        for (stage, (healthy, positive)) in per_stage {
            let total = healthy + positive;
            let row = acc.entry(stage).or_insert([0.0, 0.0]);
            row[0] += healthy / total;
            row[1] += positive / total;
            *counts.entry(stage).or_insert(0) += 1;
        }
    }
    let mut rows = BTreeMap::new();
    for (stage, row) in acc {
        let n = counts[&stage] as f64;
        rows.insert(stage, [row[0] / n, row[1] / n]);
    }
    Ok(ConfusionByStage { rows })
}

/// Percentages of significantly increased/decreased/unchanged features for
/// one feature family within one stage comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyShare {
    pub increase: f64,
    pub decrease: f64,
    pub no_change: f64,
    pub feature_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSignificance {
    /// stage -> family name -> shares. Families: "gop", "speech_rate",
    /// "pauses". A stage with too little data is absent.
    pub table: BTreeMap<Stage, BTreeMap<String, FamilyShare>>,
}

/// Feature family of a feature name, mirroring the reported groups.
pub fn feature_family(name: &str) -> Option<&'static str> {
    if name.starts_with("gop") {
        Some("gop")
    } else if name.starts_with("phone") || name.starts_with("word") {
        Some("speech_rate")
    } else if name.starts_with("pause") {
        Some("pauses")
    } else {
        None // filler features join the correction family but are unreported
    }
}

/// One (mode x method) run entry of the final report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub method: String,
    pub accuracy: f64,
    pub f1_positive: f64,
    pub predictions: Vec<SpeakerPrediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerRow {
    pub wer_mean: f64,
    pub wer_sd: f64,
    pub ins_mean: f64,
    pub ins_sd: f64,
    pub del_mean: f64,
    pub del_sd: f64,
    pub sub_mean: f64,
    pub sub_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerSpeakerRow {
    pub speaker_id: String,
    pub label: String,
    pub wer_percent: f64,
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub ref_len: usize,
}

/// Recognition-quality table: per-speaker rows plus All/HD/HC aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerTable {
    pub speakers: Vec<WerSpeakerRow>,
    pub all: WerRow,
    pub positive: WerRow,
    pub control: WerRow,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    (mean, sd)
}

impl WerTable {
    pub fn from_speakers(speakers: Vec<WerSpeakerRow>) -> WerTable {
        let agg = |rows: Vec<&WerSpeakerRow>| -> WerRow {
            let wer: Vec<f64> = rows.iter().map(|r| r.wer_percent).collect();
            let ins: Vec<f64> = rows.iter().map(|r| r.insertions as f64).collect();
            let del: Vec<f64> = rows.iter().map(|r| r.deletions as f64).collect();
            let sub: Vec<f64> = rows.iter().map(|r| r.substitutions as f64).collect();
            let (wer_mean, wer_sd) = mean_sd(&wer);
            let (ins_mean, ins_sd) = mean_sd(&ins);
            let (del_mean, del_sd) = mean_sd(&del);
            let (sub_mean, sub_sd) = mean_sd(&sub);
            WerRow {
                wer_mean,
                wer_sd,
                ins_mean,
                ins_sd,
                del_mean,
                del_sd,
                sub_mean,
                sub_sd,
            }
        };
        let all = agg(speakers.iter().collect());
        let positive = agg(speakers.iter().filter(|r| r.label == "HD").collect());
        let control = agg(speakers.iter().filter(|r| r.label == "HC").collect());
        WerTable {
            speakers,
            all,
            positive,
            control,
        }
    }
}

/// The complete machine-readable evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub runs: Vec<RunReport>,
    pub confusion: ConfusionByStage,
    pub cochran: CochranQ,
    pub wer: Option<WerTable>,
    pub stage_significance: Option<StageSignificance>,
}

/// Cochran's Q over per-speaker correctness indicators across all runs.
/// Speakers are matched across runs by id (rows), runs are treatments.
pub fn cochran_over_runs(runs: &[RunReport]) -> Result<CochranQ> {
    if runs.len() < 2 {
        // a single run has no treatment contrast
        return Ok(CochranQ {
            q: 0.0,
            df: runs.len().saturating_sub(1),
            p_value: 1.0,
        });
    }
    let ids: Vec<String> = runs[0].predictions.iter().map(|p| p.speaker_id.clone()).collect();
    let mut matrix = Vec::with_capacity(ids.len());
    for id in &ids {
        let mut row = Vec::with_capacity(runs.len());
        for run in runs {
            let p = run
                .predictions
                .iter()
                .find(|p| &p.speaker_id == id)
                .ok_or_else(|| Error::InvalidInput(format!("speaker {id} missing from a run")))?;
            row.push(p.predicted == p.label_positive);
        }
        matrix.push(row);
    }
    cochrans_q(&matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(id: &str, stage: Stage, label: bool, predicted: bool) -> SpeakerPrediction {
        SpeakerPrediction {
            speaker_id: id.into(),
            stage,
            label_positive: label,
            predicted,
        }
    }

    #[test]
    fn perfect_classifier_confusion() {
        let set = vec![
            pred("a", Stage::Control, false, false),
            pred("b", Stage::Control, false, false),
            pred("c", Stage::Premanifest, true, true),
            pred("d", Stage::Early, true, true),
            pred("e", Stage::Late, true, true),
        ];
        let c = confusion_by_stage(&[set]).unwrap();
        assert_eq!(c.rows[&Stage::Control], [1.0, 0.0]);
        assert_eq!(c.rows[&Stage::Premanifest], [0.0, 1.0]);
        assert_eq!(c.rows[&Stage::Late], [0.0, 1.0]);
    }

    #[test]
    fn confusion_rows_sum_to_one_and_average_runs() {
        let run1 = vec![
            pred("a", Stage::Control, false, false),
            pred("b", Stage::Control, false, true),
            pred("c", Stage::Early, true, true),
            pred("d", Stage::Early, true, false),
        ];
        let run2 = vec![
            pred("a", Stage::Control, false, false),
            pred("b", Stage::Control, false, false),
            pred("c", Stage::Early, true, true),
            pred("d", Stage::Early, true, true),
        ];
        let c = confusion_by_stage(&[run1, run2]).unwrap();
        for row in c.rows.values() {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-9);
        }
        // control: run1 0.5 healthy, run2 1.0 -> 0.75
        assert!((c.rows[&Stage::Control][0] - 0.75).abs() < 1e-12);
        // two speakers per stage: each cell in {0, 0.5, 1} per run
        assert!((c.rows[&Stage::Early][1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn family_mapping() {
        assert_eq!(feature_family("gop_mean"), Some("gop"));
        assert_eq!(feature_family("gop_phone_p03_q25"), Some("gop"));
        assert_eq!(feature_family("phones_per_sec_mean"), Some("speech_rate"));
        assert_eq!(feature_family("words_per_sec"), Some("speech_rate"));
        assert_eq!(feature_family("pause_dur"), Some("pauses"));
        assert_eq!(feature_family("filler_count"), None);
    }
}
