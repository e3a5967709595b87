//! End-to-end batch pipeline: build the LOSO harness, run every requested
//! (mode x method) combination, assemble the statistical analyses, and
//! write the report plus inspection artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use crate::config::RunConfig;
use crate::corpus::{SpeakerRecord, Stage};
use crate::error::{Error, Result};
use crate::eval::loso::{CorpusResources, LosoHarness};
use crate::eval::{
    cochran_over_runs, confusion_by_stage, compute_metrics, stage_feature_directions,
    Direction, EvaluationReport, FamilyShare, RunReport, StageSignificance, WerSpeakerRow,
    WerTable,
};
use crate::eval::feature_family;
use crate::features::summary_names;
use crate::transcription::Mode;

const SIGNIFICANCE_ALPHA: f64 = 0.05;

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Stage-versus-control feature analysis over the oracle-transcript mode:
/// utterance-level rows pooled from each fold's held-out speaker, restricted
/// to features retained by every fold's utterance-level filter.
fn build_stage_significance(harness: &LosoHarness) -> Result<Option<StageSignificance>> {
    let mode = Mode::FaOrat;
    if harness.folds.iter().any(|f| !f.modes.contains_key(&mode)) {
        return Ok(None);
    }
    // features retained in every fold
    let mut retained: Option<Vec<usize>> = None;
    for fold in &harness.folds {
        let filter = &fold.modes[&mode].dynamic_filter;
        retained = Some(match retained {
            None => filter.clone(),
            Some(prev) => prev.into_iter().filter(|i| filter.contains(i)).collect(),
        });
    }
    let retained = retained.unwrap_or_default();
    if retained.is_empty() {
        return Ok(None);
    }
    let schema = harness.folds[0].modes[&mode].schema.clone();
    // pooled test-speaker rows by stage
    let mut rows_by_stage: BTreeMap<Stage, Vec<Vec<f64>>> = BTreeMap::new();
    let mut speakers_by_stage: BTreeMap<Stage, usize> = BTreeMap::new();
    for fold in &harness.folds {
        let data = &fold.modes[&mode];
        let sd = &data.speakers[&fold.test_speaker];
        let (_, stage) = fold.speaker_labels[&fold.test_speaker];
        let entry = rows_by_stage.entry(stage).or_default();
        for row in &sd.normalized {
            entry.push(retained.iter().map(|&i| row[i]).collect());
        }
        *speakers_by_stage.entry(stage).or_insert(0) += 1;
    }
    let control_rows = match rows_by_stage.get(&Stage::Control) {
        Some(rows) if rows.len() >= 2 => rows.clone(),
        _ => return Ok(None),
    };
    let mut table = BTreeMap::new();
    for stage in [Stage::Premanifest, Stage::Early, Stage::Late] {
        let rows = match rows_by_stage.get(&stage) {
            Some(rows) => rows,
            None => continue,
        };
        // a stage needs at least two speakers' data to be comparable
        if speakers_by_stage.get(&stage).copied().unwrap_or(0) < 2 || rows.len() < 2 {
            continue;
        }
        let directions = stage_feature_directions(rows, &control_rows, SIGNIFICANCE_ALPHA)?;
        let mut families: BTreeMap<String, (usize, usize, usize, usize)> = BTreeMap::new();
        for (slot, &feat_idx) in retained.iter().enumerate() {
            let Some(family) = feature_family(&schema.names[feat_idx]) else {
                continue;
            };
            let e = families.entry(family.to_string()).or_insert((0, 0, 0, 0));
            e.3 += 1;
            match directions[slot] {
                Direction::Increase => e.0 += 1,
                Direction::Decrease => e.1 += 1,
                Direction::NoChange => e.2 += 1,
            }
        }
        let shares: BTreeMap<String, FamilyShare> = families
            .into_iter()
            .map(|(name, (inc, dec, none, count))| {
                let n = count as f64;
                (
                    name,
                    FamilyShare {
                        increase: inc as f64 / n,
                        decrease: dec as f64 / n,
                        no_change: none as f64 / n,
                        feature_count: count,
                    },
                )
            })
            .collect();
        table.insert(stage, shares);
    }
    if table.is_empty() {
        return Ok(None);
    }
    Ok(Some(StageSignificance { table }))
}

fn build_wer_table(harness: &LosoHarness) -> Option<WerTable> {
    let mode = Mode::Asrt;
    let mut rows = Vec::new();
    for fold in &harness.folds {
        let data = fold.modes.get(&mode)?;
        let sd = &data.speakers[&fold.test_speaker];
        let wer = sd.wer?;
        let (positive, _) = fold.speaker_labels[&fold.test_speaker];
        rows.push(WerSpeakerRow {
            speaker_id: fold.test_speaker.clone(),
            label: if positive { "HD".into() } else { "HC".into() },
            wer_percent: wer.wer_percent,
            insertions: wer.insertions,
            deletions: wer.deletions,
            substitutions: wer.substitutions,
            ref_len: wer.ref_len,
        });
    }
    rows.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
    Some(WerTable::from_speakers(rows))
}

/// Execute every requested (mode x method) LOSO run and assemble the report.
/// Intermediate artifacts (fold models, sweep logs, feature tables) land in
/// `out_dir`, named with the run seed and fold id.
pub fn run_pipeline(
    config: &RunConfig,
    corpus: &[SpeakerRecord],
    resources: &CorpusResources,
    out_dir: &Path,
) -> Result<EvaluationReport> {
    config.validate()?;
    let modes = config.parsed_modes()?;
    let settings = config.settings();
    let harness = LosoHarness::build(corpus, resources, &modes, settings)?;
    run_pipeline_with_harness(config, &harness, out_dir)
}

/// As `run_pipeline`, over an already-built (or reloaded) harness.
pub fn run_pipeline_with_harness(
    config: &RunConfig,
    harness: &LosoHarness,
    out_dir: &Path,
) -> Result<EvaluationReport> {
    config.validate()?;
    let modes = config.parsed_modes()?;
    let methods = config.parsed_methods()?;
    for &mode in &modes {
        if harness.folds.iter().any(|f| !f.modes.contains_key(&mode)) {
            return Err(Error::Config(format!(
                "mode {mode} missing from the fold artifacts"
            )));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let fold_dir = out_dir.join("folds");
    std::fs::create_dir_all(&fold_dir)?;
    harness.audit_no_leakage()?;
    let seed = config.seed;
    for fold in &harness.folds {
        fold.model
            .save(&fold_dir.join(format!("seed{seed}_fold{:02}_model.json", fold.fold_id)))?;
        std::fs::write(
            fold_dir.join(format!("seed{seed}_fold{:02}_training_log.json", fold.fold_id)),
            serde_json::to_string_pretty(&fold.training_log)?,
        )?;
    }
    export_feature_tables(&harness, out_dir, seed)?;

    let mut runs = Vec::new();
    for &mode in &modes {
        for &method in &methods {
            let run = harness.run(mode, method, seed)?;
            // sweep log: one row per fold x cell
            let mut rows = Vec::new();
            for (fold, cells) in run.fold_sweeps.iter().enumerate() {
                for cell in cells {
                    rows.push(vec![
                        fold.to_string(),
                        cell.k.to_string(),
                        cell.layer_width.to_string(),
                        fmt(cell.dropout),
                        fmt(cell.val_accuracy),
                    ]);
                }
            }
            write_csv(
                &out_dir.join(format!("sweep_seed{seed}_{mode}_{method}.csv")),
                &["fold", "k", "layer_width", "dropout", "val_accuracy"],
                &rows,
            )?;
            let predictions: Vec<bool> = run.predictions.iter().map(|p| p.predicted).collect();
            let labels: Vec<bool> = run.predictions.iter().map(|p| p.label_positive).collect();
            let metrics = compute_metrics(&predictions, &labels)?;
            runs.push(RunReport {
                mode: mode.to_string(),
                method: method.to_string(),
                accuracy: metrics.accuracy,
                f1_positive: metrics.f1_positive,
                predictions: run.predictions,
            });
        }
    }

    let confusion = confusion_by_stage(
        &runs
            .iter()
            .map(|r| r.predictions.clone())
            .collect::<Vec<_>>(),
    )?;
    let cochran = cochran_over_runs(&runs)?;
    let wer = if modes.contains(&Mode::Asrt) {
        build_wer_table(&harness)
    } else {
        None
    };
    let stage_significance = if modes.contains(&Mode::FaOrat) {
        build_stage_significance(&harness)?
    } else {
        None
    };
    let report = EvaluationReport {
        seed,
        runs,
        confusion,
        cochran,
        wer,
        stage_significance,
    };
    emit_report(&report, out_dir)?;
    Ok(report)
}

/// Export per-(mode, level) feature tables: the unfiltered z-normalized
/// utterance rows and their speaker-level summaries, each speaker taken
/// from the fold that held them out.
pub fn export_feature_tables(harness: &LosoHarness, out_dir: &Path, seed: u64) -> Result<()> {
    let modes: Vec<Mode> = harness.folds[0].modes.keys().copied().collect();
    for mode in modes {
        let schema = harness.folds[0].modes[&mode].schema.clone();
        let mut dynamic_rows = Vec::new();
        let mut static_rows = Vec::new();
        for fold in &harness.folds {
            let data = &fold.modes[&mode];
            let sd = &data.speakers[&fold.test_speaker];
            let (positive, stage) = fold.speaker_labels[&fold.test_speaker];
            let label = if positive { "HD" } else { "HC" };
            for (ui, row) in sd.normalized.iter().enumerate() {
                let mut cells = vec![
                    fold.test_speaker.clone(),
                    label.to_string(),
                    stage.as_str().to_string(),
                    ui.to_string(),
                ];
                cells.extend(row.iter().map(|v| fmt(*v)));
                dynamic_rows.push(cells);
            }
            let vectors: Vec<crate::features::UtteranceFeatureVector> = sd
                .normalized
                .iter()
                .map(|values| crate::features::UtteranceFeatureVector {
                    values: values.clone(),
                    duration_secs: 0.0,
                })
                .collect();
            let summary = crate::features::summarize_speaker(&vectors);
            let mut cells = vec![
                fold.test_speaker.clone(),
                label.to_string(),
                stage.as_str().to_string(),
            ];
            cells.extend(summary.iter().map(|v| fmt(*v)));
            static_rows.push(cells);
        }
        let mut dyn_header: Vec<&str> = vec!["speaker_id", "label", "stage", "utterance"];
        let names = schema.names.clone();
        dyn_header.extend(names.iter().map(String::as_str));
        write_csv(
            &out_dir.join(format!("features_seed{seed}_{mode}_dynamic.csv")),
            &dyn_header,
            &dynamic_rows,
        )?;
        let mut st_header: Vec<&str> = vec!["speaker_id", "label", "stage"];
        let snames = summary_names(&schema);
        st_header.extend(snames.iter().map(String::as_str));
        write_csv(
            &out_dir.join(format!("features_seed{seed}_{mode}_static.csv")),
            &st_header,
            &static_rows,
        )?;
    }
    Ok(())
}

/// Write the machine-readable report and the per-table CSVs.
pub fn emit_report(report: &EvaluationReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;

    // results table: one row per (mode, method)
    let rows: Vec<Vec<String>> = report
        .runs
        .iter()
        .map(|r| {
            vec![
                r.mode.clone(),
                r.method.clone(),
                fmt(r.accuracy),
                fmt(r.f1_positive),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("results_table.csv"),
        &["mode", "method", "accuracy", "f1_hd"],
        &rows,
    )?;

    // per-speaker predictions
    let mut rows = Vec::new();
    for run in &report.runs {
        for p in &run.predictions {
            rows.push(vec![
                run.mode.clone(),
                run.method.clone(),
                p.speaker_id.clone(),
                p.stage.as_str().to_string(),
                if p.label_positive { "HD" } else { "HC" }.to_string(),
                if p.predicted { "HD" } else { "HC" }.to_string(),
            ]);
        }
    }
    write_csv(
        &out_dir.join("predictions.csv"),
        &["mode", "method", "speaker_id", "stage", "label", "predicted"],
        &rows,
    )?;

    // confusion table
    let rows: Vec<Vec<String>> = report
        .confusion
        .rows
        .iter()
        .map(|(stage, row)| vec![stage.as_str().to_string(), fmt(row[0]), fmt(row[1])])
        .collect();
    write_csv(
        &out_dir.join("confusion_table.csv"),
        &["stage", "predicted_healthy", "predicted_hd"],
        &rows,
    )?;

    // statistical comparison of runs
    write_csv(
        &out_dir.join("cochran.csv"),
        &["q", "df", "p_value"],
        &[vec![
            fmt(report.cochran.q),
            report.cochran.df.to_string(),
            fmt(report.cochran.p_value),
        ]],
    )?;

    if let Some(wer) = &report.wer {
        let mut rows: Vec<Vec<String>> = wer
            .speakers
            .iter()
            .map(|r| {
                vec![
                    r.speaker_id.clone(),
                    r.label.clone(),
                    fmt(r.wer_percent),
                    r.insertions.to_string(),
                    r.deletions.to_string(),
                    r.substitutions.to_string(),
                ]
            })
            .collect();
        for (name, agg) in [("All", &wer.all), ("HD", &wer.positive), ("HC", &wer.control)] {
            rows.push(vec![
                name.to_string(),
                "aggregate".to_string(),
                format!("{}±{}", fmt(agg.wer_mean), fmt(agg.wer_sd)),
                format!("{}±{}", fmt(agg.ins_mean), fmt(agg.ins_sd)),
                format!("{}±{}", fmt(agg.del_mean), fmt(agg.del_sd)),
                format!("{}±{}", fmt(agg.sub_mean), fmt(agg.sub_sd)),
            ]);
        }
        write_csv(
            &out_dir.join("wer_table.csv"),
            &["speaker", "label", "wer_percent", "ins", "del", "sub"],
            &rows,
        )?;
    }

    if let Some(sig) = &report.stage_significance {
        let mut rows = Vec::new();
        for (stage, families) in &sig.table {
            for (family, share) in families {
                rows.push(vec![
                    stage.as_str().to_string(),
                    family.clone(),
                    fmt(share.increase),
                    fmt(share.decrease),
                    fmt(share.no_change),
                    share.feature_count.to_string(),
                ]);
            }
        }
        write_csv(
            &out_dir.join("significance_table.csv"),
            &["stage", "family", "increase", "decrease", "no_change", "features"],
            &rows,
        )?;
    }
    Ok(())
}

/// Load a previously written report.
pub fn load_report(path: &Path) -> Result<EvaluationReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
