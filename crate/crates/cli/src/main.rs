//! Batch entry point: corpus ingestion or synthesis, transcription and
//! fold building, feature export, LOSO evaluation, and report emission.
//! Exit codes: 0 success, 1 validation error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hdspeech_core::config::RunConfig;
use hdspeech_core::corpus::{ingest_corpus, load_corpus_dir, save_corpus_dir, CorpusManifest};
use hdspeech_core::dsp::MfccConfig;
use hdspeech_core::error::Error;
use hdspeech_core::eval::loso::{CorpusResources, FoldArtifacts, LosoHarness};
use hdspeech_core::eval::{generate_synthetic_corpus, SynthSpec};
use hdspeech_core::lexicon::parse_lexicon;
use hdspeech_core::pipeline::{emit_report, load_report, run_pipeline};

#[derive(Parser)]
#[command(name = "hdspeech", version, about = "Read-speech clinical classification pipeline")]
struct Cli {
    /// Worker threads for fold-level parallelism (0 = logical cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Corpus directory written by `ingest` or `synth`.
    #[arg(long)]
    corpus: PathBuf,
    /// Run configuration file (JSON). Optional when --seed is given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Transcription modes to run (fa-orat, fa-gf, asrt); overrides config.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Classifier methods to run (knn, dtw, dnn, lstm); overrides config.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a WAV corpus manifest and build a corpus directory.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus directory.
    Synth {
        /// Preset name (separable, graded, noiseless, asr-noise) or a path
        /// to a JSON spec file.
        #[arg(long, default_value = "separable")]
        spec: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build per-fold artifacts (acoustic/language models, transcriptions,
    /// features) without classifying.
    Transcribe(CommonRunArgs),
    /// Export feature tables from previously built fold artifacts.
    Features {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Full LOSO evaluation; resumes from fold artifacts when present.
    Evaluate(CommonRunArgs),
    /// Re-emit report tables from an existing report.json.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if let Some(core) = err.downcast_ref::<Error>() {
        match core {
            Error::Config(_)
            | Error::Manifest(_)
            | Error::InvalidInput(_)
            | Error::Lexicon { .. }
            | Error::Transcript { .. }
            | Error::SampleRateMismatch { .. }
            | Error::AudioFormat(_) => return ExitCode::from(1),
            _ => return ExitCode::from(2),
        }
    }
    ExitCode::from(2)
}

fn effective_config(args: &CommonRunArgs) -> anyhow::Result<RunConfig> {
    let mut config = match (&args.config, args.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig::new(seed),
        (None, None) => {
            return Err(Error::Config("either --config or --seed is required".into()).into())
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !args.modes.is_empty() {
        config.modes = args.modes.clone();
    }
    if !args.methods.is_empty() {
        config.methods = args.methods.clone();
    }
    config.validate()?;
    Ok(config)
}

fn load_resources(corpus_dir: &Path) -> anyhow::Result<(Vec<hdspeech_core::corpus::SpeakerRecord>, CorpusResources)> {
    let (speakers, phones, lexicon_text, passage, silence) = load_corpus_dir(corpus_dir)?;
    let lexicon = parse_lexicon(&lexicon_text, &phones)?;
    Ok((
        speakers,
        CorpusResources {
            lexicon,
            passage,
            phones,
            silence,
        },
    ))
}

fn fold_artifact_path(out: &Path, seed: u64, fold: usize) -> PathBuf {
    out.join("folds").join(format!("seed{seed}_fold{fold:02}_artifacts.json"))
}

fn save_fold_artifacts(out: &Path, seed: u64, harness: &LosoHarness) -> anyhow::Result<()> {
    std::fs::create_dir_all(out.join("folds"))?;
    for fold in &harness.folds {
        std::fs::write(
            fold_artifact_path(out, seed, fold.fold_id),
            serde_json::to_string(fold)?,
        )?;
    }
    Ok(())
}

fn try_load_fold_artifacts(out: &Path, seed: u64, n: usize) -> Option<Vec<FoldArtifacts>> {
    let mut folds = Vec::with_capacity(n);
    for fold in 0..n {
        let path = fold_artifact_path(out, seed, fold);
        let text = std::fs::read_to_string(path).ok()?;
        folds.push(serde_json::from_str(&text).ok()?);
    }
    Some(folds)
}

fn cmd_ingest(manifest: &Path, out: &Path) -> anyhow::Result<()> {
    let manifest_dir = manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let m = CorpusManifest::load(manifest)?;
    let mfcc = MfccConfig::default();
    let speakers = ingest_corpus(&m, &manifest_dir, &mfcc)?;
    let lexicon_text = std::fs::read_to_string(manifest_dir.join(&m.lexicon))?;
    let passage = hdspeech_core::corpus::load_passage(&manifest_dir.join(&m.passage))?;
    // phone inventory: silence plus every phone used by the lexicon
    let probe = parse_lexicon(&lexicon_text, &all_symbols(&lexicon_text))?;
    let mut phones = vec!["sil".to_string()];
    phones.extend(probe.phone_inventory());
    save_corpus_dir(out, &speakers, &phones, &lexicon_text, &passage, "sil")?;
    println!("ingested {} speakers into {}", speakers.len(), out.display());
    Ok(())
}

/// Permissive symbol harvest used only to parse a lexicon whose inventory is
/// defined by the file itself.
fn all_symbols(lexicon_text: &str) -> Vec<String> {
    let mut set: Vec<String> = lexicon_text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace().skip(1).map(str::to_string))
        .collect();
    set.sort();
    set.dedup();
    set
}

fn cmd_synth(spec_arg: &str, seed: u64, out: &Path) -> anyhow::Result<()> {
    let spec = match spec_arg {
        "separable" => SynthSpec::separable(),
        "graded" => SynthSpec::graded(),
        "noiseless" => SynthSpec::noiseless(),
        "asr-noise" => SynthSpec::asr_noise(),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read spec {path}: {e}")))?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
    };
    let corpus = generate_synthetic_corpus(&spec, seed)?;
    save_corpus_dir(
        out,
        &corpus.speakers,
        &corpus.phones,
        &corpus.lexicon_text,
        &corpus.passage,
        "sil",
    )?;
    corpus.generating_model.save(&out.join("generating_model.json"))?;
    std::fs::write(
        out.join("ground_truth.json"),
        serde_json::to_string(&corpus.ground_truth)?,
    )?;
    std::fs::write(out.join("synth_spec.json"), serde_json::to_string_pretty(&spec)?)?;
    println!(
        "generated {} speakers ({} sentences each) into {}",
        corpus.speakers.len(),
        corpus.passage.len(),
        out.display()
    );
    Ok(())
}

fn cmd_transcribe(args: &CommonRunArgs) -> anyhow::Result<()> {
    let config = effective_config(args)?;
    let (speakers, resources) = load_resources(&args.corpus)?;
    let modes = config.parsed_modes()?;
    let harness = LosoHarness::build(&speakers, &resources, &modes, config.settings())?;
    save_fold_artifacts(&args.out, config.seed, &harness)?;
    println!(
        "built {} folds ({} modes) into {}",
        harness.folds.len(),
        modes.len(),
        args.out.join("folds").display()
    );
    Ok(())
}

fn cmd_features(out: &Path, seed: u64) -> anyhow::Result<()> {
    let fold_dir = out.join("folds");
    let mut folds: Vec<FoldArtifacts> = Vec::new();
    let mut k = 0;
    loop {
        let path = fold_artifact_path(out, seed, k);
        if !path.exists() {
            break;
        }
        folds.push(serde_json::from_str(&std::fs::read_to_string(path)?)?);
        k += 1;
    }
    if folds.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no fold artifacts for seed {seed} under {}",
            fold_dir.display()
        ))
        .into());
    }
    let harness = LosoHarness::from_folds(folds, Default::default())?;
    hdspeech_core::pipeline::export_feature_tables(&harness, out, seed)?;
    println!("feature tables written to {}", out.display());
    Ok(())
}

fn cmd_evaluate(args: &CommonRunArgs) -> anyhow::Result<()> {
    let config = effective_config(args)?;
    let (speakers, resources) = load_resources(&args.corpus)?;
    let report = match try_load_fold_artifacts(&args.out, config.seed, speakers.len()) {
        Some(folds) => {
            let harness = LosoHarness::from_folds(folds, config.settings())?;
            hdspeech_core::pipeline::run_pipeline_with_harness(&config, &harness, &args.out)?
        }
        None => {
            let report = run_pipeline(&config, &speakers, &resources, &args.out)?;
            report
        }
    };
    for run in &report.runs {
        println!(
            "{} {}: accuracy {:.3}, F1 {:.3}",
            run.mode, run.method, run.accuracy, run.f1_positive
        );
    }
    println!(
        "Cochran Q({}) = {:.3}, p = {:.3}",
        report.cochran.df, report.cochran.q, report.cochran.p_value
    );
    println!("report written to {}", args.out.join("report.json").display());
    Ok(())
}

fn cmd_report(out: &Path) -> anyhow::Result<()> {
    let report = load_report(&out.join("report.json"))?;
    emit_report(&report, out)?;
    println!("tables re-emitted under {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Ingest { manifest, out } => cmd_ingest(manifest, out),
        Command::Synth { spec, seed, out } => cmd_synth(spec, *seed, out),
        Command::Transcribe(args) => with_failure_marker(&args.out, || cmd_transcribe(args)),
        Command::Features { out, seed } => cmd_features(out, *seed),
        Command::Evaluate(args) => with_failure_marker(&args.out, || cmd_evaluate(args)),
        Command::Report { out } => cmd_report(out),
    }
}

/// Retain partial artifacts and drop a failure marker when a stage fails.
fn with_failure_marker(out: &Path, f: impl FnOnce() -> anyhow::Result<()>) -> anyhow::Result<()> {
    match f() {
        Ok(()) => {
            let _ = std::fs::remove_file(out.join("FAILED"));
            Ok(())
        }
        Err(e) => {
            let _ = std::fs::create_dir_all(out);
            let _ = std::fs::write(out.join("FAILED"), format!("{e}\n"));
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
