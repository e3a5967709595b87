//! Python bindings: the main feature-extraction, distance, metric, and
//! statistics operations, plus a one-call synthetic end-to-end pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hdspeech_core::audio::AudioSegment;
use hdspeech_core::classify::{knn_predict as core_knn, StaticDataset};
use hdspeech_core::config::RunConfig;
use hdspeech_core::corpus::save_corpus_dir;
use hdspeech_core::dsp::{extract_mfcc as core_mfcc, append_deltas as core_deltas, MfccConfig};
use hdspeech_core::eval::loso::CorpusResources;
use hdspeech_core::eval::{cochrans_q as core_cochran, generate_synthetic_corpus, t_test_two_sample, SynthSpec};
use hdspeech_core::lexicon::parse_lexicon;
use hdspeech_core::matrix::Matrix;
use hdspeech_core::pipeline::run_pipeline;
use hdspeech_core::transcription::compute_wer as core_wer;

fn value_err(e: hdspeech_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// 52-dimensional MFCC+delta frames for mono samples in [-1, 1].
#[pyfunction]
#[pyo3(signature = (samples, sample_rate))]
fn extract_mfcc(samples: Vec<f64>, sample_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    let audio = AudioSegment::new(samples, sample_rate, "py", 0);
    let features = core_mfcc(&audio, &MfccConfig::default()).map_err(value_err)?;
    Ok((0..features.num_frames())
        .map(|t| features.frames.row(t).to_vec())
        .collect())
}

/// Append delta blocks (regression half-width 2, edge replication).
#[pyfunction]
#[pyo3(signature = (base, orders = 3))]
fn append_deltas(base: Vec<Vec<f64>>, orders: usize) -> PyResult<Vec<Vec<f64>>> {
    if base.is_empty() {
        return Err(PyValueError::new_err("empty frame list"));
    }
    let m = Matrix::from_rows(base);
    let out = core_deltas(&m, orders, 2);
    Ok((0..out.rows()).map(|t| out.row(t).to_vec()).collect())
}

/// DTW distance (unit steps, Euclidean local cost, no normalization).
#[pyfunction]
fn dtw_distance(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    hdspeech_core::classify::dtw_distance(&a, &b).map_err(value_err)
}

/// Word error rate with insertion/deletion/substitution decomposition.
#[pyfunction]
fn compute_wer<'py>(
    py: Python<'py>,
    reference: Vec<String>,
    hypothesis: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let w = core_wer(&reference, &hypothesis).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("wer_percent", w.wer_percent)?;
    d.set_item("insertions", w.insertions)?;
    d.set_item("deletions", w.deletions)?;
    d.set_item("substitutions", w.substitutions)?;
    Ok(d)
}

/// k-nearest-neighbor label for a query row (labels are booleans).
#[pyfunction]
fn knn_predict(rows: Vec<Vec<f64>>, labels: Vec<bool>, query: Vec<f64>, k: usize) -> PyResult<bool> {
    let train = StaticDataset { rows, labels };
    core_knn(&train, &query, k).map_err(value_err)
}

/// Cochran's Q over a subjects x treatments binary matrix:
/// returns (Q, df, p).
#[pyfunction]
fn cochrans_q(matrix: Vec<Vec<bool>>) -> PyResult<(f64, usize, f64)> {
    let r = core_cochran(&matrix).map_err(value_err)?;
    Ok((r.q, r.df, r.p_value))
}

/// Pooled-variance two-sample t-test, two-tailed: returns (t, df, p).
#[pyfunction]
fn t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = t_test_two_sample(&a, &b).map_err(value_err)?;
    Ok((r.t, r.df, r.p_value))
}

fn spec_from_name(preset: &str) -> PyResult<SynthSpec> {
    match preset {
        "separable" => Ok(SynthSpec::separable()),
        "graded" => Ok(SynthSpec::graded()),
        "noiseless" => Ok(SynthSpec::noiseless()),
        "asr-noise" => Ok(SynthSpec::asr_noise()),
        other => serde_json::from_str(other)
            .map_err(|e| PyValueError::new_err(format!("not a preset or spec JSON: {e}"))),
    }
}

/// Generate a synthetic corpus directory (preset name or spec JSON string).
#[pyfunction]
fn generate_corpus_dir(spec: &str, seed: u64, out_dir: &str) -> PyResult<usize> {
    let spec = spec_from_name(spec)?;
    let corpus = generate_synthetic_corpus(&spec, seed).map_err(value_err)?;
    save_corpus_dir(
        std::path::Path::new(out_dir),
        &corpus.speakers,
        &corpus.phones,
        &corpus.lexicon_text,
        &corpus.passage,
        "sil",
    )
    .map_err(value_err)?;
    Ok(corpus.speakers.len())
}

/// Run the full synthetic pipeline and return the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (spec, seed, out_dir, modes = vec!["fa-orat".to_string()], methods = vec!["knn".to_string()], max_gaussians = 60, em_iterations = 2))]
#[allow(clippy::too_many_arguments)]
fn run_synthetic_pipeline(
    spec: &str,
    seed: u64,
    out_dir: &str,
    modes: Vec<String>,
    methods: Vec<String>,
    max_gaussians: usize,
    em_iterations: usize,
) -> PyResult<String> {
    let spec = spec_from_name(spec)?;
    let corpus = generate_synthetic_corpus(&spec, seed).map_err(value_err)?;
    let resources = CorpusResources {
        lexicon: parse_lexicon(&corpus.lexicon_text, &corpus.phones).map_err(value_err)?,
        passage: corpus.passage.clone(),
        phones: corpus.phones.clone(),
        silence: "sil".to_string(),
    };
    let mut config = RunConfig::new(seed);
    config.modes = modes;
    config.methods = methods;
    config.max_gaussians = max_gaussians;
    config.em_iterations_per_stage = em_iterations;
    let report = run_pipeline(
        &config,
        &corpus.speakers,
        &resources,
        std::path::Path::new(out_dir),
    )
    .map_err(value_err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn hdspeech_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(extract_mfcc, m)?)?;
    m.add_function(wrap_pyfunction!(append_deltas, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(compute_wer, m)?)?;
    m.add_function(wrap_pyfunction!(knn_predict, m)?)?;
    m.add_function(wrap_pyfunction!(cochrans_q, m)?)?;
    m.add_function(wrap_pyfunction!(t_test, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus_dir, m)?)?;
    m.add_function(wrap_pyfunction!(run_synthetic_pipeline, m)?)?;
    Ok(())
}
