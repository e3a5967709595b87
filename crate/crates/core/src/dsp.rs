//! MFCC frontend: framing, Hamming window, mel filterbank, DCT, and delta
//! features. Produces the 52-dimensional observation sequences (13 base
//! cepstra plus first/second/third order deltas) consumed by the acoustic
//! model.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioSegment;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const NUM_CEPSTRA: usize = 13;
pub const DELTA_ORDERS: usize = 3;
pub const FEATURE_DIM: usize = NUM_CEPSTRA * (1 + DELTA_ORDERS);

/// A frame sequence: `rows()` frames of `cols()` coefficients each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub frames: Matrix,
    /// Seconds between consecutive frame starts.
    pub frame_shift: f64,
    /// Seconds covered by one analysis window.
    pub frame_length: f64,
}

impl FeatureMatrix {
    pub fn new(frames: Matrix, frame_shift: f64, frame_length: f64) -> Self {
        FeatureMatrix {
            frames,
            frame_shift,
            frame_length,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    /// Duration attributed to the utterance: one shift per frame.
    pub fn duration_secs(&self) -> f64 {
        self.num_frames() as f64 * self.frame_shift
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MfccConfig {
    pub window_secs: f64,
    pub shift_secs: f64,
    pub num_filters: usize,
    pub num_cepstra: usize,
    pub low_freq: f64,
    /// Upper filterbank edge; 0 means the Nyquist frequency.
    pub high_freq: f64,
    pub log_floor: f64,
    /// Additive noise amplitude applied before windowing; 0 disables it,
    /// which keeps extraction fully deterministic.
    pub dither: f64,
    pub delta_orders: usize,
    pub delta_half_width: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_secs: 0.025,
            shift_secs: 0.010,
            num_filters: 23,
            num_cepstra: NUM_CEPSTRA,
            low_freq: 20.0,
            high_freq: 0.0,
            log_floor: 1e-10,
            dither: 0.0,
            delta_orders: DELTA_ORDERS,
            delta_half_width: 2,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank with continuous (non-snapped) bin weights.
/// Returns `num_filters` rows of `nfft/2 + 1` weights.
pub fn mel_filterbank(
    num_filters: usize,
    nfft: usize,
    sample_rate: f64,
    low_freq: f64,
    high_freq: f64,
) -> Vec<Vec<f64>> {
    let n_bins = nfft / 2 + 1;
    let mel_lo = hz_to_mel(low_freq);
    let mel_hi = hz_to_mel(high_freq);
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (num_filters + 1) as f64))
        .collect();
    let mut bank = Vec::with_capacity(num_filters);
    for m in 0..num_filters {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut filt = vec![0.0; n_bins];
        for (k, w) in filt.iter_mut().enumerate() {
            let f = k as f64 * sample_rate / nfft as f64;
            if f > left && f < right {
                *w = if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                };
            }
        }
        bank.push(filt);
    }
    bank
}

fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Orthonormal DCT-II, truncated to `n_out` coefficients.
fn dct_ii(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let mut sum = 0.0;
        for (i, &v) in x.iter().enumerate() {
            sum += v * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
        }
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        out.push(scale * sum);
    }
    out
}

/// Number of analysis frames for a signal of `num_samples`.
pub fn frame_count(num_samples: usize, window: usize, shift: usize) -> usize {
    if num_samples < window {
        0
    } else {
        (num_samples - window) / shift + 1
    }
}

/// Extract the base cepstra and append delta orders, yielding T x 52.
pub fn extract_mfcc(audio: &AudioSegment, config: &MfccConfig) -> Result<FeatureMatrix> {
    let base = extract_base_mfcc(audio, config)?;
    let frames = append_deltas(&base.frames, config.delta_orders, config.delta_half_width);
    Ok(FeatureMatrix::new(frames, base.frame_shift, base.frame_length))
}

/// Base 13-coefficient extraction: Hamming window, power spectrum, mel
/// filterbank, floored log, DCT-II.
pub fn extract_base_mfcc(audio: &AudioSegment, config: &MfccConfig) -> Result<FeatureMatrix> {
    if audio.sample_rate < 8000 {
        return Err(Error::InvalidInput(format!(
            "sample rate {} Hz below the 8 kHz minimum",
            audio.sample_rate
        )));
    }
    if audio.samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::CorruptAudio(format!(
            "non-finite samples in {} utterance {}",
            audio.speaker_id, audio.utterance_index
        )));
    }
    let rate = audio.sample_rate as f64;
    let window = (config.window_secs * rate).round() as usize;
    let shift = (config.shift_secs * rate).round() as usize;
    if audio.samples.len() < window {
        return Err(Error::UtteranceTooShort);
    }
    let nfft = window.next_power_of_two();
    let n_frames = frame_count(audio.samples.len(), window, shift);
    let high = if config.high_freq > 0.0 { config.high_freq } else { rate / 2.0 };
    let bank = mel_filterbank(config.num_filters, nfft, rate, config.low_freq, high);
    let win = hamming(window);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nfft);
    let mut dithered;
    let samples: &[f64] = if config.dither > 0.0 {
        // deterministic triangular dither derived from the sample index
        dithered = audio.samples.clone();
        let mut state = 0x9e3779b97f4a7c15u64;
        for s in dithered.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            *s += config.dither * (2.0 * u - 1.0);
        }
        &dithered
    } else {
        &audio.samples
    };

    let mut frames = Matrix::zeros(n_frames, config.num_cepstra);
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    for t in 0..n_frames {
        let start = t * shift;
        for i in 0..nfft {
            let v = if i < window { samples[start + i] * win[i] } else { 0.0 };
            buf[i] = Complex::new(v, 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..nfft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        let log_mel: Vec<f64> = bank
            .iter()
            .map(|filt| {
                let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(config.log_floor).ln()
            })
            .collect();
        let ceps = dct_ii(&log_mel, config.num_cepstra);
        frames.row_mut(t).copy_from_slice(&ceps);
    }
    Ok(FeatureMatrix::new(frames, shift as f64 / rate, window as f64 / rate))
}

/// Append `orders` delta blocks to `base` using the standard regression
/// filter with edge replication. Each order differentiates the previous one.
pub fn append_deltas(base: &Matrix, orders: usize, half_width: usize) -> Matrix {
    let mut blocks: Vec<Matrix> = vec![base.clone()];
    for _ in 0..orders {
        let prev = blocks.last().unwrap();
        blocks.push(delta_block(prev, half_width));
    }
    let refs: Vec<&Matrix> = blocks.iter().collect();
    Matrix::hconcat(&refs)
}

fn delta_block(src: &Matrix, half_width: usize) -> Matrix {
    let t_max = src.rows();
    let d = src.cols();
    let denom: f64 = 2.0 * (1..=half_width).map(|n| (n * n) as f64).sum::<f64>();
    let mut out = Matrix::zeros(t_max, d);
    for t in 0..t_max {
        for n in 1..=half_width {
            let fwd = (t + n).min(t_max - 1);
            let bwd = t.saturating_sub(n);
            for c in 0..d {
                let v = out.get(t, c) + n as f64 * (src.get(fwd, c) - src.get(bwd, c));
                out.set(t, c, v);
            }
        }
        for c in 0..d {
            out.set(t, c, out.get(t, c) / denom);
        }
    }
    out
}
