//! Audio ingestion: mono PCM segments and a minimal 16-bit WAV reader/writer.
//!
//! Samples are normalized to `[-1, 1]` floats at ingestion regardless of the
//! container bit depth. Resampling is out of scope; a rate mismatch against
//! the corpus expectation is rejected with a clear error.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A mono audio segment attributed to one speaker utterance.
#[derive(Debug, Clone)]
pub struct AudioSegment {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub speaker_id: String,
    pub utterance_index: usize,
}

impl AudioSegment {
    pub fn new(samples: Vec<f64>, sample_rate: u32, speaker_id: &str, utterance_index: usize) -> Self {
        AudioSegment {
            samples,
            sample_rate,
            speaker_id: speaker_id.to_string(),
            utterance_index,
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Extract the sub-segment covering `[start, end)` seconds.
    pub fn slice_secs(&self, start: f64, end: f64, utterance_index: usize) -> AudioSegment {
        let a = ((start * self.sample_rate as f64).round() as usize).min(self.samples.len());
        let b = ((end * self.sample_rate as f64).round() as usize).min(self.samples.len());
        AudioSegment {
            samples: self.samples[a..b.max(a)].to_vec(),
            sample_rate: self.sample_rate,
            speaker_id: self.speaker_id.clone(),
            utterance_index,
        }
    }
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn read_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([buf[at], buf[at + 1]])
}

/// Read an uncompressed 16-bit mono PCM WAV file.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 44 || &buf[0..4] != b"RIFF" || &buf[8..12] != b"WAVE" {
        return Err(Error::AudioFormat(format!("{}: not a RIFF/WAVE file", path.display())));
    }
    let mut at = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while at + 8 <= buf.len() {
        let id = &buf[at..at + 4];
        let size = read_u32(&buf, at + 4) as usize;
        let body = at + 8;
        if body + size > buf.len() {
            return Err(Error::AudioFormat(format!("{}: truncated chunk", path.display())));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::AudioFormat(format!("{}: short fmt chunk", path.display())));
                }
                fmt = Some((
                    read_u16(&buf, body),
                    read_u16(&buf, body + 2),
                    read_u32(&buf, body + 4),
                    read_u16(&buf, body + 14),
                ));
            }
            b"data" => data = Some(&buf[body..body + size]),
            _ => {}
        }
        // chunks are word-aligned
        at = body + size + (size & 1);
    }
    let (audio_format, channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::AudioFormat(format!("{}: missing fmt chunk", path.display())))?;
    let data = data.ok_or_else(|| Error::AudioFormat(format!("{}: missing data chunk", path.display())))?;
    if audio_format != 1 {
        return Err(Error::AudioFormat(format!(
            "{}: compressed WAV (format tag {audio_format}) not supported",
            path.display()
        )));
    }
    if channels != 1 {
        return Err(Error::AudioFormat(format!(
            "{}: expected mono audio, got {channels} channels",
            path.display()
        )));
    }
    if bits != 16 {
        return Err(Error::AudioFormat(format!(
            "{}: expected 16-bit PCM, got {bits}-bit",
            path.display()
        )));
    }
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    Ok((samples, sample_rate))
}

/// Write a 16-bit mono PCM WAV file; samples are clamped to `[-1, 1]`.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let n = samples.len() as u32;
    let data_size = n * 2;
    let mut out = Vec::with_capacity(44 + data_size as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.01).sin() * 0.5).collect();
        write_wav(&path, &samples, 16000).unwrap();
        let (back, rate) = read_wav(&path).unwrap();
        assert_eq!(rate, 16000);
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn rejects_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        // hand-build a stereo header
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&40u32.to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&64000u32.to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&path, &out).unwrap();
        assert!(matches!(read_wav(&path), Err(Error::AudioFormat(_))));
    }
}
