//! Corpus representation and ingestion: speaker records, the corpus
//! manifest, and WAV-backed loading.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, AudioSegment};
use crate::dsp::{extract_mfcc, FeatureMatrix, MfccConfig};
use crate::error::{Error, Result};
use crate::transcript::{load_transcript, AnnotatedTranscript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "HD")]
    Hd,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Hc => "HC",
            Label::Hd => "HD",
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Label::Hd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Control,
    Premanifest,
    Early,
    Late,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Control, Stage::Premanifest, Stage::Early, Stage::Late];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Control => "control",
            Stage::Premanifest => "premanifest",
            Stage::Early => "early",
            Stage::Late => "late",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        match s.to_lowercase().as_str() {
            "control" => Ok(Stage::Control),
            "premanifest" => Ok(Stage::Premanifest),
            "early" => Ok(Stage::Early),
            "late" => Ok(Stage::Late),
            other => Err(Error::Manifest(format!("unknown stage {other}"))),
        }
    }
}

/// One utterance's observation stream.
#[derive(Debug, Clone)]
pub struct Utterance {
    pub index: usize,
    pub features: FeatureMatrix,
}

/// A speaker: label, stage, ordered utterances, whole-recording features
/// (for passage alignment), and the manual transcript.
#[derive(Debug, Clone)]
pub struct SpeakerRecord {
    pub speaker_id: String,
    pub label: Label,
    pub stage: Stage,
    pub utterances: Vec<Utterance>,
    pub full_features: FeatureMatrix,
    pub transcript: AnnotatedTranscript,
}

impl SpeakerRecord {
    pub fn validate(&self) -> Result<()> {
        let consistent = (self.stage == Stage::Control) == (self.label == Label::Hc);
        if !consistent {
            return Err(Error::Manifest(format!(
                "speaker {}: stage {} inconsistent with label {}",
                self.speaker_id,
                self.stage.as_str(),
                self.label.as_str()
            )));
        }
        self.transcript.validate()?;
        if self.utterances.len() != self.transcript.utterances.len() {
            return Err(Error::Manifest(format!(
                "speaker {}: {} feature streams vs {} transcript utterances",
                self.speaker_id,
                self.utterances.len(),
                self.transcript.utterances.len()
            )));
        }
        Ok(())
    }

    pub fn utterance_features(&self) -> Vec<FeatureMatrix> {
        self.utterances.iter().map(|u| u.features.clone()).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSpeaker {
    pub id: String,
    pub label: Label,
    pub stage: Stage,
    pub audio: PathBuf,
    pub transcript: PathBuf,
}

/// The corpus manifest: speaker table plus shared resources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub speakers: Vec<ManifestSpeaker>,
    pub passage: PathBuf,
    pub lexicon: PathBuf,
    pub sample_rate: u32,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<CorpusManifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Manifest(format!("cannot read {}: {e}", path.display())))?;
        let manifest: CorpusManifest = serde_json::from_str(&text)?;
        let mut seen = BTreeSet::new();
        for s in &manifest.speakers {
            if !seen.insert(s.id.clone()) {
                return Err(Error::Manifest(format!("duplicate speaker id {}", s.id)));
            }
        }
        Ok(manifest)
    }
}

/// Load the passage file: one sentence per line, words separated by spaces.
pub fn load_passage(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    let passage: Vec<Vec<String>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|w| w.to_lowercase()).collect())
        .collect();
    if passage.is_empty() {
        return Err(Error::InvalidInput(format!("empty passage file {}", path.display())));
    }
    Ok(passage)
}

/// Load audio and transcripts for every manifest speaker, slice utterances
/// by transcript spans, extract features, and return records sorted by id.
pub fn ingest_corpus(
    manifest: &CorpusManifest,
    base_dir: &Path,
    mfcc: &MfccConfig,
) -> Result<Vec<SpeakerRecord>> {
    let mut records = Vec::with_capacity(manifest.speakers.len());
    for spk in &manifest.speakers {
        let audio_path = base_dir.join(&spk.audio);
        if !audio_path.exists() {
            return Err(Error::Manifest(format!(
                "audio not found for speaker {}: {}",
                spk.id,
                audio_path.display()
            )));
        }
        let transcript_path = base_dir.join(&spk.transcript);
        if !transcript_path.exists() {
            return Err(Error::Manifest(format!(
                "transcript not found for speaker {}: {}",
                spk.id,
                transcript_path.display()
            )));
        }
        let (samples, rate) = read_wav(&audio_path)?;
        if rate != manifest.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: manifest.sample_rate,
                actual: rate,
            });
        }
        let transcript = load_transcript(&transcript_path)?;
        let full_audio = AudioSegment::new(samples, rate, &spk.id, 0);
        let full_features = extract_mfcc(&full_audio, mfcc)?;
        let mut utterances = Vec::with_capacity(transcript.utterances.len());
        for (i, utt) in transcript.utterances.iter().enumerate() {
            let segment = full_audio.slice_secs(utt.start_secs, utt.end_secs, i);
            let features = extract_mfcc(&segment, mfcc)?;
            utterances.push(Utterance { index: i, features });
        }
        let record = SpeakerRecord {
            speaker_id: spk.id.clone(),
            label: spk.label,
            stage: spk.stage,
            utterances,
            full_features,
            transcript,
        };
        record.validate()?;
        records.push(record);
    }
    records.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
    Ok(records)
}

/// Index file of an on-disk corpus directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub speakers: Vec<CorpusIndexSpeaker>,
    pub silence: String,
    pub frame_shift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndexSpeaker {
    pub id: String,
    pub label: Label,
    pub stage: Stage,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpeakerFeaturesFile {
    utterances: Vec<FeatureMatrix>,
    full: FeatureMatrix,
}

/// Write a corpus (from ingestion or synthesis) as a resumable directory:
/// `corpus.json`, `lexicon.txt`, `passage.txt`, `phones.txt`, and per-speaker
/// feature and transcript files.
pub fn save_corpus_dir(
    dir: &Path,
    speakers: &[SpeakerRecord],
    phones: &[String],
    lexicon_text: &str,
    passage: &[Vec<String>],
    silence: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir.join("speakers"))?;
    let index = CorpusIndex {
        speakers: speakers
            .iter()
            .map(|s| CorpusIndexSpeaker {
                id: s.speaker_id.clone(),
                label: s.label,
                stage: s.stage,
            })
            .collect(),
        silence: silence.to_string(),
        frame_shift: speakers
            .first()
            .map(|s| s.full_features.frame_shift)
            .unwrap_or(0.01),
    };
    std::fs::write(dir.join("corpus.json"), serde_json::to_string_pretty(&index)?)?;
    std::fs::write(dir.join("lexicon.txt"), lexicon_text)?;
    std::fs::write(dir.join("phones.txt"), phones.join("\n") + "\n")?;
    let passage_text: String = passage
        .iter()
        .map(|s| s.join(" ") + "\n")
        .collect();
    std::fs::write(dir.join("passage.txt"), passage_text)?;
    for s in speakers {
        let file = SpeakerFeaturesFile {
            utterances: s.utterances.iter().map(|u| u.features.clone()).collect(),
            full: s.full_features.clone(),
        };
        std::fs::write(
            dir.join("speakers").join(format!("{}.features.json", s.speaker_id)),
            serde_json::to_string(&file)?,
        )?;
        std::fs::write(
            dir.join("speakers").join(format!("{}.transcript.txt", s.speaker_id)),
            crate::transcript::format_transcript(&s.transcript),
        )?;
    }
    Ok(())
}

/// Load a corpus directory written by `save_corpus_dir`.
pub fn load_corpus_dir(dir: &Path) -> Result<(Vec<SpeakerRecord>, Vec<String>, String, Vec<Vec<String>>, String)> {
    let index: CorpusIndex = serde_json::from_str(
        &std::fs::read_to_string(dir.join("corpus.json"))
            .map_err(|e| Error::Manifest(format!("cannot read corpus index: {e}")))?,
    )?;
    let phones: Vec<String> = std::fs::read_to_string(dir.join("phones.txt"))?
        .lines()
        .map(str::to_string)
        .filter(|l| !l.is_empty())
        .collect();
    let lexicon_text = std::fs::read_to_string(dir.join("lexicon.txt"))?;
    let passage = load_passage(&dir.join("passage.txt"))?;
    let mut speakers = Vec::with_capacity(index.speakers.len());
    for s in &index.speakers {
        let file: SpeakerFeaturesFile = serde_json::from_str(&std::fs::read_to_string(
            dir.join("speakers").join(format!("{}.features.json", s.id)),
        )?)?;
        let transcript = load_transcript(&dir.join("speakers").join(format!("{}.transcript.txt", s.id)))?;
        let record = SpeakerRecord {
            speaker_id: s.id.clone(),
            label: s.label,
            stage: s.stage,
            utterances: file
                .utterances
                .into_iter()
                .enumerate()
                .map(|(i, features)| Utterance { index: i, features })
                .collect(),
            full_features: file.full,
            transcript,
        };
        record.validate()?;
        speakers.push(record);
    }
    speakers.sort_by(|a, b| a.speaker_id.cmp(&b.speaker_id));
    Ok((speakers, phones, lexicon_text, passage, index.silence))
}
