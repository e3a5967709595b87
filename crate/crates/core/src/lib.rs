//! Detection of a binary clinical condition from read speech.
//!
//! The pipeline: MFCC frontend, in-domain monophone HMM-GMM acoustic model,
//! three transcription regimes (alignment to oracle transcripts, alignment
//! to the canonical passage, and small-vocabulary recognition), clinically
//! inspired features (fillers, pauses, speech rate, pronunciation fit),
//! four classifiers, and leave-one-subject-out evaluation with the
//! accompanying statistical analyses. A synthetic-corpus generator makes
//! the whole pipeline verifiable end to end.

pub mod audio;
pub mod classify;
pub mod config;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod hmm;
pub mod lexicon;
pub mod lm;
pub mod matrix;
pub mod pipeline;
pub mod transcript;
pub mod transcription;

pub use error::{Error, Result};
