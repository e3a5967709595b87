//! Run configuration: transcription modes, classifier methods, seed, and
//! every surfaced threshold. Loaded from a JSON file; all fields except the
//! seed have defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::Method;
use crate::error::{Error, Result};
use crate::eval::loso::RunSettings;
use crate::features::{INFO_GAIN_EPS, VARIANCE_EPS};
use crate::transcription::Mode;

fn default_modes() -> Vec<String> {
    vec!["fa-orat".into(), "fa-gf".into(), "asrt".into()]
}

fn default_methods() -> Vec<String> {
    vec!["knn".into(), "dtw".into(), "dnn".into(), "lstm".into()]
}

fn default_pause_ms() -> f64 {
    150.0
}

fn default_lm_scale() -> f64 {
    1.0
}

fn default_max_gaussians() -> usize {
    500
}

fn default_em_iterations() -> usize {
    4
}

fn default_variance_eps() -> f64 {
    VARIANCE_EPS
}

fn default_info_gain_eps() -> f64 {
    INFO_GAIN_EPS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    /// Minimum pause duration in milliseconds.
    #[serde(default = "default_pause_ms")]
    pub pause_min_ms: f64,
    #[serde(default = "default_lm_scale")]
    pub lm_scale: f64,
    #[serde(default = "default_max_gaussians")]
    pub max_gaussians: usize,
    #[serde(default = "default_em_iterations")]
    pub em_iterations_per_stage: usize,
    #[serde(default = "default_variance_eps")]
    pub variance_eps: f64,
    #[serde(default = "default_info_gain_eps")]
    pub info_gain_eps: f64,
}

impl RunConfig {
    pub fn new(seed: u64) -> RunConfig {
        RunConfig {
            seed,
            modes: default_modes(),
            methods: default_methods(),
            pause_min_ms: default_pause_ms(),
            lm_scale: default_lm_scale(),
            max_gaussians: default_max_gaussians(),
            em_iterations_per_stage: default_em_iterations(),
            variance_eps: default_variance_eps(),
            info_gain_eps: default_info_gain_eps(),
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method required".into()));
        }
        self.parsed_modes()?;
        self.parsed_methods()?;
        if self.pause_min_ms < 0.0 {
            return Err(Error::Config("pause threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn parsed_modes(&self) -> Result<Vec<Mode>> {
        let mut out = Vec::new();
        for m in &self.modes {
            let mode = Mode::parse(m)?;
            if !out.contains(&mode) {
                out.push(mode);
            }
        }
        Ok(out)
    }

    pub fn parsed_methods(&self) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for m in &self.methods {
            let method = Method::parse(m)?;
            if !out.contains(&method) {
                out.push(method);
            }
        }
        Ok(out)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            pause_min_secs: self.pause_min_ms / 1000.0,
            lm_scale: self.lm_scale,
            max_gaussians: self.max_gaussians,
            em_iterations_per_stage: self.em_iterations_per_stage,
            variance_eps: self.variance_eps,
            info_gain_eps: self.info_gain_eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let config: RunConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.modes.len(), 3);
        assert_eq!(config.methods.len(), 4);
        assert_eq!(config.pause_min_ms, 150.0);
        assert_eq!(config.settings().pause_min_secs, 0.150);
    }

    #[test]
    fn bad_mode_is_rejected() {
        let config: RunConfig =
            serde_json::from_str(r#"{"seed": 1, "modes": ["bogus"]}"#).unwrap();
        assert!(config.validate().is_err());
    }
}
