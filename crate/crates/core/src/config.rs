//! Engine configuration, loadable from TOML.

use crate::backend::GeneratorConfig;
use crate::events::MatchSource;
use crate::feedback::ClassifierConfig;
use crate::modes::ModeBands;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub classifier: ClassifierConfig,
    pub mode_bands: ModeBands,
    pub backend: GeneratorConfig,
    pub match_source: MatchSource,
    /// How long a turn request waits for the session lock before giving up.
    pub turn_wait_secs: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierConfig::default(),
            mode_bands: ModeBands::default(),
            backend: GeneratorConfig::default(),
            match_source: MatchSource::Lexical,
            turn_wait_secs: 5.0,
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(input: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(input)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn turn_wait(&self) -> Duration {
        Duration::from_secs_f64(self.turn_wait_secs.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(EngineConfig::from_toml_str("").unwrap(), EngineConfig::default());
    }

    #[test]
    fn partial_sections_merge() {
        let c = EngineConfig::from_toml_str(
            "match_source = \"backend\"\n[mode_bands]\nteachable_at = 0.9\n[backend]\nmax_retries = 1\n",
        )
        .unwrap();
        assert_eq!(c.match_source, MatchSource::Backend);
        assert_eq!(c.mode_bands.teachable_at, 0.9);
        assert_eq!(c.mode_bands.tutoring_below, 0.5);
        assert_eq!(c.backend.max_retries, 1);
        assert_eq!(c.backend.api_key_env, "TUTOR_LLM_API_KEY");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(EngineConfig::from_toml_str("api_key = \"x\"").is_err());
    }
}
