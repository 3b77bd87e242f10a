//! Settings: built-in defaults, overridden by the `--config` file,
//! overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use alo_core::gateway::{
    ChatBackend, LiveBackend, LiveConfig, MockBackend, DEFAULT_DIMENSION, DEFAULT_MAX_TOKENS,
};
use alo_core::sim::{Bounds, DEFAULT_DT};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// The temperature for single completions (`create`, `interact`).
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_REGISTRY: &str = "registry";
pub const DEFAULT_OUT: &str = "runs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Mock,
    Live,
}

impl BackendChoice {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        <Self as ValueEnum>::from_str(s, true)
            .map_err(|_| CliError::usage(format!("unknown backend `{s}`; expected mock or live")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct WorldDefaults {
    pub bounds: Bounds,
    pub dt: f64,
}

impl Default for WorldDefaults {
    fn default() -> Self {
        Self { bounds: Bounds::default(), dt: DEFAULT_DT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct GatewaySettings {
    /// Live only; falls back to the base-URL environment variable.
    pub base_url: Option<String>,
    pub chat_model: Option<String>,
    pub embedding_model: Option<String>,
    pub timeout_secs: Option<u64>,
    pub attempts: Option<u32>,
    /// Concurrent requests during `analyze`.
    pub in_flight: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Mock embedding size.
    pub embedding_dimension: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            base_url: None,
            chat_model: None,
            embedding_model: None,
            timeout_secs: None,
            attempts: None,
            in_flight: 4,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            embedding_dimension: DEFAULT_DIMENSION,
        }
    }
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct CliConfig {
    pub backend: Option<BackendChoice>,
    pub registry: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub world: WorldDefaults,
    pub gateway: GatewaySettings,
    /// Directory of prompt template overrides.
    pub templates: Option<PathBuf>,
    /// Parameter lexicon override for `image-prompt`.
    pub lexicon: Option<PathBuf>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Flags as given on the command line; `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub backend: Option<BackendChoice>,
    pub seed: Option<u64>,
    pub registry: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a command needs, merged.
#[derive(Clone, Debug)]
pub struct Settings {
    pub backend: BackendChoice,
    /// Whether the backend was chosen explicitly (flag or config file).
    pub backend_explicit: bool,
    pub seed: u64,
    /// Whether the seed was chosen explicitly (flag or config file).
    pub seed_explicit: bool,
    pub registry: PathBuf,
    pub out: PathBuf,
    pub world: WorldDefaults,
    pub gateway: GatewaySettings,
    pub templates: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(config: CliConfig, flags: Overrides) -> Result<Self, CliError> {
        let world = config.world;
        if world.bounds.is_degenerate() {
            return Err(CliError::usage("config world bounds must have min < max on every axis"));
        }
        if !(world.dt > 0.0 && world.dt.is_finite()) {
            return Err(CliError::usage("config world dt must be positive"));
        }
        let backend = flags.backend.or(config.backend);
        let seed = flags.seed.or(config.seed);
        Ok(Self {
            backend: backend.unwrap_or(BackendChoice::Mock),
            backend_explicit: backend.is_some(),
            seed: seed.unwrap_or(0),
            seed_explicit: seed.is_some(),
            registry: flags.registry.or(config.registry).unwrap_or_else(|| DEFAULT_REGISTRY.into()),
            out: flags.out.or(config.out).unwrap_or_else(|| DEFAULT_OUT.into()),
            world,
            gateway: config.gateway,
            templates: config.templates,
            lexicon: config.lexicon,
        })
    }

    /// Builds the chat backend. Live mode needs the API key in the
    /// environment.
    pub fn backend(&self, choice: BackendChoice) -> Result<Box<dyn ChatBackend>, CliError> {
        match choice {
            BackendChoice::Mock => Ok(Box::new(MockBackend::with_dimension(self.gateway.embedding_dimension))),
            BackendChoice::Live => {
                let mut cfg = LiveConfig::from_env().map_err(CliError::domain)?;
                let g = &self.gateway;
                if let Some(url) = &g.base_url {
                    cfg.base_url = url.trim_end_matches('/').to_string();
                }
                if let Some(m) = &g.chat_model {
                    cfg.chat_model = m.clone();
                }
                if let Some(m) = &g.embedding_model {
                    cfg.embedding_model = m.clone();
                }
                if let Some(s) = g.timeout_secs {
                    cfg.timeout = Duration::from_secs(s);
                }
                if let Some(a) = g.attempts {
                    cfg.attempts = a;
                }
                Ok(Box::new(LiveBackend::new(cfg)))
            }
        }
    }
}
