//! Run configuration.
//!
//! A config file is merged key by key onto the embedded default
//! (`config/default.toml`), so partial files are fine. Arrays replace the
//! default array wholesale.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::nlu::llm::ExternalConfig;
use crate::nlu::stub::ConfusionModel;
use crate::nlu::{RouteSettings, VerbosityPolicy};
use crate::planner::PlannerConfig;
use crate::speech::{AgeGroup, AgeNoiseConfig, NoiseConfig};
use crate::world::WorldManifest;

pub const DEFAULT_TOML: &str = include_str!("../config/default.toml");
pub const CALIBRATED_TOML: &str = include_str!("../config/calibrated.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Grammar,
    Stub,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NluConfig {
    pub backend: BackendKind,
    /// Copy backend request/reply bodies into the trial log.
    pub log_exchanges: bool,
    pub route: RouteSettings,
    pub stub: ConfusionModel,
    pub external: ExternalConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario1Config {
    pub request: String,
    pub replacement: String,
    /// Inclusive tick window for the replacement line.
    pub replace_at: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario2Config {
    pub request: String,
    pub addition: String,
    pub add_at: [u64; 2],
    pub stop: String,
    pub stop_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Ticks the scripted user waits for a confirming response.
    pub confirm_timeout: u64,
    pub max_attempts: u32,
    pub max_ticks: u64,
    /// Idle ticks after the last line before a trial is closed.
    pub settle_ticks: u64,
    pub true_age: AgeGroup,
    pub scenario1: Scenario1Config,
    pub scenario2: Scenario2Config,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractiveConfig {
    pub ticks_per_line: u64,
    /// Wall-clock tick length when serving the gateway.
    pub tick_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub gateway_port: u16,
    pub world: WorldManifest,
    pub noise: NoiseConfig,
    pub age_noise: AgeNoiseConfig,
    pub verbosity: VerbosityPolicy,
    pub planner: PlannerConfig,
    pub nlu: NluConfig,
    pub trials: TrialConfig,
    pub interactive: InteractiveConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml("").expect("embedded default config is valid")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Parses `text` as overrides on top of the default config and validates.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut base: toml::Table = toml::from_str(DEFAULT_TOML)?;
        let over: toml::Table = toml::from_str(text)?;
        merge(&mut base, over);
        let cfg: RunConfig = toml::Value::Table(base).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    /// The noisy setup used for the calibrated trial runs.
    pub fn calibrated() -> Self {
        Self::from_toml(CALIBRATED_TOML).expect("embedded calibrated config is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise.validate()?;
        self.age_noise.validate()?;
        self.planner.validate().map_err(ConfigError::Invalid)?;
        self.nlu.stub.validate().map_err(ConfigError::Invalid)?;
        let world = self.world.build();
        world.check_invariants().map_err(|e| ConfigError::Invalid(format!("world: {e}")))?;
        if !self.world.robot_start.is_placement() && !self.world.robot_start.is_storage() {
            return Err(ConfigError::Invalid("world.robot_start is not a location".into()));
        }
        let t = &self.trials;
        if t.max_attempts == 0 {
            return Err(ConfigError::Invalid("trials.max_attempts must be at least 1".into()));
        }
        if t.confirm_timeout == 0 {
            return Err(ConfigError::Invalid("trials.confirm_timeout must be at least 1".into()));
        }
        for (name, [lo, hi]) in [("scenario1.replace_at", t.scenario1.replace_at), ("scenario2.add_at", t.scenario2.add_at)] {
            if lo > hi {
                return Err(ConfigError::Invalid(format!("trials.{name} is empty")));
            }
            if hi >= t.max_ticks {
                return Err(ConfigError::Invalid(format!("trials.{name} ends after max_ticks")));
            }
        }
        if t.scenario2.stop_at >= t.max_ticks {
            return Err(ConfigError::Invalid("trials.scenario2.stop_at is after max_ticks".into()));
        }
        if self.interactive.tick_ms == 0 || self.interactive.ticks_per_line == 0 {
            return Err(ConfigError::Invalid("interactive timings must be positive".into()));
        }
        Ok(())
    }
}
