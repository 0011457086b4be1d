//! Server configuration: one TOML file plus `CROWDLABEL_` environment overrides.
//!
//! ```toml
//! [server]
//! bind = "127.0.0.1:8080"
//! data_dir = "data"          # setup.json, opinions.jsonl, manifest.csv, experts.csv, plan.json
//!
//! [policy]                   # defaults for new contests
//! min_eligible_opinions = 7
//! min_agreement = 0.6
//! skill_threshold = 0.8
//! window = 25
//! min_scored = 10
//! one_opinion_per_user = true
//!
//! [scoring]
//! leaderboard_min_scored = 10
//!
//! [prizes]
//! per_user_cap_cents = 2500
//!
//! [seeds]
//! partition = 0              # patient split and clip selection
//! reference = 0              # tie-breaks of the expert reference standard
//! contest = 0                # contest seed when a request gives none
//!
//! [ingest]
//! n_per_set = 200
//! ```
//!
//! An environment variable `CROWDLABEL_<SECTION>__<KEY>` overrides one key,
//! e.g. `CROWDLABEL_POLICY__MIN_AGREEMENT=0.7`. Values are read as TOML
//! scalars and fall back to plain strings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use crowdlabel::consensus::ConsensusPolicy;
use crowdlabel::contest::{PlatformConfig, PrizeConfig};
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "CROWDLABEL_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub data_dir: Option<PathBuf>,
}

impl Default for ServerSection {
    fn default() -> Self {
        ServerSection {
            bind: "127.0.0.1:8080".into(),
            data_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub leaderboard_min_scored: u64,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection {
            leaderboard_min_scored: PlatformConfig::default().leaderboard_min_scored,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub partition: u64,
    pub reference: u64,
    pub contest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub n_per_set: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection { n_per_set: 200 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub server: ServerSection,
    pub policy: ConsensusPolicy,
    pub scoring: ScoringSection,
    pub prizes: PrizeConfig,
    pub seeds: Seeds,
    pub ingest: IngestSection,
}

impl ServerConfig {
    /// Reads `path` (if any), applies overrides from `env`, and validates.
    pub fn load(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> anyhow::Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text.parse::<toml::Table>().with_context(|| format!("parsing {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in env {
            let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
            let Some((section, field)) = rest.split_once("__") else {
                bail!("environment override {key} must look like {ENV_PREFIX}<SECTION>__<KEY>");
            };
            let entry = table
                .entry(section.to_ascii_lowercase())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let Some(section_table) = entry.as_table_mut() else {
                bail!("config key {section} is not a section");
            };
            section_table.insert(field.to_ascii_lowercase(), scalar(&value));
        }
        let config: ServerConfig = table.try_into().context("invalid configuration")?;
        config.policy.validate()?;
        Ok(config)
    }

    /// Reads `path` with overrides from the process environment.
    pub fn from_env(path: Option<&Path>) -> anyhow::Result<Self> {
        Self::load(path, std::env::vars())
    }

    pub fn platform(&self) -> PlatformConfig {
        PlatformConfig {
            leaderboard_min_scored: self.scoring.leaderboard_min_scored,
            prizes: self.prizes,
        }
    }
}

fn scalar(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .filter(|v| !v.is_table() && !v.is_array())
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
