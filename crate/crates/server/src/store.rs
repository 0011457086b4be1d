//! Files of a data directory.
//!
//! - `setup.json`: clips and contest definitions ([`PlatformSetup`]).
//! - `opinions.jsonl`: the append-only opinion log.
//! - `manifest.csv`, `plan.json`, `experts.csv`: the last ingested inputs.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use crowdlabel::consensus::ExpertPanel;
use crowdlabel::contest::{JsonLinesLog, LogSink, NullLog, Platform, PlatformConfig, PlatformSetup};
use crowdlabel::ingest::{load_expert_opinions, load_manifest, write_expert_opinions, ClipManifest, PartitionPlan};

pub const SETUP_FILE: &str = "setup.json";
pub const LOG_FILE: &str = "opinions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const PLAN_FILE: &str = "plan.json";
pub const EXPERTS_FILE: &str = "experts.csv";

#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DataDir { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn read_setup(&self) -> anyhow::Result<Option<PlatformSetup>> {
        let path = self.path(SETUP_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Some(serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?))
    }

    /// Writes via a temporary file and rename so readers never see a partial document.
    pub fn write_setup(&self, setup: &PlatformSetup) -> anyhow::Result<()> {
        self.write_atomic(SETUP_FILE, &serde_json::to_vec_pretty(setup)?)
    }

    pub fn write_atomic(&self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.root)?;
        let tmp = self.path(&format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, self.path(name))?;
        Ok(())
    }

    /// Opens the log for appending.
    pub fn log_sink(&self) -> anyhow::Result<Box<dyn LogSink>> {
        std::fs::create_dir_all(&self.root)?;
        let file = OpenOptions::new().create(true).append(true).open(self.path(LOG_FILE))?;
        Ok(Box::new(JsonLinesLog::new(BufWriter::new(file))))
    }

    /// Rebuilds the platform from the setup document and log. New opinions go
    /// to `sink`.
    pub fn restore(&self, config: PlatformConfig, sink: Box<dyn LogSink>) -> anyhow::Result<Platform> {
        let setup = self.read_setup()?.unwrap_or_default();
        let log = self.path(LOG_FILE);
        let platform = if log.exists() {
            Platform::replay(&setup, config, BufReader::new(File::open(&log)?), sink)
        } else {
            Platform::replay_entries(&setup, config, &[], sink)
        };
        platform.with_context(|| format!("replaying {}", self.root.display()))
    }

    /// Read-only restore for offline commands.
    pub fn restore_offline(&self, config: PlatformConfig) -> anyhow::Result<Platform> {
        self.restore(config, Box::new(NullLog))
    }

    pub fn write_ingest(&self, manifest: &ClipManifest, plan: &PartitionPlan) -> anyhow::Result<()> {
        let mut csv = Vec::new();
        manifest.write_csv(&mut csv)?;
        self.write_atomic(MANIFEST_FILE, &csv)?;
        self.write_atomic(PLAN_FILE, plan.to_json().as_bytes())
    }

    pub fn write_experts(&self, panel: &ExpertPanel) -> anyhow::Result<()> {
        let mut csv = Vec::new();
        write_expert_opinions(panel, &mut csv)?;
        self.write_atomic(EXPERTS_FILE, &csv)
    }

    pub fn read_ingest(&self) -> anyhow::Result<Option<(ClipManifest, PartitionPlan)>> {
        let (m, p) = (self.path(MANIFEST_FILE), self.path(PLAN_FILE));
        if !m.exists() || !p.exists() {
            return Ok(None);
        }
        let manifest = load_manifest(&m)?;
        let plan = serde_json::from_reader(BufReader::new(File::open(&p)?))?;
        Ok(Some((manifest, plan)))
    }

    pub fn read_experts(&self) -> anyhow::Result<Option<ExpertPanel>> {
        let path = self.path(EXPERTS_FILE);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(load_expert_opinions(&path)?))
    }
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<W: Write, T: serde::Serialize>(mut out: W, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
