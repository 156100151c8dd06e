//! Identity report CSVs and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use extito_core::harness::CheckpointStats;
use serde::{Deserialize, Serialize};

/// Version 1 of the identity report columns.
pub const REPORT_HEADER: &str = "identity,dt,t_checkpoint,n_paths,mean_residual,se_residual,max_abs_residual,pass";

pub fn report_row(s: &CheckpointStats) -> String {
    format!(
        "{},{},{},{},{:e},{:e},{:e},{}",
        s.identity.name(),
        s.dt,
        s.t,
        s.n_paths,
        s.mean_residual,
        s.se_residual,
        s.max_abs_residual,
        s.pass
    )
}

pub fn render_report(rows: &[CheckpointStats]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", report_row(r));
    }
    out
}

pub fn write_report(path: &Path, rows: &[CheckpointStats]) -> Result<()> {
    std::fs::write(path, render_report(rows)).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the config file text (of the empty string for built-in defaults).
    pub config_hash: String,
    pub seed_base: u64,
    pub versions: BTreeMap<String, String>,
    pub results: BTreeMap<String, bool>,
    /// Trend flags of `table` runs.
    pub trends: BTreeMap<String, bool>,
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, u128>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: &str, seed_base: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("extito".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("extito_core".into(), extito_core::VERSION.into());
        versions.insert("report_schema".into(), "1".into());
        versions.insert("path_store".into(), crate::store::VERSION.to_string());
        RunManifest {
            command: command.into(),
            config_hash: config_hash.into(),
            seed_base,
            versions,
            ..Default::default()
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let p = dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(self)? + "\n").with_context(|| format!("writing {}", p.display()))
    }
}
