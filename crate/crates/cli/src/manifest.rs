//! Run manifests: everything needed to reproduce an output file exactly.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{CliError, Format};

/// A fully resolved command. Thread counts are absent on purpose: they
/// never change an output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Simulate {
        config: RunConfig,
        format: Format,
        assert_secure: bool,
        transcript: Option<PathBuf>,
    },
    Verify {
        rounds: u64,
        seed: u64,
        format: Format,
    },
    Thresholds {
        f: Vec<f64>,
    },
    Fig2 {
        f: Vec<f64>,
        points: usize,
    },
    Monogamy {
        grid_step_deg: f64,
        samples: usize,
        seed: u64,
        format: Format,
    },
}

impl Invocation {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Invocation::Simulate { config, .. } => Some(config.seed),
            Invocation::Verify { seed, .. } | Invocation::Monogamy { seed, .. } => Some(*seed),
            Invocation::Thresholds { .. } | Invocation::Fig2 { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seed: Option<u64>,
    pub invocation: Invocation,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(invocation: Invocation, outputs: Vec<PathBuf>) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            schema_version: crate::SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            seed: invocation.seed(),
            invocation,
            outputs,
        }
    }

    /// `<out>.manifest.json`
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, crate::to_json_bytes(self)?)
            .map_err(|e| CliError::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid manifest {}: {e}", path.display())))
    }
}
