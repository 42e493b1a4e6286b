//! Resumable stream snapshots.
//!
//! A snapshot is written after every completed accumulation point and holds
//! only the low-dimensional engine state plus bookkeeping; resuming replays
//! the not-yet-consumed rows and reproduces the uninterrupted run exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use streamstat_core::diag::DiagnosticReport;
use streamstat_core::ee::{CeeState, CueeState};
use streamstat_core::lm::LmState;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineSnapshot {
    Lm { state: LmState },
    Cee { state: CeeState },
    Cuee { state: CueeState },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamSnapshot {
    pub config_hash: String,
    pub schema_fingerprint: String,
    /// Completed accumulation points (merged chunks count once).
    pub chunks_seen: usize,
    /// Input data rows folded into the state so far.
    pub rows_consumed: u64,
    /// Estimates currently deferred because the cumulative design is singular.
    pub singular: bool,
    /// Number of chunk merges forced by separation so far.
    pub separation_merges: usize,
    /// Separation persisted through end of input; the last fit is best-effort.
    pub unresolved_separation: bool,
    pub engine: EngineSnapshot,
    /// Diagnostics of the most recent chunk, when enabled.
    pub last_diagnostics: Option<DiagnosticReport>,
}

impl StreamSnapshot {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string(self)
            .map_err(|e| CliError::other(format!("cannot serialize snapshot: {e}")))?;
        std::fs::write(path, json)
            .map_err(|e| CliError::other(format!("cannot write snapshot {path:?}: {e}")))
    }

    pub fn load(path: &Path) -> Result<StreamSnapshot, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::other(format!("cannot read snapshot {path:?}: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::other(format!("corrupt snapshot {path:?}: {e}")))
    }

    pub fn lm_state(&self) -> Option<&LmState> {
        match &self.engine {
            EngineSnapshot::Lm { state } => Some(state),
            _ => None,
        }
    }

    pub fn cee_state(&self) -> Option<&CeeState> {
        match &self.engine {
            EngineSnapshot::Cee { state } => Some(state),
            _ => None,
        }
    }

    pub fn cuee_state(&self) -> Option<&CueeState> {
        match &self.engine {
            EngineSnapshot::Cuee { state } => Some(state),
            _ => None,
        }
    }
}
