use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_log, replay, EventRecord, StoreError};
use crate::config::GroupConfig;
use crate::model::GroupId;
use crate::state::GroupState;

pub const LOG_SUFFIX: &str = ".events.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Group configs for a log directory, stored as one JSON document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub groups: Vec<GroupConfig>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, StoreError> {
        let text = fs::read_to_string(path)?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        let mut seen = std::collections::HashSet::new();
        for g in &self.groups {
            g.validate()?;
            if !seen.insert(&g.group_id) {
                return Err(StoreError::Corrupt {
                    line: 0,
                    reason: format!("duplicate group id {}", g.group_id),
                });
            }
        }
        Ok(())
    }

    pub fn group(&self, id: &GroupId) -> Option<&GroupConfig> {
        self.groups.iter().find(|g| &g.group_id == id)
    }
}

pub fn log_path(dir: &Path, group: &GroupId) -> PathBuf {
    dir.join(format!("{}{}", group.as_str(), LOG_SUFFIX))
}

/// A log read back from disk together with the state it replays to.
#[derive(Debug, Clone)]
pub struct LoadedGroup {
    pub records: Vec<EventRecord>,
    pub state: GroupState,
}

/// Replays, read-only, every group of `manifest` from its log in `dir`.
pub fn read_groups(dir: &Path, manifest: &Manifest) -> Result<Vec<LoadedGroup>, StoreError> {
    manifest
        .groups
        .iter()
        .map(|cfg| {
            let path = log_path(dir, &cfg.group_id);
            let text = fs::read_to_string(&path).map_err(|e| {
                std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
            })?;
            let records = parse_log(&text)?;
            let state = replay(cfg, &records, None)?;
            Ok(LoadedGroup { records, state })
        })
        .collect()
}
