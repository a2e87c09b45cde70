use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapEventKind {
    Create,
    Merge,
    Prune,
    Delete,
}

/// One line of the map event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEvent {
    pub event: MapEventKind,
    /// For merges: `[kept, absorbed]`.
    pub ids: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removed_voxels: Option<usize>,
}

impl MapEvent {
    pub fn create(frame: u64, id: u32) -> Self {
        Self {
            event: MapEventKind::Create,
            ids: vec![id],
            frame: Some(frame),
            sigma: None,
            omega: None,
            removed_voxels: None,
        }
    }

    pub fn merge(frame: Option<u64>, kept: u32, absorbed: u32, sigma: f64, omega: f64) -> Self {
        Self {
            event: MapEventKind::Merge,
            ids: vec![kept, absorbed],
            frame,
            sigma: Some(sigma),
            omega: Some(omega),
            removed_voxels: None,
        }
    }

    pub fn prune(id: u32, removed: usize, deleted: bool) -> Self {
        Self {
            event: if deleted { MapEventKind::Delete } else { MapEventKind::Prune },
            ids: vec![id],
            frame: None,
            sigma: None,
            omega: None,
            removed_voxels: Some(removed),
        }
    }
}

/// Appends events as JSON lines.
pub fn append_event_log(path: &Path, events: &[MapEvent]) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    for e in events {
        let line = serde_json::to_string(e).expect("event serializes");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
