use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{RunOutput, RunReport};
use crate::association::{InstanceMap, MapEvent};
use crate::detections::LabelSpace;
use crate::error::{Error, Result};
use crate::eval::{predictions_from_cloud, InstancePrediction, NO_CLASS};
use crate::geometry::ply::{read_ply, write_ply};
use crate::geometry::{PointCloud, VoxelIndex};

pub const CLOUD_FILE: &str = "map.ply";
pub const INSTANCES_FILE: &str = "instances.json";
pub const REPORT_FILE: &str = "report.json";
pub const EVENTS_FILE: &str = "events.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u32,
    pub class: Option<usize>,
    pub class_name: Option<String>,
    pub probs: Vec<f64>,
    pub confidence: f64,
    pub voxel_count: usize,
    pub centroid: Option<[f64; 3]>,
    pub frame_count: u32,
    pub created_at: u64,
    pub last_seen: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstancesFile {
    pub classes: Vec<String>,
    pub instances: Vec<InstanceRecord>,
}

pub fn instance_records(map: &InstanceMap, space: &LabelSpace) -> Vec<InstanceRecord> {
    map.iter()
        .map(|inst| {
            let class = inst.belief.predict_class().ok();
            InstanceRecord {
                id: inst.id,
                class,
                class_name: class.map(|c| space.closed_set.name(c).to_string()),
                probs: inst.belief.probs().to_vec(),
                confidence: inst.belief.confidence(),
                voxel_count: inst.grid.len(),
                centroid: inst.grid.centroid().map(|c| [c.x, c.y, c.z]),
                frame_count: inst.belief.frame_count(),
                created_at: inst.created_at,
                last_seen: inst.last_seen,
            }
        })
        .collect()
}

/// Assigns each point the instance holding its voxel. Where instances share a
/// voxel the larger weight wins, ties to the lower id. Unlabeled points get
/// instance 0 and class [`NO_CLASS`].
pub fn label_points(map: &InstanceMap, points: &PointCloud) -> PointCloud {
    let l = map.voxel_length();
    let mut owner: HashMap<VoxelIndex, (u32, f32, u16)> = HashMap::new();
    for inst in map.iter() {
        let class = inst.belief.predict_class().map_or(NO_CLASS, |c| c as u16);
        for (v, w) in inst.grid.sorted() {
            owner
                .entry(v)
                .and_modify(|o| {
                    if w > o.1 {
                        *o = (inst.id, w, class);
                    }
                })
                .or_insert((inst.id, w, class));
        }
    }
    let (ids, classes): (Vec<u32>, Vec<u16>) = points
        .points
        .iter()
        .map(|p| match owner.get(&VoxelIndex::from_point(p, l)) {
            Some(&(id, _, c)) => (id, c),
            None => (0, NO_CLASS),
        })
        .unzip();
    let colors = ids.iter().map(|id| palette(*id)).collect();
    PointCloud {
        points: points.points.clone(),
        colors: Some(colors),
        instance_ids: Some(ids),
        class_ids: Some(classes),
    }
}

fn palette(id: u32) -> [u8; 3] {
    if id == 0 {
        return [128, 128, 128];
    }
    let h = id.wrapping_mul(2_654_435_761);
    [(h >> 24) as u8 | 0x40, (h >> 16) as u8 | 0x40, (h >> 8) as u8 | 0x40]
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the labeled cloud, instance list, run report and event log to `dir`.
pub fn export_map(dir: &Path, output: &RunOutput, space: &LabelSpace) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_ply(&dir.join(CLOUD_FILE), &label_points(&output.map, &output.points))?;
    let instances = InstancesFile {
        classes: space.closed_set.names().to_vec(),
        instances: instance_records(&output.map, space),
    };
    write_json(&dir.join(INSTANCES_FILE), &instances)?;
    write_json(&dir.join(REPORT_FILE), &output.report)?;
    write_events(&dir.join(EVENTS_FILE), &output.events)
}

fn write_events(path: &Path, events: &[MapEvent]) -> Result<()> {
    let mut s = String::new();
    for e in events {
        s.push_str(&serde_json::to_string(e).expect("event serializes"));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path) -> Result<InstancesFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::parse(format!("{}: {}", path.display(), e.path()), e.into_inner()))
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Predictions from an export directory, with confidences from the instance list.
pub fn load_predictions(dir: &Path) -> Result<Vec<InstancePrediction>> {
    let cloud = read_ply(&dir.join(CLOUD_FILE))?;
    let instances = read_instances(&dir.join(INSTANCES_FILE))?;
    let conf: BTreeMap<u32, f64> = instances.instances.iter().map(|i| (i.id, i.confidence)).collect();
    predictions_from_cloud(&cloud, &conf)
}
