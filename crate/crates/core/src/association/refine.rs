//! Over-segmentation merging and instance-geometry fusion.

use std::collections::HashSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::instance::InstanceMap;
use super::log::MapEvent;
use crate::error::{Error, Result};
use crate::geometry::{inflation_radius, InstanceVoxelGrid, PointCloud, VoxelIndex};
use crate::label_fusion::SemanticBelief;

pub const DEFAULT_TAU_SEM: f64 = 0.2;
pub const DEFAULT_TAU_3D: f64 = 0.3;
pub const DEFAULT_INFLATION_SCALE: f64 = 2.0;

/// How the inflated volume of the larger instance is compared against the
/// smaller one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapReading {
    /// `|inflate(a) ∩ b| / |b|`.
    #[default]
    Intersection,
    /// `|inflate(a) ∪ b| / |b|`; always at least 1.
    Union,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeParams {
    pub tau_sem: f64,
    pub tau_3d: f64,
    pub scale: f64,
    pub reading: OverlapReading,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            tau_sem: DEFAULT_TAU_SEM,
            tau_3d: DEFAULT_TAU_3D,
            scale: DEFAULT_INFLATION_SCALE,
            reading: OverlapReading::Intersection,
        }
    }
}

/// Dot product of two class distributions.
pub fn semantic_similarity(a: &SemanticBelief, b: &SemanticBelief) -> Result<f64> {
    if a.frame_count() == 0 || b.frame_count() == 0 {
        return Err(Error::NoEvidence);
    }
    if a.n_classes() != b.n_classes() {
        return Err(Error::InvalidParameter("class count mismatch".into()));
    }
    Ok(a.probs().iter().zip(b.probs()).map(|(x, y)| x * y).sum())
}

/// Overlap of `b` with `a` inflated by `scale`, relative to `|b|`.
pub fn volumetric_overlap(
    a: &InstanceVoxelGrid,
    b: &InstanceVoxelGrid,
    scale: f64,
    reading: OverlapReading,
) -> Result<f64> {
    if b.is_empty() {
        return Err(Error::InvalidParameter("overlap against an empty grid".into()));
    }
    let r = inflation_radius(scale)?;
    let covered = match (a.bounds(), b.bounds()) {
        (Some((alo, ahi)), Some((blo, bhi)))
            if alo.x - r <= bhi.x
                && blo.x <= ahi.x + r
                && alo.y - r <= bhi.y
                && blo.y <= ahi.y + r
                && alo.z - r <= bhi.z
                && blo.z <= ahi.z + r =>
        {
            b.keys().filter(|v| near(a, v, r)).count()
        }
        _ => 0,
    };
    let nb = b.len() as f64;
    Ok(match reading {
        OverlapReading::Intersection => covered as f64 / nb,
        OverlapReading::Union => {
            let inflated = a.inflate(scale)?.len();
            (inflated + b.len() - covered) as f64 / nb
        }
    })
}

/// True when some voxel of `grid` lies within Chebyshev distance `r` of `v`.
fn near(grid: &InstanceVoxelGrid, v: &VoxelIndex, r: i32) -> bool {
    for dx in -r..=r {
        for dy in -r..=r {
            for dz in -r..=r {
                if grid.contains(&v.offset(dx, dy, dz)) {
                    return true;
                }
            }
        }
    }
    false
}

/// Merges semantically similar, volumetrically overlapping instance pairs
/// until none remain. Candidate pairs run larger-first by voxel count, ties by
/// id. The smaller instance is absorbed into the larger one.
pub fn merge_pass(map: &mut InstanceMap, params: &MergeParams, frame: Option<u64>) -> Result<Vec<MapEvent>> {
    inflation_radius(params.scale)?;
    let mut events = Vec::new();
    while let Some((a, b, sigma, omega)) = find_merge(map, params)? {
        let absorbed = map.remove(b).expect("candidate in map");
        let kept = map.get_mut(a).expect("candidate in map");
        kept.grid.merge_from(&absorbed.grid);
        kept.belief = kept.belief.fuse(&absorbed.belief);
        kept.created_at = kept.created_at.min(absorbed.created_at);
        kept.last_seen = kept.last_seen.max(absorbed.last_seen);
        events.push(MapEvent::merge(frame, a, b, sigma, omega));
    }
    Ok(events)
}

fn find_merge(map: &InstanceMap, params: &MergeParams) -> Result<Option<(u32, u32, f64, f64)>> {
    let mut order: Vec<_> = map
        .iter()
        .filter(|i| i.belief.frame_count() > 0 && !i.grid.is_empty())
        .collect();
    order.sort_by(|x, y| y.grid.len().cmp(&x.grid.len()).then(x.id.cmp(&y.id)));
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let sigma = semantic_similarity(&a.belief, &b.belief)?;
            if sigma <= params.tau_sem {
                continue;
            }
            let omega = volumetric_overlap(&a.grid, &b.grid, params.scale, params.reading)?;
            if omega > params.tau_3d {
                return Ok(Some((a.id, b.id, sigma, omega)));
            }
        }
    }
    Ok(None)
}

/// Drops instance voxels whose cell holds no point of `points`; instances
/// left empty are deleted.
pub fn instance_geometry_fusion(map: &mut InstanceMap, points: &PointCloud) -> Vec<MapEvent> {
    let l = map.voxel_length();
    let occupied: HashSet<VoxelIndex> = points.points.iter().map(|p| VoxelIndex::from_point(p, l)).collect();
    let mut events = Vec::new();
    let mut emptied = Vec::new();
    for inst in map.iter_mut() {
        let removed = inst.grid.retain(|v| occupied.contains(v));
        if inst.grid.is_empty() {
            emptied.push(inst.id);
            events.push(MapEvent::prune(inst.id, removed, true));
        } else if removed > 0 {
            events.push(MapEvent::prune(inst.id, removed, false));
        }
    }
    for id in emptied {
        warn!("instance {id} has no support in the surface point cloud; deleted");
        map.remove(id);
    }
    events
}
