//! Global truncated signed distance volume on a sparse block hash.
//!
//! Voxels are grouped into `BLOCK_SIDE`^3 blocks that are allocated on first
//! observation. Each frame updates every voxel of the touched blocks whose
//! projective signed distance lies within the truncation band, using a
//! weighted running average with unit observation weight.

use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;

use super::frame::Frame;
use super::pointcloud::PointCloud;
use super::voxel::{traverse_segment, VoxelIndex};
use crate::error::{Error, Result};

pub const BLOCK_SIDE: i32 = 8;
const BLOCK_VOXELS: usize = (BLOCK_SIDE * BLOCK_SIDE * BLOCK_SIDE) as usize;

/// Default truncation expressed in voxel lengths.
pub const DEFAULT_TRUNCATION_VOXELS: f64 = 4.0;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TsdfVoxel {
    /// Signed distance in meters, positive in front of the surface.
    pub sdf: f64,
    pub weight: f64,
}

type Block = Box<[TsdfVoxel; BLOCK_VOXELS]>;

fn empty_block() -> Block {
    Box::new([TsdfVoxel::default(); BLOCK_VOXELS])
}

#[inline]
fn split_index(v: VoxelIndex) -> (VoxelIndex, usize) {
    let b = VoxelIndex::new(
        v.x.div_euclid(BLOCK_SIDE),
        v.y.div_euclid(BLOCK_SIDE),
        v.z.div_euclid(BLOCK_SIDE),
    );
    let (lx, ly, lz) = (
        v.x.rem_euclid(BLOCK_SIDE),
        v.y.rem_euclid(BLOCK_SIDE),
        v.z.rem_euclid(BLOCK_SIDE),
    );
    (b, ((lz * BLOCK_SIDE + ly) * BLOCK_SIDE + lx) as usize)
}

#[inline]
fn join_index(block: VoxelIndex, local: usize) -> VoxelIndex {
    let l = local as i32;
    VoxelIndex::new(
        block.x * BLOCK_SIDE + l % BLOCK_SIDE,
        block.y * BLOCK_SIDE + (l / BLOCK_SIDE) % BLOCK_SIDE,
        block.z * BLOCK_SIDE + l / (BLOCK_SIDE * BLOCK_SIDE),
    )
}

/// Counters from one integration call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub valid_pixels: usize,
    pub touched_blocks: usize,
    pub updated_voxels: usize,
}

#[derive(Clone, Debug)]
pub struct GlobalTsdf {
    voxel_length: f64,
    truncation: f64,
    blocks: HashMap<VoxelIndex, Block>,
}

impl GlobalTsdf {
    pub fn new(voxel_length: f64, truncation: f64) -> Result<Self> {
        if !(voxel_length > 0.0 && voxel_length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "voxel_length must be positive, got {voxel_length}"
            )));
        }
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "truncation must be positive, got {truncation}"
            )));
        }
        Ok(Self {
            voxel_length,
            truncation,
            blocks: HashMap::new(),
        })
    }

    /// Volume with truncation set to four voxel lengths.
    pub fn with_voxel_length(voxel_length: f64) -> Result<Self> {
        Self::new(voxel_length, DEFAULT_TRUNCATION_VOXELS * voxel_length)
    }

    pub fn voxel_length(&self) -> f64 {
        self.voxel_length
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn get(&self, v: VoxelIndex) -> Option<TsdfVoxel> {
        let (b, l) = split_index(v);
        self.blocks
            .get(&b)
            .map(|blk| blk[l])
            .filter(|vx| vx.weight > 0.0)
    }

    /// Writes a voxel directly; `sdf` is clamped to the truncation band.
    pub fn set(&mut self, v: VoxelIndex, sdf: f64, weight: f64) {
        let (b, l) = split_index(v);
        let t = self.truncation;
        let blk = self.blocks.entry(b).or_insert_with(empty_block);
        blk[l] = TsdfVoxel {
            sdf: sdf.clamp(-t, t),
            weight: weight.max(0.0),
        };
    }

    /// Observed voxels (weight > 0) in ascending index order.
    pub fn voxels(&self) -> Vec<(VoxelIndex, TsdfVoxel)> {
        let mut keys: Vec<&VoxelIndex> = self.blocks.keys().collect();
        keys.sort_unstable();
        let mut out = Vec::new();
        for b in keys {
            let blk = &self.blocks[b];
            for (l, vx) in blk.iter().enumerate() {
                if vx.weight > 0.0 {
                    out.push((join_index(*b, l), *vx));
                }
            }
        }
        out.sort_unstable_by_key(|(v, _)| *v);
        out
    }

    /// Fuses one depth frame.
    pub fn integrate(&mut self, frame: &Frame) -> Result<IntegrationStats> {
        frame.validate()?;
        let k = frame.intrinsics;
        let block_len = self.voxel_length * BLOCK_SIDE as f64;
        let trunc = self.truncation;

        // Blocks pierced by the truncation band of every valid ray.
        let per_row: Vec<(usize, Vec<VoxelIndex>)> = (0..k.height)
            .into_par_iter()
            .map(|row| {
                let mut hit = Vec::new();
                let mut valid = 0usize;
                for col in 0..k.width {
                    let d = frame.depth.get(col, row) as f64;
                    if d <= 0.0 {
                        continue;
                    }
                    valid += 1;
                    let p = k.back_project(col, row, d);
                    let near_z = (d - trunc).max(1e-3);
                    let near = frame.pose.transform_point(&Point3::from(p.coords * (near_z / d)));
                    let far = frame.pose.transform_point(&Point3::from(p.coords * ((d + trunc) / d)));
                    traverse_segment(&near, &far, block_len, |b| hit.push(b));
                }
                hit.sort_unstable();
                hit.dedup();
                (valid, hit)
            })
            .collect();

        let mut stats = IntegrationStats::default();
        let mut touched: Vec<VoxelIndex> = Vec::new();
        for (valid, hits) in per_row {
            stats.valid_pixels += valid;
            touched.extend(hits);
        }
        touched.sort_unstable();
        touched.dedup();
        stats.touched_blocks = touched.len();

        let mut work: Vec<(VoxelIndex, Block, bool)> = touched
            .into_iter()
            .map(|b| match self.blocks.remove(&b) {
                Some(blk) => (b, blk, true),
                None => (b, empty_block(), false),
            })
            .collect();

        let voxel_length = self.voxel_length;
        let updated: usize = work
            .par_iter_mut()
            .map(|(b, blk, _)| {
                let mut n = 0;
                for (l, vx) in blk.iter_mut().enumerate() {
                    let world = join_index(*b, l).center(voxel_length);
                    let cam = frame.pose.inverse_transform_point(&world);
                    let Some(px) = k.project(&cam) else { continue };
                    let (col, row) = px.index();
                    let d = frame.depth.get(col, row) as f64;
                    if d <= 0.0 {
                        continue;
                    }
                    let sdf = d - cam.z;
                    if sdf.abs() > trunc {
                        continue;
                    }
                    let w = vx.weight;
                    vx.sdf = ((w * vx.sdf + sdf) / (w + 1.0)).clamp(-trunc, trunc);
                    vx.weight = w + 1.0;
                    n += 1;
                }
                n
            })
            .sum();
        stats.updated_voxels = updated;

        for (b, blk, existed) in work {
            if existed || blk.iter().any(|v| v.weight > 0.0) {
                self.blocks.insert(b, blk);
            }
        }
        Ok(stats)
    }

    /// Zero-crossing voxels: observed voxels whose signed distance changes sign
    /// against an observed face neighbor and is no larger in magnitude than the
    /// neighbor's, so each crossing contributes the voxel nearer the surface
    /// (both on a tie). One point per voxel at its center, in ascending index
    /// order.
    ///
    /// Pairs whose distance jump exceeds `2 * voxel_length` are ignored; such
    /// jumps only occur across depth discontinuities, not real surfaces.
    pub fn extract_points(&self) -> PointCloud {
        let max_jump = 2.0 * self.voxel_length;
        let mut points: Vec<VoxelIndex> = self
            .voxels()
            .into_par_iter()
            .filter(|(v, vx)| {
                let a = vx.sdf;
                VoxelIndex::FACE_NEIGHBORS.iter().any(|(dx, dy, dz)| {
                    self.get(v.offset(*dx, *dy, *dz)).is_some_and(|n| {
                        let b = n.sdf;
                        (a < 0.0) != (b < 0.0) && (a - b).abs() <= max_jump && a.abs() <= b.abs()
                    })
                })
            })
            .map(|(v, _)| v)
            .collect();
        points.sort_unstable();
        PointCloud::from_points(points.iter().map(|v| v.center(self.voxel_length)).collect())
    }
}
