//! Per-instance sparse occupancy grids.

use std::collections::{HashMap, HashSet};

use nalgebra::{Point3, Vector3};

use super::frame::Frame;
use super::image::Mask;
use super::voxel::{traverse_segment, VoxelIndex};
use crate::error::{Error, Result};

pub type VoxelSet = HashSet<VoxelIndex>;

/// Occupied voxels of one object, each with an observation-count weight.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceVoxelGrid {
    voxel_length: f64,
    /// Half-width of the band along each masked ray, in meters.
    band: f64,
    voxels: HashMap<VoxelIndex, f32>,
}

impl InstanceVoxelGrid {
    /// Empty grid whose surface band spans one voxel length on each side.
    pub fn new(voxel_length: f64) -> Self {
        Self::with_band(voxel_length, voxel_length)
    }

    pub fn with_band(voxel_length: f64, band: f64) -> Self {
        assert!(voxel_length > 0.0, "voxel_length must be positive");
        Self {
            voxel_length,
            band,
            voxels: HashMap::new(),
        }
    }

    pub fn voxel_length(&self) -> f64 {
        self.voxel_length
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, v: &VoxelIndex) -> bool {
        self.voxels.contains_key(v)
    }

    pub fn weight(&self, v: &VoxelIndex) -> Option<f32> {
        self.voxels.get(v).copied()
    }

    pub fn total_weight(&self) -> f64 {
        self.sorted().iter().map(|(_, w)| *w as f64).sum()
    }

    /// Adds `weight` to a voxel, inserting it if absent.
    pub fn add(&mut self, v: VoxelIndex, weight: f32) {
        *self.voxels.entry(v).or_insert(0.0) += weight;
    }

    pub fn keys(&self) -> impl Iterator<Item = &VoxelIndex> {
        self.voxels.keys()
    }

    /// Voxels and weights in ascending index order.
    pub fn sorted(&self) -> Vec<(VoxelIndex, f32)> {
        let mut v: Vec<(VoxelIndex, f32)> = self.voxels.iter().map(|(k, w)| (*k, *w)).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }

    pub fn key_set(&self) -> VoxelSet {
        self.voxels.keys().copied().collect()
    }

    /// Mean of voxel centers, summed in index order.
    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.voxels.is_empty() {
            return None;
        }
        let mut acc = Vector3::zeros();
        for (v, _) in self.sorted() {
            acc += v.center(self.voxel_length).coords;
        }
        Some(Point3::from(acc / self.voxels.len() as f64))
    }

    /// Inclusive voxel-index bounds.
    pub fn bounds(&self) -> Option<(VoxelIndex, VoxelIndex)> {
        let mut it = self.voxels.keys();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| {
            (
                VoxelIndex::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z)),
                VoxelIndex::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z)),
            )
        }))
    }

    /// Raycasts the masked depth and adds one unit of weight to every voxel
    /// within `band` of the observed surface along each masked ray. A voxel
    /// gains at most one unit per call. Returns the number of voxels touched.
    pub fn integrate(&mut self, frame: &Frame, mask: &Mask) -> Result<usize> {
        frame.validate()?;
        mask.check_same_size(frame.intrinsics.width, frame.intrinsics.height)?;
        let touched = self.observed_band(frame, mask);
        let n = touched.len();
        for v in touched {
            self.add(v, 1.0);
        }
        Ok(n)
    }

    fn observed_band(&self, frame: &Frame, mask: &Mask) -> VoxelSet {
        let mut touched = VoxelSet::new();
        let origin = frame.pose.center();
        for (col, row) in mask.iter_set() {
            let Some(surface) = frame.surface_point(col, row) else {
                continue;
            };
            let dir = (surface - origin).normalize();
            let a = surface - dir * self.band;
            let b = surface + dir * self.band;
            traverse_segment(&a, &b, self.voxel_length, |v| {
                touched.insert(v);
            });
        }
        touched
    }

    /// Pixels hit by at least one occupied voxel center in front of the camera.
    pub fn project_mask(&self, frame: &Frame) -> Mask {
        let k = &frame.intrinsics;
        let mut mask = Mask::new(k.width, k.height);
        for v in self.voxels.keys() {
            let cam = frame.pose.inverse_transform_point(&v.center(self.voxel_length));
            if let Some(px) = k.project(&cam) {
                let (c, r) = px.index();
                mask.set(c, r, true);
            }
        }
        mask
    }

    /// Pixels whose back-projected depth lands in an occupied voxel. Unlike
    /// [`project_mask`](Self::project_mask) this respects occlusion and yields
    /// dense masks when voxels span several pixels.
    pub fn observed_mask(&self, frame: &Frame) -> Mask {
        let k = &frame.intrinsics;
        Mask::from_fn(k.width, k.height, |c, r| {
            frame
                .surface_point(c, r)
                .is_some_and(|p| self.contains(&VoxelIndex::from_point(&p, self.voxel_length)))
        })
    }

    /// Occupancy after replacing each voxel by the block of voxels whose
    /// centers fall inside a cube of side `scale * voxel_length` centered on it.
    pub fn inflate(&self, scale: f64) -> Result<VoxelSet> {
        let r = inflation_radius(scale)?;
        let mut out = VoxelSet::with_capacity(self.voxels.len() * 4);
        for v in self.voxels.keys() {
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        out.insert(v.offset(dx, dy, dz));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Absorbs another grid, summing weights on shared voxels.
    pub fn merge_from(&mut self, other: &InstanceVoxelGrid) {
        for (v, w) in other.voxels.iter() {
            self.add(*v, *w);
        }
    }

    /// Keeps only voxels for which `keep` returns true. Returns the number removed.
    pub fn retain(&mut self, mut keep: impl FnMut(&VoxelIndex) -> bool) -> usize {
        let before = self.voxels.len();
        self.voxels.retain(|v, _| keep(v));
        before - self.voxels.len()
    }
}

/// Integer neighborhood radius for a given inflation scale.
pub fn inflation_radius(scale: f64) -> Result<i32> {
    if !(scale > 1.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "inflation scale must be > 1, got {scale}"
        )));
    }
    // Offsets k with |k| <= scale / 2 have their centers inside the cube.
    Ok((scale / 2.0 + 1e-9).floor() as i32)
}
