use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use super::scene::GroundTruthScene;
use crate::error::Result;
use crate::geometry::{CameraIntrinsics, DepthImage, Frame, Mask, Pose};

/// 320x240 pinhole camera with a 60 degree horizontal field of view.
pub fn synthetic_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(277.0, 277.0, 159.5, 119.5, 320, 240).expect("valid intrinsics")
}

/// `n` poses on a circle of `radius` at `height`, all looking at `target`.
pub fn orbit_trajectory(n: usize, radius: f64, height: f64, target: Point3<f64>) -> Result<Vec<Pose>> {
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let eye = Point3::new(target.x + radius * a.cos(), target.y + radius * a.sin(), height);
            Pose::look_at(eye, target, Vector3::z())
        })
        .collect()
}

/// The default camera path: one loop around the room center.
pub fn default_trajectory(n: usize) -> Vec<Pose> {
    orbit_trajectory(n, 2.4, 1.5, Point3::new(0.0, 0.0, 0.4)).expect("orbit poses are well defined")
}

/// Depth and per-pixel object id (0 for walls and floor) seen from `pose`.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedView {
    pub depth: DepthImage,
    pub object_ids: Vec<u32>,
}

impl RenderedView {
    /// Pixels showing object `id`.
    pub fn object_mask(&self, id: u32, width: usize, height: usize) -> Mask {
        Mask::from_fn(width, height, |c, r| self.object_ids[r * width + c] == id)
    }

    /// Masks of all objects with at least `min_pixels` visible pixels, by id.
    pub fn object_masks(&self, width: usize, height: usize, min_pixels: usize) -> BTreeMap<u32, Mask> {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &id in self.object_ids.iter().filter(|id| **id != 0) {
            *counts.entry(id).or_default() += 1;
        }
        counts
            .into_iter()
            .filter(|(_, n)| *n >= min_pixels.max(1))
            .map(|(id, _)| (id, self.object_mask(id, width, height)))
            .collect()
    }
}

/// Ray casts the scene. The camera must be inside the room.
pub fn render_view(scene: &GroundTruthScene, pose: &Pose, k: &CameraIntrinsics) -> RenderedView {
    let origin = pose.center();
    let rows: Vec<(Vec<f32>, Vec<u32>)> = (0..k.height)
        .into_par_iter()
        .map(|r| {
            let mut depth = Vec::with_capacity(k.width);
            let mut ids = Vec::with_capacity(k.width);
            for c in 0..k.width {
                // Camera-frame direction with unit z, so the ray parameter is depth.
                let d_cam = Vector3::new((c as f64 - k.cx) / k.fx, (r as f64 - k.cy) / k.fy, 1.0);
                let d = pose.transform_vector(&d_cam);
                let mut best = (f64::INFINITY, 0u32);
                for o in &scene.objects {
                    if let Some((t0, _)) = o.bounds.ray_interval(&origin, &d) {
                        if t0 > 0.0 && t0 < best.0 {
                            best = (t0, o.id);
                        }
                    }
                }
                if best.1 == 0 {
                    best.0 = scene.room.ray_interval(&origin, &d).map_or(0.0, |(_, t1)| t1.max(0.0));
                }
                depth.push(best.0 as f32);
                ids.push(best.1);
            }
            (depth, ids)
        })
        .collect();
    let (depth, object_ids): (Vec<Vec<f32>>, Vec<Vec<u32>>) = rows.into_iter().unzip();
    RenderedView {
        depth: DepthImage::new(k.width, k.height, depth.concat()).expect("ray depths are finite"),
        object_ids: object_ids.concat(),
    }
}

/// Depth image from an analytic surface. `hit` returns the ray parameter of
/// the first intersection along a world ray whose direction has unit camera z,
/// which is the pixel depth; misses and non-positive hits give invalid depth.
pub fn render_analytic<F>(pose: &Pose, k: &CameraIntrinsics, hit: F) -> DepthImage
where
    F: Fn(&Point3<f64>, &Vector3<f64>) -> Option<f64> + Sync,
{
    let origin = pose.center();
    let data: Vec<f32> = (0..k.height)
        .into_par_iter()
        .flat_map_iter(|r| {
            let hit = &hit;
            (0..k.width).map(move |c| {
                let d_cam = Vector3::new((c as f64 - k.cx) / k.fx, (r as f64 - k.cy) / k.fy, 1.0);
                let d = pose.transform_vector(&d_cam);
                hit(&origin, &d).filter(|t| *t > 0.0 && t.is_finite()).map_or(0.0, |t| t as f32)
            })
        })
        .collect();
    DepthImage::new(k.width, k.height, data).expect("analytic depths are finite")
}

/// Renders one frame per pose, indexed from 0.
pub fn render_frames(scene: &GroundTruthScene, poses: &[Pose], k: &CameraIntrinsics) -> Result<Vec<Frame>> {
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| Frame::new(i as u64, render_view(scene, p, k).depth, None, p.clone(), k.clone()))
        .collect()
}
