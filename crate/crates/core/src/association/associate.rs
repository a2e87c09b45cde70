//! Frame-to-map data association by 2D mask overlap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instance::InstanceMap;
use super::log::MapEvent;
use crate::detections::DetectionRecord;
use crate::error::{Error, Result};
use crate::geometry::{Frame, Mask, VoxelIndex};
use crate::label_fusion::{CombineMode, LikelihoodMatrix, SemanticBelief};

/// Default IoU threshold for associating a detection with an instance.
pub const DEFAULT_TAU_2D: f64 = 0.3;

/// Default minimum number of observed pixels for an instance to count as visible.
pub const DEFAULT_MIN_VISIBLE_PIXELS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub detection: usize,
    pub instance: u32,
    pub iou: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub matches: Vec<Match>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_instances: Vec<u32>,
}

/// Instances whose occupied voxels are hit by at least `min_pixels` depth
/// pixels of the frame, with the mask of those pixels, in ascending id order.
pub fn visible_instances(map: &InstanceMap, frame: &Frame, min_pixels: usize) -> Vec<(u32, Mask)> {
    if map.is_empty() {
        return Vec::new();
    }
    let k = &frame.intrinsics;
    let l = map.voxel_length();
    let cells: Vec<Option<VoxelIndex>> = (0..k.height)
        .flat_map(|r| (0..k.width).map(move |c| (c, r)))
        .map(|(c, r)| frame.surface_point(c, r).map(|p| VoxelIndex::from_point(&p, l)))
        .collect();
    let instances: Vec<_> = map.iter().collect();
    instances
        .par_iter()
        .filter_map(|inst| {
            let (lo, hi) = inst.grid.bounds()?;
            let inside = |v: &VoxelIndex| {
                (lo.x..=hi.x).contains(&v.x) && (lo.y..=hi.y).contains(&v.y) && (lo.z..=hi.z).contains(&v.z)
            };
            let bits: Vec<bool> = cells
                .iter()
                .map(|c| c.is_some_and(|v| inside(&v) && inst.grid.contains(&v)))
                .collect();
            let mask = Mask::from_bits(k.width, k.height, bits).expect("mask size matches frame");
            (mask.count() >= min_pixels).then_some((inst.id, mask))
        })
        .collect()
}

/// `|a ∧ b| / |a ∨ b|`, zero when both masks are empty.
pub fn mask_iou(a: &Mask, b: &Mask) -> Result<f64> {
    a.check_same_size(b.width(), b.height())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.bits().iter().zip(b.bits()) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Greedy one-to-one matching in descending IoU over pairs with IoU above
/// `tau`. Ties are broken by detection index, then instance id.
pub fn associate(detections: &[DetectionRecord], visible: &[(u32, Mask)], tau: f64) -> Result<AssociationResult> {
    let mut pairs = Vec::new();
    for (k, det) in detections.iter().enumerate() {
        let Some(dbox) = det.mask.bbox() else { continue };
        for (id, mask) in visible {
            match mask.bbox() {
                Some(ibox) if boxes_overlap(&dbox, &ibox) => {}
                _ => {
                    det.mask.check_same_size(mask.width(), mask.height())?;
                    continue;
                }
            }
            let iou = mask_iou(&det.mask, mask)?;
            if iou > tau {
                pairs.push(Match {
                    detection: k,
                    instance: *id,
                    iou,
                });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.detection.cmp(&b.detection))
            .then(a.instance.cmp(&b.instance))
    });

    let mut det_used = vec![false; detections.len()];
    let mut inst_used = std::collections::BTreeSet::new();
    let mut matches = Vec::new();
    for p in pairs {
        if det_used[p.detection] || inst_used.contains(&p.instance) {
            continue;
        }
        det_used[p.detection] = true;
        inst_used.insert(p.instance);
        matches.push(p);
    }
    matches.sort_by_key(|m| m.detection);
    Ok(AssociationResult {
        matches,
        unmatched_detections: (0..detections.len()).filter(|k| !det_used[*k]).collect(),
        unmatched_instances: visible
            .iter()
            .map(|(id, _)| *id)
            .filter(|id| !inst_used.contains(id))
            .collect(),
    })
}

fn boxes_overlap(a: &[usize; 4], b: &[usize; 4]) -> bool {
    a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
}

/// Outcome of [`apply_frame`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameUpdate {
    pub updated: Vec<u32>,
    pub created: Vec<u32>,
    /// Detections dropped because their mask covered no valid depth.
    pub ignored: usize,
    pub events: Vec<MapEvent>,
}

/// Integrates matched detections into their instances and updates their
/// beliefs; every unmatched detection with usable depth starts a new instance.
pub fn apply_frame(
    map: &mut InstanceMap,
    frame: &Frame,
    detections: &[DetectionRecord],
    result: &AssociationResult,
    matrix: &LikelihoodMatrix,
    mode: CombineMode,
) -> Result<FrameUpdate> {
    if matrix.n_closed() != map.n_classes() {
        return Err(Error::InvalidParameter(format!(
            "likelihood matrix has {} classes, map has {}",
            matrix.n_closed(),
            map.n_classes()
        )));
    }
    let mut out = FrameUpdate::default();
    for m in &result.matches {
        let det = detections
            .get(m.detection)
            .ok_or_else(|| Error::InvalidParameter(format!("detection {} out of range", m.detection)))?;
        let inst = map
            .get_mut(m.instance)
            .ok_or_else(|| Error::InvalidParameter(format!("instance {} not in map", m.instance)))?;
        inst.grid.integrate(frame, &det.mask)?;
        inst.belief.update(&matrix.measurement_likelihood(det, mode));
        inst.last_seen = frame.index;
        out.updated.push(m.instance);
    }
    for &k in &result.unmatched_detections {
        let det = detections
            .get(k)
            .ok_or_else(|| Error::InvalidParameter(format!("detection {k} out of range")))?;
        if det.mask.is_empty() {
            out.ignored += 1;
            continue;
        }
        let mut grid = map.empty_grid();
        if grid.integrate(frame, &det.mask)? == 0 {
            out.ignored += 1;
            continue;
        }
        let mut belief = SemanticBelief::uniform(map.n_classes());
        belief.update(&matrix.measurement_likelihood(det, mode));
        let id = map.insert(belief, grid, frame.index);
        out.events.push(MapEvent::create(frame.index, id));
        out.created.push(id);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use nalgebra::Point3;

    use super::*;
    use crate::detections::LabelMeasurement;
    use crate::geometry::{CameraIntrinsics, DepthImage, Pose};
    use crate::label_fusion::{HardAssociation, Provenance};

    fn mask(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> Mask {
        Mask::from_fn(w, h, |c, r| f(c, r))
    }

    fn det(m: Mask, label: usize) -> DetectionRecord {
        DetectionRecord {
            measurements: vec![LabelMeasurement { label, score: 1.0 }],
            mask: m,
            bbox: [0.0; 4],
            prompt: BTreeSet::from([label]),
        }
    }

    /// Camera at the origin looking down +z at a wall 1 m away.
    fn wall_frame(index: u64) -> Frame {
        let k = CameraIntrinsics::new(40.0, 40.0, 20.0, 15.0, 40, 30).unwrap();
        let depth = DepthImage::new(40, 30, vec![1.0; 1200]).unwrap();
        Frame::new(index, depth, None, Pose::identity(), k).unwrap()
    }

    fn identity_matrix(n: usize) -> LikelihoodMatrix {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        LikelihoodMatrix::new(n, n, data, Provenance::Manual).unwrap()
    }

    #[test]
    fn iou_counts() {
        let a = mask(20, 10, |c, _| c < 10);
        let half = mask(20, 10, |c, _| c < 5);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &half).unwrap(), 0.5);
        let disjoint = mask(20, 10, |c, _| c >= 10);
        assert_eq!(mask_iou(&a, &disjoint).unwrap(), 0.0);
        assert_eq!(mask_iou(&Mask::new(20, 10), &Mask::new(20, 10)).unwrap(), 0.0);
        assert!(mask_iou(&a, &Mask::new(5, 5)).is_err());
    }

    #[test]
    fn greedy_prefers_higher_iou() {
        let d = mask(10, 10, |c, _| c < 5);
        let i1 = mask(10, 10, |c, r| c < 5 && r < 8); // IoU 0.8
        let i2 = mask(10, 10, |c, r| c < 5 && r < 6); // IoU 0.6
        let res = associate(&[det(d, 0)], &[(1, i2.clone()), (2, i1.clone())], 0.3).unwrap();
        assert_eq!(res.matches.len(), 1);
        assert_eq!(res.matches[0].instance, 2);
        assert!((res.matches[0].iou - 0.8).abs() < 1e-12);
        assert_eq!(res.unmatched_instances, vec![1]);
    }

    #[test]
    fn below_threshold_is_unmatched() {
        let d = mask(10, 10, |c, _| c < 5);
        let i = mask(10, 10, |c, r| c < 5 && r < 2);
        let res = associate(&[det(d, 0)], &[(1, i)], 0.3).unwrap();
        assert!(res.matches.is_empty());
        assert_eq!(res.unmatched_detections, vec![0]);
    }

    #[test]
    fn exact_match_has_unit_iou() {
        let d = mask(10, 10, |c, r| c > 2 && r > 3);
        let res = associate(&[det(d.clone(), 0)], &[(7, d)], 0.3).unwrap();
        assert_eq!(res.matches, vec![Match { detection: 0, instance: 7, iou: 1.0 }]);
    }

    #[test]
    fn new_instances_and_updates() {
        let frame = wall_frame(0);
        let m = identity_matrix(2);
        let mut map = InstanceMap::new(0.05, 2);
        let dets = vec![
            det(mask(40, 30, |c, _| c < 15), 0),
            det(mask(40, 30, |c, _| c >= 25), 1),
        ];
        let res = associate(&dets, &visible_instances(&map, &frame, 50), 0.3).unwrap();
        let up = apply_frame(&mut map, &frame, &dets, &res, &m, CombineMode::Sum).unwrap();
        assert_eq!(up.created, vec![1, 2]);
        assert!(map.iter().all(|i| i.belief.frame_count() == 1 && !i.grid.is_empty()));

        let frame = wall_frame(1);
        let vis = visible_instances(&map, &frame, 50);
        assert_eq!(vis.len(), 2);
        let res = associate(&dets, &vis, 0.3).unwrap();
        assert_eq!(res.matches.len(), 2);
        let up = apply_frame(&mut map, &frame, &dets, &res, &m, CombineMode::Sum).unwrap();
        assert_eq!(up.updated, vec![1, 2]);
        assert!(up.created.is_empty());
        assert_eq!(map.get(1).unwrap().belief.frame_count(), 2);
        assert_eq!(map.get(1).unwrap().belief.predict_class().unwrap(), 0);
        assert_eq!(map.get(2).unwrap().belief.predict_class().unwrap(), 1);
    }

    #[test]
    fn empty_mask_is_ignored() {
        let frame = wall_frame(0);
        let mut map = InstanceMap::new(0.05, 2);
        let dets = vec![det(Mask::new(40, 30), 0)];
        let res = associate(&dets, &[], 0.3).unwrap();
        let up = apply_frame(&mut map, &frame, &dets, &res, &identity_matrix(2), CombineMode::Sum).unwrap();
        assert_eq!(up.ignored, 1);
        assert!(map.is_empty());
    }

    #[test]
    fn visibility_oracles() {
        let frame = wall_frame(0);
        assert!(visible_instances(&InstanceMap::new(0.05, 1), &frame, 50).is_empty());

        // Behind the camera: never hit by back-projected depth.
        let mut map = InstanceMap::new(0.05, 1);
        let mut behind = map.empty_grid();
        for x in -5..5 {
            for y in -5..5 {
                behind.add(VoxelIndex::from_point(&Point3::new(x as f64 * 0.05, y as f64 * 0.05, -1.0), 0.05), 1.0);
            }
        }
        map.insert(SemanticBelief::uniform(1), behind, 0);
        assert!(visible_instances(&map, &frame, 50).is_empty());

        // Covering the wall: full mask, equal to the center-projection oracle
        // wherever the projected voxel lies on the wall.
        let mut wall = map.empty_grid();
        wall.integrate(&frame, &Mask::from_fn(40, 30, |_, _| true)).unwrap();
        let id = map.insert(SemanticBelief::uniform(1), wall.clone(), 0);
        let vis = visible_instances(&map, &frame, 50);
        assert_eq!(vis.len(), 1);
        assert_eq!(vis[0].0, id);
        assert_eq!(vis[0].1.count(), 1200);
        let projected = wall.project_mask(&frame);
        assert!(projected.iter_set().all(|(c, r)| vis[0].1.get(c, r)));
    }

    #[test]
    fn hard_association_fusion_predicts_target() {
        let space = crate::detections::LabelSpace::new(
            crate::detections::LabelList::new(["couch", "sofa", "table"]).unwrap(),
            crate::detections::LabelList::new(["sofa", "table"]).unwrap(),
        );
        let assoc = HardAssociation::new(vec![0, 0, 1], 2).unwrap();
        let _ = space;
        let m = LikelihoodMatrix::manual(&assoc, 0.9).unwrap();
        for o in 0..3 {
            let mut b = SemanticBelief::uniform(2);
            b.update(&m.measurement_likelihood(&det(Mask::new(1, 1), o), CombineMode::Sum));
            assert_eq!(b.predict_class().unwrap(), assoc.target(o));
        }
    }
}
