//! Point-set IoU and per-class average precision.

use std::collections::{BTreeMap, HashSet};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::VoxelIndex;

#[derive(Clone, Debug, PartialEq)]
pub struct InstancePrediction {
    pub id: u32,
    pub class: usize,
    pub confidence: f64,
    pub points: Vec<Point3<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtInstance {
    pub id: u32,
    pub class: usize,
    pub points: Vec<Point3<f64>>,
}

fn voxelize(points: &[Point3<f64>], cell: f64) -> HashSet<VoxelIndex> {
    points.iter().map(|p| VoxelIndex::from_point(p, cell)).collect()
}

fn set_iou(a: &HashSet<VoxelIndex>, b: &HashSet<VoxelIndex>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|v| large.contains(v)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of two point sets after voxelization at `cell`; zero for an empty union.
pub fn instance_iou_3d(pred: &[Point3<f64>], gt: &[Point3<f64>], cell: f64) -> f64 {
    assert!(cell > 0.0, "cell must be positive");
    set_iou(&voxelize(pred, cell), &voxelize(gt, cell))
}

/// Fraction of ground-truth instances whose best-overlapping prediction
/// reaches `min_iou` and carries the right class. Overlap ties go to the lower
/// prediction id. Zero without ground truth.
pub fn class_accuracy(preds: &[InstancePrediction], gt: &[GtInstance], cell: f64, min_iou: f64) -> f64 {
    if gt.is_empty() {
        return 0.0;
    }
    let pred_sets: Vec<_> = preds.iter().map(|p| voxelize(&p.points, cell)).collect();
    let correct = gt
        .iter()
        .filter(|g| {
            let gs = voxelize(&g.points, cell);
            let best = preds
                .iter()
                .zip(&pred_sets)
                .map(|(p, ps)| (set_iou(ps, &gs), p))
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.id.cmp(&a.1.id)));
            best.is_some_and(|(iou, p)| iou >= min_iou && p.class == g.class)
        })
        .count();
    correct as f64 / gt.len() as f64
}

/// AP per class (percent) at each threshold, and the mean over classes with
/// ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub thresholds: Vec<f64>,
    /// `per_class[c][k]` is the AP of class `c` at `thresholds[k]`.
    pub per_class: BTreeMap<usize, Vec<f64>>,
    pub mean: Vec<f64>,
}

impl ApReport {
    /// mAP at the threshold closest to `t`.
    pub fn map_at(&self, t: f64) -> Option<f64> {
        let k = self
            .thresholds
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        self.mean.get(k).copied()
    }
}

/// Per class: predictions in descending confidence (ties by ascending id) are
/// matched greedily to the unmatched ground-truth instance of that class with
/// the highest IoU, if it reaches the threshold. AP is the all-point
/// interpolated area under the precision-recall curve, in percent.
pub fn evaluate_ap(preds: &[InstancePrediction], gt: &[GtInstance], thresholds: &[f64], cell: f64) -> ApReport {
    let gt_sets: Vec<_> = gt.iter().map(|g| voxelize(&g.points, cell)).collect();
    let pred_sets: Vec<_> = preds.iter().map(|p| voxelize(&p.points, cell)).collect();
    let classes: std::collections::BTreeSet<usize> = gt.iter().map(|g| g.class).collect();

    let mut per_class = BTreeMap::new();
    for &c in &classes {
        let gts: Vec<usize> = (0..gt.len()).filter(|&i| gt[i].class == c).collect();
        let mut ps: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class == c).collect();
        ps.sort_by(|&a, &b| {
            preds[b]
                .confidence
                .total_cmp(&preds[a].confidence)
                .then(preds[a].id.cmp(&preds[b].id))
        });
        let ious: Vec<Vec<f64>> = ps
            .iter()
            .map(|&p| gts.iter().map(|&g| set_iou(&pred_sets[p], &gt_sets[g])).collect())
            .collect();
        let aps: Vec<f64> = thresholds
            .iter()
            .map(|&t| {
                let mut used = vec![false; gts.len()];
                let hits: Vec<bool> = ious
                    .iter()
                    .map(|row| {
                        let best = (0..gts.len())
                            .filter(|&g| !used[g] && row[g] >= t)
                            .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)));
                        if let Some(g) = best {
                            used[g] = true;
                        }
                        best.is_some()
                    })
                    .collect();
                100.0 * average_precision(&hits, gts.len())
            })
            .collect();
        per_class.insert(c, aps);
    }
    let mean = (0..thresholds.len())
        .map(|k| {
            if per_class.is_empty() {
                0.0
            } else {
                per_class.values().map(|v| v[k]).sum::<f64>() / per_class.len() as f64
            }
        })
        .collect();
    ApReport {
        thresholds: thresholds.to_vec(),
        per_class,
        mean,
    }
}

/// All-point interpolated AP for a ranked list of hits against `n_gt` positives.
pub fn average_precision(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(hits.len());
    let mut precision = Vec::with_capacity(hits.len());
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn grid_points(x0: i32, nx: i32, ny: i32, nz: i32, cell: f64) -> Vec<Point3<f64>> {
        let mut v = Vec::new();
        for x in x0..x0 + nx {
            for y in 0..ny {
                for z in 0..nz {
                    v.push(VoxelIndex::new(x, y, z).center(cell));
                }
            }
        }
        v
    }

    #[test]
    fn iou_cases() {
        let a = grid_points(0, 4, 4, 4, 0.1);
        assert_eq!(instance_iou_3d(&a, &a, 0.1), 1.0);
        let far = grid_points(10, 4, 4, 4, 0.1);
        assert_eq!(instance_iou_3d(&a, &far, 0.1), 0.0);
        assert_eq!(instance_iou_3d(&[], &[], 0.1), 0.0);
    }

    #[test]
    fn accuracy_uses_best_overlap() {
        let cell = 0.1;
        let a = grid_points(0, 4, 4, 4, cell);
        let b = grid_points(10, 4, 4, 4, cell);
        let gt = vec![
            GtInstance { id: 1, class: 0, points: a.clone() },
            GtInstance { id: 2, class: 1, points: b.clone() },
        ];
        let pred = |id, class, points: &Vec<Point3<f64>>| InstancePrediction {
            id,
            class,
            confidence: 1.0,
            points: points.clone(),
        };
        // Second GT gets the wrong class; a sliver of the first is ignored.
        let preds = vec![pred(1, 0, &a), pred(2, 0, &b), pred(3, 1, &a[..4].to_vec())];
        assert_eq!(class_accuracy(&preds, &gt, cell, 0.5), 0.5);
        assert_eq!(class_accuracy(&preds[..1], &gt, cell, 0.5), 0.5);
        assert_eq!(class_accuracy(&[], &gt, cell, 0.5), 0.0);
    }

    #[test]
    fn half_overlapping_cubes() {
        // Unit cubes offset by half a side, sampled at cell = 0.05.
        let cell = 0.05;
        let a = grid_points(0, 20, 20, 20, cell);
        let b = grid_points(10, 20, 20, 20, cell);
        // Brute force: 10 shared x-slabs of 20 * 20 voxels out of 30 slabs.
        let inter = (10 * 400) as f64;
        let union = (30 * 400) as f64;
        assert!((instance_iou_3d(&a, &b, cell) - inter / union).abs() < 1e-12);
    }

    fn gt(id: u32, class: usize, x0: i32) -> GtInstance {
        GtInstance {
            id,
            class,
            points: grid_points(x0, 3, 3, 3, 0.1),
        }
    }

    fn pred(id: u32, class: usize, conf: f64, x0: i32) -> InstancePrediction {
        InstancePrediction {
            id,
            class,
            confidence: conf,
            points: grid_points(x0, 3, 3, 3, 0.1),
        }
    }

    #[test]
    fn perfect_predictions() {
        let g = vec![gt(1, 0, 0), gt(2, 1, 10), gt(3, 1, 20)];
        let p = vec![pred(1, 0, 0.9, 0), pred(2, 1, 0.9, 10), pred(3, 1, 0.9, 20)];
        let r = evaluate_ap(&p, &g, &[0.5, 0.25], 0.1);
        assert_eq!(r.per_class[&0], vec![100.0, 100.0]);
        assert_eq!(r.per_class[&1], vec![100.0, 100.0]);
        assert_eq!(r.mean, vec![100.0, 100.0]);
    }

    #[test]
    fn no_predictions() {
        let r = evaluate_ap(&[], &[gt(1, 0, 0)], &[0.5], 0.1);
        assert_eq!(r.mean, vec![0.0]);
    }

    #[test]
    fn one_tp_one_fp() {
        // Hand-unrolled: ranks (TP, FP), 2 positives. Recall 0.5 at precision 1.
        let g = vec![gt(1, 0, 0), gt(2, 0, 10)];
        let p = vec![pred(1, 0, 0.9, 0), pred(2, 0, 0.4, 40)];
        let r = evaluate_ap(&p, &g, &[0.5], 0.1);
        assert_eq!(r.per_class[&0], vec![50.0]);
    }

    #[test]
    fn ap_area_by_hand() {
        // (TP, FP, TP) over 2 positives: 0.5 * 1 + 0.5 * 2/3.
        assert!((average_precision(&[true, false, true], 2) - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    fn arb_preds() -> impl Strategy<Value = Vec<InstancePrediction>> {
        prop::collection::vec((0usize..2, 0i32..6), 0..8).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (c, x))| pred(i as u32 + 1, c, 1.0 - i as f64 * 0.1, x * 5))
                .collect()
        })
    }

    fn ground_truth() -> Vec<GtInstance> {
        vec![gt(1, 0, 0), gt(2, 0, 10), gt(3, 1, 20), gt(4, 1, 5)]
    }

    proptest! {
        #[test]
        fn permutation_invariant(p in arb_preds(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let g = ground_truth();
            let base = evaluate_ap(&p, &g, &[0.5], 0.1);
            let mut q = p.clone();
            q.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(base, evaluate_ap(&q, &g, &[0.5], 0.1));
        }

        #[test]
        fn removing_false_positive_never_hurts(p in arb_preds()) {
            let g = ground_truth();
            let full = evaluate_ap(&p, &g, &[0.5], 0.1);
            // A prediction far from every ground truth is a false positive.
            for (i, x) in p.iter().enumerate() {
                let far = g.iter().all(|gi| instance_iou_3d(&x.points, &gi.points, 0.1) < 0.5);
                if far {
                    let mut q = p.clone();
                    q.remove(i);
                    let less = evaluate_ap(&q, &g, &[0.5], 0.1);
                    for (c, ap) in &full.per_class {
                        prop_assert!(less.per_class[c][0] >= ap[0] - 1e-9);
                    }
                }
            }
        }

        #[test]
        fn adding_true_positive_never_hurts(p in arb_preds(), which in 0usize..4) {
            let g = ground_truth();
            let full = evaluate_ap(&p, &g, &[0.5], 0.1);
            let mut q = p.clone();
            let target = &g[which];
            // Only a ground truth no existing prediction can claim.
            let claimed = p.iter().any(|x| x.class == target.class && instance_iou_3d(&x.points, &target.points, 0.1) >= 0.5);
            prop_assume!(!claimed);
            q.push(InstancePrediction { id: 0, class: target.class, confidence: 2.0, points: target.points.clone() });
            let more = evaluate_ap(&q, &g, &[0.5], 0.1);
            for (c, ap) in &full.per_class {
                prop_assert!(more.per_class[c][0] >= ap[0] - 1e-9);
            }
        }
    }
}
