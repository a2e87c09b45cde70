//! Cluster-All baseline: connected components of same-class points.

use std::collections::HashMap;

use nalgebra::Point3;

use super::ap::InstancePrediction;
use crate::geometry::VoxelIndex;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Groups point indices into components linked by same-class pairs within
/// `radius`. Components are ordered by their smallest point index.
pub fn cluster_indices(points: &[Point3<f64>], classes: &[usize], radius: f64) -> Vec<Vec<usize>> {
    assert!(radius > 0.0, "radius must be positive");
    assert_eq!(points.len(), classes.len(), "one class per point");
    let mut cells: HashMap<(usize, VoxelIndex), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry((classes[i], VoxelIndex::from_point(p, radius))).or_default().push(i);
    }
    let mut uf = UnionFind((0..points.len()).collect());
    let r2 = radius * radius;
    for (i, p) in points.iter().enumerate() {
        let v = VoxelIndex::from_point(p, radius);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = cells.get(&(classes[i], v.offset(dx, dy, dz))) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && (points[j] - p).norm_squared() <= r2 {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..points.len() {
        let root = uf.find(i);
        let k = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[k].push(i);
    }
    groups
}

/// One prediction per component, with confidence 1 and ids from 1.
pub fn cluster_all(points: &[Point3<f64>], classes: &[usize], radius: f64) -> Vec<InstancePrediction> {
    cluster_indices(points, classes, radius)
        .into_iter()
        .enumerate()
        .map(|(k, idx)| InstancePrediction {
            id: k as u32 + 1,
            class: classes[idx[0]],
            confidence: 1.0,
            points: idx.iter().map(|&i| points[i]).collect(),
        })
        .collect()
}
