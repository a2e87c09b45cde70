use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Integer voxel coordinate in the world frame: `floor(p / voxel_length)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelIndex {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn from_point(p: &Point3<f64>, voxel_length: f64) -> Self {
        Self {
            x: (p.x / voxel_length).floor() as i32,
            y: (p.y / voxel_length).floor() as i32,
            z: (p.z / voxel_length).floor() as i32,
        }
    }

    #[inline]
    pub fn center(&self, voxel_length: f64) -> Point3<f64> {
        Point3::new(
            (self.x as f64 + 0.5) * voxel_length,
            (self.y as f64 + 0.5) * voxel_length,
            (self.z as f64 + 0.5) * voxel_length,
        )
    }

    #[inline]
    pub fn offset(&self, dx: i32, dy: i32, dz: i32) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            z: self.z + dz,
        }
    }

    pub const FACE_NEIGHBORS: [(i32, i32, i32); 6] = [
        (1, 0, 0),
        (-1, 0, 0),
        (0, 1, 0),
        (0, -1, 0),
        (0, 0, 1),
        (0, 0, -1),
    ];
}

/// Visits every cell of side `cell` pierced by the segment `a -> b`, in order
/// from `a`. Amanatides-Woo traversal.
pub fn traverse_segment(
    a: &Point3<f64>,
    b: &Point3<f64>,
    cell: f64,
    mut visit: impl FnMut(VoxelIndex),
) {
    let dir: Vector3<f64> = b - a;
    let mut current = VoxelIndex::from_point(a, cell);
    let last = VoxelIndex::from_point(b, cell);
    visit(current);
    if current == last {
        return;
    }

    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let cur = [current.x, current.y, current.z];
    for axis in 0..3 {
        let d = dir[axis];
        if d > 0.0 {
            step[axis] = 1;
            let boundary = (cur[axis] as f64 + 1.0) * cell;
            t_max[axis] = (boundary - a[axis]) / d;
            t_delta[axis] = cell / d;
        } else if d < 0.0 {
            step[axis] = -1;
            let boundary = cur[axis] as f64 * cell;
            t_max[axis] = (boundary - a[axis]) / d;
            t_delta[axis] = -cell / d;
        }
    }

    // Upper bound on steps; guards against float drift past `last`.
    let budget = (last.x - current.x).abs() + (last.y - current.y).abs() + (last.z - current.z).abs();
    for _ in 0..budget {
        let axis = if t_max[0] < t_max[1] {
            if t_max[0] < t_max[2] {
                0
            } else {
                2
            }
        } else if t_max[1] < t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            break;
        }
        match axis {
            0 => current.x += step[0],
            1 => current.y += step[1],
            _ => current.z += step[2],
        }
        t_max[axis] += t_delta[axis];
        visit(current);
        if current == last {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    /// Slab test: does the segment pass through the open cube of `idx`?
    fn segment_hits_cell(a: &Point3<f64>, b: &Point3<f64>, idx: VoxelIndex, cell: f64) -> bool {
        let lo = [idx.x as f64 * cell, idx.y as f64 * cell, idx.z as f64 * cell];
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for axis in 0..3 {
            let d = b[axis] - a[axis];
            let (l, h) = (lo[axis], lo[axis] + cell);
            if d.abs() < 1e-15 {
                if a[axis] < l || a[axis] >= h {
                    return false;
                }
            } else {
                let (mut ta, mut tb) = ((l - a[axis]) / d, (h - a[axis]) / d);
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
            }
        }
        t0 < t1 || (t0 == t1 && t0 == 0.0)
    }

    fn brute_cells(a: &Point3<f64>, b: &Point3<f64>, cell: f64) -> BTreeSet<VoxelIndex> {
        let ia = VoxelIndex::from_point(a, cell);
        let ib = VoxelIndex::from_point(b, cell);
        let mut out = BTreeSet::new();
        for x in ia.x.min(ib.x)..=ia.x.max(ib.x) {
            for y in ia.y.min(ib.y)..=ia.y.max(ib.y) {
                for z in ia.z.min(ib.z)..=ia.z.max(ib.z) {
                    let idx = VoxelIndex::new(x, y, z);
                    if segment_hits_cell(a, b, idx, cell) {
                        out.insert(idx);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn floor_indexing_handles_negatives() {
        let idx = VoxelIndex::from_point(&Point3::new(-0.001, 0.0, 0.0299), 0.015);
        assert_eq!(idx, VoxelIndex::new(-1, 0, 1));
        let c = idx.center(0.015);
        assert!((c.x + 0.0075).abs() < 1e-12);
    }

    #[test]
    fn axis_aligned_segment_visits_run() {
        let mut seen = vec![];
        traverse_segment(
            &Point3::new(0.05, 0.05, 0.05),
            &Point3::new(0.45, 0.05, 0.05),
            0.1,
            |v| seen.push(v),
        );
        let xs: Vec<i32> = seen.iter().map(|v| v.x).collect();
        assert_eq!(xs, vec![0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn traversal_matches_slab_oracle(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0,
        ) {
            let a = Point3::new(ax, ay, az);
            let b = Point3::new(bx, by, bz);
            let cell = 0.137;
            let mut got = BTreeSet::new();
            let mut order = vec![];
            traverse_segment(&a, &b, cell, |v| { got.insert(v); order.push(v); });
            prop_assert_eq!(order.len(), got.len());
            prop_assert_eq!(got, brute_cells(&a, &b, cell));
        }
    }
}
