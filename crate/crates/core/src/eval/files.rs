//! Labeled point list files and conversions from labeled clouds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::ap::{GtInstance, InstancePrediction};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Conventional name of a scene's labeled point list.
pub const GROUND_TRUTH_FILE: &str = "gt.txt";

/// Class id marking an unlabeled point in exported clouds.
pub const NO_CLASS: u16 = u16::MAX;

/// One `x y z class_id instance_id` record. Instance id 0 means unlabeled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub point: Point3<f64>,
    pub class: usize,
    pub instance: u32,
}

pub fn read_labeled_points(path: &Path) -> Result<Vec<LabeledPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ctx = || format!("{}:{}", path.display(), n + 1);
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(ctx(), format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(ctx(), format!("`{s}`: {e}")));
        let point = Point3::new(num(f[0])?, num(f[1])?, num(f[2])?);
        let class = f[3].parse().map_err(|e| Error::parse(ctx(), format!("`{}`: {e}", f[3])))?;
        let instance = f[4].parse().map_err(|e| Error::parse(ctx(), format!("`{}`: {e}", f[4])))?;
        out.push(LabeledPoint { point, class, instance });
    }
    Ok(out)
}

pub fn write_labeled_points(path: &Path, points: &[LabeledPoint]) -> Result<()> {
    let mut s = String::with_capacity(points.len() * 40);
    for p in points {
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            p.point.x, p.point.y, p.point.z, p.class, p.instance
        );
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Ground-truth instances grouped by instance id, skipping id 0. The class of
/// an instance is the most frequent class among its points, ties to the lowest.
pub fn group_ground_truth(points: &[LabeledPoint]) -> Vec<GtInstance> {
    let mut by_id: BTreeMap<u32, (Vec<Point3<f64>>, BTreeMap<usize, usize>)> = BTreeMap::new();
    for p in points.iter().filter(|p| p.instance != 0) {
        let e = by_id.entry(p.instance).or_default();
        e.0.push(p.point);
        *e.1.entry(p.class).or_default() += 1;
    }
    by_id
        .into_iter()
        .map(|(id, (pts, votes))| {
            let class = votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(c, _)| *c)
                .expect("nonempty group");
            GtInstance { id, class, points: pts }
        })
        .collect()
}

/// Predictions from a cloud carrying instance and class ids. Confidences come
/// from `confidence` by instance id, defaulting to 1.
pub fn predictions_from_cloud(cloud: &PointCloud, confidence: &BTreeMap<u32, f64>) -> Result<Vec<InstancePrediction>> {
    let (Some(ids), Some(classes)) = (&cloud.instance_ids, &cloud.class_ids) else {
        return Err(Error::InvalidParameter("cloud lacks instance or class ids".into()));
    };
    let mut by_id: BTreeMap<u32, (u16, Vec<Point3<f64>>)> = BTreeMap::new();
    for ((p, &id), &c) in cloud.points.iter().zip(ids).zip(classes) {
        if id == 0 || c == NO_CLASS {
            continue;
        }
        by_id.entry(id).or_insert_with(|| (c, Vec::new())).1.push(*p);
    }
    Ok(by_id
        .into_iter()
        .map(|(id, (c, points))| InstancePrediction {
            id,
            class: c as usize,
            confidence: confidence.get(&id).copied().unwrap_or(1.0),
            points,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_points_round_trip_and_grouping() {
        let pts = vec![
            LabeledPoint { point: Point3::new(0.0, 0.5, 1.25), class: 3, instance: 2 },
            LabeledPoint { point: Point3::new(1.0, 0.5, 1.25), class: 3, instance: 2 },
            LabeledPoint { point: Point3::new(2.0, 0.0, 0.0), class: 0, instance: 0 },
            LabeledPoint { point: Point3::new(3.0, 0.0, 0.0), class: 1, instance: 5 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.txt");
        write_labeled_points(&p, &pts).unwrap();
        let back = read_labeled_points(&p).unwrap();
        assert_eq!(back, pts);
        let g = group_ground_truth(&back);
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].id, g[0].class, g[0].points.len()), (2, 3, 2));
        assert_eq!((g[1].id, g[1].class), (5, 1));
    }

    #[test]
    fn malformed_line_names_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.txt");
        std::fs::write(&p, "0 0 0 1 1\n0 0 x 1 1\n").unwrap();
        let err = read_labeled_points(&p).unwrap_err().to_string();
        assert!(err.contains("gt.txt:2"), "{err}");
    }
}
