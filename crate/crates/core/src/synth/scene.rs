use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LabeledPoint;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z, "inverted box");
        Self { min, max }
    }

    /// Parameter interval `[t0, t1]` where `origin + t * dir` is inside.
    pub fn ray_interval(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[a];
            let (mut lo, mut hi) = ((self.min[a] - origin[a]) * inv, (self.max[a] - origin[a]) * inv);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Euclidean distance from `p` to the box; zero inside.
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let d = Vector3::from_fn(|a, _| (self.min[a] - p[a]).max(0.0).max(p[a] - self.max[a]));
        d.norm()
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= other.min[a] && other.max[a] <= self.max[a])
    }

    /// True when the boxes come closer than `gap` along every axis.
    pub fn overlaps(&self, other: &Aabb, gap: f64) -> bool {
        (0..3).all(|a| self.min[a] < other.max[a] + gap && other.min[a] < self.max[a] + gap)
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneObject {
    /// Ids start at 1; 0 marks background.
    pub id: u32,
    pub class: usize,
    pub bounds: Aabb,
}

/// Boxes standing on the floor of a closed room. World z points up.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthScene {
    pub room: Aabb,
    pub objects: Vec<SceneObject>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n_objects: usize,
    /// Classes drawn uniformly, with replacement.
    pub classes: Vec<usize>,
    pub room_half_extent: f64,
    pub room_height: f64,
    /// Objects are placed within this half extent of the room center.
    pub placement_half_extent: f64,
    /// Minimum clearance between objects (m).
    pub min_gap: f64,
    pub min_size: [f64; 3],
    pub max_size: [f64; 3],
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            n_objects: 5,
            classes: (0..8).collect(),
            room_half_extent: 3.0,
            room_height: 2.6,
            placement_half_extent: 1.4,
            min_gap: 0.25,
            min_size: [0.35, 0.35, 0.35],
            max_size: [0.8, 0.8, 0.9],
            max_attempts: 2000,
        }
    }
}

/// Places `n_objects` random boxes without overlap. Deterministic per seed.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<GroundTruthScene> {
    if spec.n_objects > 0 && spec.classes.is_empty() {
        return Err(Error::InvalidParameter("no classes to draw from".into()));
    }
    let h = spec.room_half_extent;
    let room = Aabb::new(Point3::new(-h, -h, 0.0), Point3::new(h, h, spec.room_height));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(spec.n_objects);
    let p = spec.placement_half_extent;
    for i in 0..spec.n_objects {
        let class = spec.classes[rng.random_range(0..spec.classes.len())];
        let mut placed = None;
        for _ in 0..spec.max_attempts {
            let size: [f64; 3] = std::array::from_fn(|a| rng.random_range(spec.min_size[a]..=spec.max_size[a]));
            if size[0] > 2.0 * p || size[1] > 2.0 * p {
                continue;
            }
            let x = rng.random_range(-p..=p - size[0]);
            let y = rng.random_range(-p..=p - size[1]);
            let b = Aabb::new(Point3::new(x, y, 0.0), Point3::new(x + size[0], y + size[1], size[2]));
            if room.contains_box(&b) && objects.iter().all(|o| !o.bounds.overlaps(&b, spec.min_gap)) {
                placed = Some(b);
                break;
            }
        }
        let Some(bounds) = placed else {
            return Err(Error::Infeasible(format!(
                "could not place object {} of {} after {} attempts",
                i + 1,
                spec.n_objects,
                spec.max_attempts
            )));
        };
        objects.push(SceneObject {
            id: i as u32 + 1,
            class,
            bounds,
        });
    }
    Ok(GroundTruthScene { room, objects })
}

impl GroundTruthScene {
    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Labels each point with the nearest object within `tolerance`, ties to
    /// the lower id. Other points get instance 0 and class 0.
    pub fn label_points(&self, points: &[Point3<f64>], tolerance: f64) -> Vec<LabeledPoint> {
        points
            .iter()
            .map(|p| {
                let best = self
                    .objects
                    .iter()
                    .map(|o| (o.bounds.distance(p), o))
                    .filter(|(d, _)| *d <= tolerance)
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
                match best {
                    Some((_, o)) => LabeledPoint {
                        point: *p,
                        class: o.class,
                        instance: o.id,
                    },
                    None => LabeledPoint {
                        point: *p,
                        class: 0,
                        instance: 0,
                    },
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scene() {
        let s = generate_scene(&SceneSpec { n_objects: 0, ..Default::default() }, 1).unwrap();
        assert!(s.objects.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SceneSpec::default();
        assert_eq!(generate_scene(&spec, 7).unwrap(), generate_scene(&spec, 7).unwrap());
        assert_ne!(generate_scene(&spec, 7).unwrap(), generate_scene(&spec, 8).unwrap());
    }

    #[test]
    fn boxes_are_disjoint_and_inside() {
        for seed in 0..20 {
            let s = generate_scene(&SceneSpec::default(), seed).unwrap();
            assert_eq!(s.objects.len(), 5);
            for (i, a) in s.objects.iter().enumerate() {
                assert!(s.room.contains_box(&a.bounds));
                for b in &s.objects[i + 1..] {
                    // Brute-force separation: some axis has a gap.
                    let separated = (0..3).any(|k| {
                        a.bounds.max[k] <= b.bounds.min[k] || b.bounds.max[k] <= a.bounds.min[k]
                    });
                    assert!(separated, "seed {seed}: {} and {} overlap", a.id, b.id);
                }
            }
        }
    }

    #[test]
    fn infeasible_packing_errors() {
        let spec = SceneSpec {
            n_objects: 50,
            max_attempts: 50,
            ..Default::default()
        };
        assert!(matches!(generate_scene(&spec, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn ray_and_distance() {
        let b = Aabb::new(Point3::new(1.0, -0.5, -0.5), Point3::new(2.0, 0.5, 0.5));
        let (t0, t1) = b.ray_interval(&Point3::origin(), &Vector3::x()).unwrap();
        assert_eq!((t0, t1), (1.0, 2.0));
        assert!(b.ray_interval(&Point3::origin(), &Vector3::y()).is_none());
        assert_eq!(b.distance(&Point3::new(1.5, 0.0, 0.0)), 0.0);
        assert!((b.distance(&Point3::new(0.0, 0.0, 0.0)) - 1.0).abs() < 1e-12);
    }
}
