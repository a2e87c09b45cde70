//! Emulated tagger and open-set detector driven by ground-truth masks.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::render_view;
use super::scene::GroundTruthScene;
use crate::detections::{DetectionFrame, DetectionRecord, LabelMeasurement, PromptState};
use crate::error::{Error, Result};
use crate::geometry::{Frame, Mask};
use crate::label_fusion::{AnnotatedDetection, AnnotatedFrame, GtObservation};
use crate::pipeline::DetectorSource;

/// `P(measured open label | true class)`, one row per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfusion {
    n_open: usize,
    rows: Vec<Vec<f64>>,
}

impl PlantedConfusion {
    pub fn new(n_open: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (c, row) in rows.iter().enumerate() {
            if row.len() != n_open {
                return Err(Error::InvalidParameter(format!("confusion row {c} has {} entries", row.len())));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("confusion row {c} is not a distribution")));
            }
        }
        Ok(Self { n_open, rows })
    }

    /// Each class measured as its canonical label.
    pub fn exact(canonical: &[usize], n_open: usize) -> Result<Self> {
        Self::with_confusions(canonical, n_open, &[])
    }

    /// Canonical labels with `(class, open label, rate)` mass moved off the
    /// canonical entry.
    pub fn with_confusions(canonical: &[usize], n_open: usize, confusions: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = canonical
            .iter()
            .map(|&o| {
                let mut row = vec![0.0; n_open];
                if o < n_open {
                    row[o] = 1.0;
                }
                row
            })
            .collect();
        for &(c, o, rate) in confusions {
            let (Some(&k), true) = (canonical.get(c), o < n_open) else {
                return Err(Error::InvalidParameter(format!("confusion ({c}, {o}) out of range")));
            };
            rows[c][k] -= rate;
            rows[c][o] += rate;
        }
        Self::new(n_open, rows)
    }

    /// Uniform noise: `rate` of the mass spread evenly over the other labels.
    pub fn uniform_noise(canonical: &[usize], n_open: usize, rate: f64) -> Result<Self> {
        let rows = canonical
            .iter()
            .map(|&k| {
                (0..n_open)
                    .map(|o| if o == k { 1.0 - rate } else { rate / (n_open - 1) as f64 })
                    .collect()
            })
            .collect();
        Self::new(n_open, rows)
    }

    pub fn n_open(&self) -> usize {
        self.n_open
    }

    pub fn n_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.rows[class]
    }

    pub fn sample(&self, class: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (o, p) in self.rows[class].iter().enumerate() {
            acc += p;
            if u < acc {
                return o;
            }
        }
        self.rows[class].iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Mean probability of measuring something other than the canonical label.
    pub fn mean_noise(&self, canonical: &[usize]) -> f64 {
        let n = self.rows.len().max(1) as f64;
        self.rows.iter().zip(canonical).map(|(row, &k)| 1.0 - row[k]).sum::<f64>() / n
    }
}

/// Corruptions applied by [`SyntheticDetector`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Objects with fewer visible pixels are neither tagged nor detected.
    pub min_pixels: usize,
    /// Probability that a visible object contributes no tag.
    pub missed_tag_prob: f64,
    /// Objects subject to missed tags; `None` means all.
    pub missed_tag_objects: Option<BTreeSet<u32>>,
    pub dropout_prob: f64,
    /// Probability that a mask is cut into left and right halves.
    pub split_prob: f64,
    /// Probability of eroding or dilating a mask by `morph_radius`.
    pub morph_prob: f64,
    pub morph_radius: usize,
    pub score_range: (f64, f64),
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            min_pixels: 100,
            missed_tag_prob: 0.0,
            missed_tag_objects: None,
            dropout_prob: 0.0,
            split_prob: 0.0,
            morph_prob: 0.0,
            morph_radius: 2,
            score_range: (0.4, 0.9),
        }
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

/// Detections for frames of a synthetic scene. Tags and detection labels
/// come from the same draw from the planted confusion, so the prompt holds
/// the measured label unless the tag is missed. Also records an annotated
/// log of every frame it serves.
pub struct SyntheticDetector {
    scene: GroundTruthScene,
    confusion: PlantedConfusion,
    noise: NoiseModel,
    seed: u64,
    annotations: Vec<AnnotatedFrame>,
    visible: BTreeMap<u64, BTreeSet<u32>>,
}

fn split_halves(mask: &Mask) -> Option<(Mask, Mask)> {
    let [x0, _, x1, _] = mask.bbox()?;
    let cut = (x0 + x1) / 2;
    let left = Mask::from_fn(mask.width(), mask.height(), |c, r| c < cut && mask.get(c, r));
    let right = Mask::from_fn(mask.width(), mask.height(), |c, r| c >= cut && mask.get(c, r));
    (!left.is_empty() && !right.is_empty()).then_some((left, right))
}

fn record(mask: Mask, label: usize, score: f64, prompt: &BTreeSet<usize>) -> DetectionRecord {
    let [x0, y0, x1, y1] = mask.bbox().expect("non-empty mask");
    DetectionRecord {
        measurements: vec![LabelMeasurement { label, score }],
        mask,
        bbox: [x0 as f64, y0 as f64, x1 as f64, y1 as f64],
        prompt: prompt.clone(),
    }
}

impl SyntheticDetector {
    pub fn new(scene: GroundTruthScene, confusion: PlantedConfusion, noise: NoiseModel, seed: u64) -> Result<Self> {
        if let Some(o) = scene.objects.iter().find(|o| o.class >= confusion.n_classes()) {
            return Err(Error::InvalidParameter(format!(
                "object {} has class {} outside the confusion matrix",
                o.id, o.class
            )));
        }
        Ok(Self {
            scene,
            confusion,
            noise,
            seed,
            annotations: Vec::new(),
            visible: BTreeMap::new(),
        })
    }

    pub fn scene(&self) -> &GroundTruthScene {
        &self.scene
    }

    pub fn annotations(&self) -> &[AnnotatedFrame] {
        &self.annotations
    }

    pub fn into_annotations(self) -> Vec<AnnotatedFrame> {
        self.annotations
    }

    /// Objects that passed the visibility threshold, per served frame.
    pub fn visible_objects(&self) -> &BTreeMap<u64, BTreeSet<u32>> {
        &self.visible
    }

    /// Emulates one detection frame from ground-truth masks.
    pub fn detect(&mut self, frame: &Frame, memory: &BTreeSet<usize>) -> DetectionFrame {
        let k = &frame.intrinsics;
        let view = render_view(&self.scene, &frame.pose, k);
        let masks = view.object_masks(k.width, k.height, self.noise.min_pixels);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ frame.index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let noise = &self.noise;

        let measured: BTreeMap<u32, usize> = masks
            .keys()
            .map(|&id| {
                let class = self.scene.object(id).expect("rendered id exists").class;
                (id, self.confusion.sample(class, &mut rng))
            })
            .collect();
        let mut prompt: BTreeSet<usize> = measured
            .iter()
            .filter(|(id, _)| {
                let targeted = noise.missed_tag_objects.as_ref().is_none_or(|s| s.contains(id));
                let missed = rng.random::<f64>() < noise.missed_tag_prob;
                !(targeted && missed)
            })
            .map(|(_, o)| *o)
            .collect();
        prompt.extend(memory.iter().copied());

        let mut detections = Vec::new();
        let mut annotated = Vec::new();
        for (&id, mask) in &masks {
            let label = measured[&id];
            let dropped = rng.random::<f64>() < noise.dropout_prob;
            let (lo, hi) = noise.score_range;
            let score = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let morph = rng.random::<f64>() < noise.morph_prob;
            let grow = rng.random::<bool>();
            let split = rng.random::<f64>() < noise.split_prob;
            if dropped || !prompt.contains(&label) {
                continue;
            }
            let mut mask = mask.clone();
            if morph && noise.morph_radius > 0 {
                let m = if grow {
                    mask.dilate(noise.morph_radius)
                } else {
                    mask.erode(noise.morph_radius)
                };
                if !m.is_empty() {
                    mask = m;
                }
            }
            let parts = match split.then(|| split_halves(&mask)).flatten() {
                Some((a, b)) => vec![a, b],
                None => vec![mask],
            };
            for m in parts {
                detections.push(record(m, label, score, &prompt));
                annotated.push(AnnotatedDetection {
                    labels: BTreeSet::from([label]),
                    instance: Some(id),
                });
            }
        }

        let ground_truth = masks
            .keys()
            .map(|&id| GtObservation {
                instance: id,
                class: self.scene.object(id).expect("rendered id exists").class,
            })
            .collect();
        self.annotations.push(AnnotatedFrame {
            prompt: prompt.clone(),
            ground_truth: Some(ground_truth),
            detections: annotated,
        });
        self.visible.insert(frame.index, masks.keys().copied().collect());
        DetectionFrame {
            frame: frame.index,
            prompt,
            detections,
            skipped: Default::default(),
        }
    }
}

impl DetectorSource for SyntheticDetector {
    fn fetch(&mut self, frame: &Frame, memory: &BTreeSet<usize>) -> Result<Option<DetectionFrame>> {
        Ok(Some(self.detect(frame, memory)))
    }
}

/// Runs the detector over the detection frames of `frames` with its own
/// prompt memory of `window` detection frames, as the mapping loop would.
pub fn detect_sequence(
    detector: &mut SyntheticDetector,
    frames: &[Frame],
    stride: u64,
    window: usize,
) -> Vec<DetectionFrame> {
    let mut prompt = PromptState::new(window);
    frames
        .iter()
        .filter(|f| stride > 0 && f.index % stride == 0)
        .map(|f| {
            let d = detector.detect(f, &prompt.memory());
            prompt.record_frame(&d.detections);
            d
        })
        .collect()
}

/// Annotated frames with one ground-truth object each, drawn so that
/// `tag_rates[o][c]` is the chance label `o` is in the prompt when class `c`
/// is visible, and `det_rates[o][c]` the chance a detection carries `o` once
/// prompted. Every class appears in `frames_per_class` frames.
pub fn planted_annotated_log(
    tag_rates: &[Vec<f64>],
    det_rates: &[Vec<f64>],
    frames_per_class: usize,
    seed: u64,
) -> Vec<AnnotatedFrame> {
    let n_open = tag_rates.len();
    let n_closed = tag_rates.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(n_closed * frames_per_class);
    for c in 0..n_closed {
        for i in 0..frames_per_class {
            let prompt: BTreeSet<usize> = (0..n_open).filter(|&o| rng.random::<f64>() < tag_rates[o][c]).collect();
            let labels: BTreeSet<usize> = prompt
                .iter()
                .copied()
                .filter(|&o| rng.random::<f64>() < det_rates[o][c])
                .collect();
            let instance = (c * frames_per_class + i) as u32 + 1;
            let detections = if labels.is_empty() {
                Vec::new()
            } else {
                vec![AnnotatedDetection {
                    labels,
                    instance: Some(instance),
                }]
            };
            frames.push(AnnotatedFrame {
                prompt,
                ground_truth: Some(vec![GtObservation { instance, class: c }]),
                detections,
            });
        }
    }
    frames
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::render::{default_trajectory, render_frames, synthetic_intrinsics};
    use crate::synth::scene::{generate_scene, SceneSpec};

    fn scene() -> GroundTruthScene {
        generate_scene(&SceneSpec { n_objects: 3, ..Default::default() }, 3).unwrap()
    }

    fn canonical() -> Vec<usize> {
        (0..8).collect()
    }

    #[test]
    fn clean_detector_returns_ground_truth_masks() {
        let scene = scene();
        let k = synthetic_intrinsics();
        let frames = render_frames(&scene, &default_trajectory(4)[..1], &k).unwrap();
        let mut det =
            SyntheticDetector::new(scene.clone(), PlantedConfusion::exact(&canonical(), 8).unwrap(), NoiseModel::none(), 1)
                .unwrap();
        let out = det.detect(&frames[0], &BTreeSet::new());
        let view = render_view(&scene, &frames[0].pose, &k);
        let gt = view.object_masks(k.width, k.height, 100);
        assert!(!gt.is_empty());
        assert_eq!(out.detections.len(), gt.len());
        for (d, (id, m)) in out.detections.iter().zip(&gt) {
            assert_eq!(&d.mask, m);
            assert_eq!(d.measurements[0].label, scene.object(*id).unwrap().class);
        }
        assert_eq!(det.annotations().len(), 1);
    }

    #[test]
    fn sampled_labels_follow_planted_rows() {
        let conf = PlantedConfusion::with_confusions(&[0, 1, 2], 3, &[(0, 1, 0.3), (0, 2, 0.1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[conf.sample(0, &mut rng)] += 1;
        }
        for (o, want) in [0.6, 0.3, 0.1].iter().enumerate() {
            let got = counts[o] as f64 / n as f64;
            assert!((got - want).abs() < 0.05, "label {o}: {got} vs {want}");
        }
        assert!((conf.mean_noise(&[0, 1, 2]) - 0.4 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn split_yields_two_detections() {
        let scene = scene();
        let k = synthetic_intrinsics();
        let frames = render_frames(&scene, &default_trajectory(4)[..1], &k).unwrap();
        let noise = NoiseModel {
            split_prob: 1.0,
            ..NoiseModel::none()
        };
        let mut det = SyntheticDetector::new(scene.clone(), PlantedConfusion::exact(&canonical(), 8).unwrap(), noise, 1)
            .unwrap();
        let out = det.detect(&frames[0], &BTreeSet::new());
        let n_visible = det.visible_objects()[&0].len();
        assert_eq!(out.detections.len(), 2 * n_visible);
        let a = &out.detections[0].mask;
        let b = &out.detections[1].mask;
        assert_eq!(a.iter_set().filter(|(c, r)| b.get(*c, *r)).count(), 0);
    }

    #[test]
    fn missed_tags_drop_detections_unless_remembered() {
        let scene = scene();
        let k = synthetic_intrinsics();
        let frames = render_frames(&scene, &default_trajectory(4)[..1], &k).unwrap();
        let noise = NoiseModel {
            missed_tag_prob: 1.0,
            ..NoiseModel::none()
        };
        let mut det = SyntheticDetector::new(scene.clone(), PlantedConfusion::exact(&canonical(), 8).unwrap(), noise, 1)
            .unwrap();
        assert!(det.detect(&frames[0], &BTreeSet::new()).detections.is_empty());
        let all: BTreeSet<usize> = (0..8).collect();
        let out = det.detect(&frames[0], &all);
        assert_eq!(out.detections.len(), det.visible_objects()[&0].len());
    }

    #[test]
    fn deterministic_per_seed_and_frame() {
        let scene = scene();
        let k = synthetic_intrinsics();
        let frames = render_frames(&scene, &default_trajectory(4)[..2], &k).unwrap();
        let noise = NoiseModel {
            dropout_prob: 0.3,
            split_prob: 0.5,
            morph_prob: 0.5,
            ..NoiseModel::none()
        };
        let conf = PlantedConfusion::uniform_noise(&canonical(), 8, 0.3).unwrap();
        let run = || {
            let mut d = SyntheticDetector::new(scene.clone(), conf.clone(), noise.clone(), 5).unwrap();
            detect_sequence(&mut d, &frames, 1, 5)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn planted_log_has_requested_shape() {
        let tag = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let log = planted_annotated_log(&tag, &tag, 10, 0);
        assert_eq!(log.len(), 20);
        assert!(log[..10].iter().all(|f| f.prompt == BTreeSet::from([0]) && f.detections.len() == 1));
    }
}
