//! Detection payloads: one JSON document per detection frame.
//!
//! ```json
//! {"frame": 10, "prompt": ["chair", "table"],
//!  "detections": [{"labels": [{"name": "chair", "score": 0.61}],
//!                  "bbox": [12, 40, 88, 130],
//!                  "mask_png": null,
//!                  "mask_rle": {"size": [480, 640], "counts": "..."}}]}
//! ```
//!
//! `mask_png` is a path relative to the payload file. Exactly one of
//! `mask_png` / `mask_rle` must be set.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::labels::LabelSpace;
use super::rle::Rle;
use crate::error::{Error, Result};
use crate::geometry::Mask;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelMeasurement {
    /// Index into the open set.
    pub label: usize,
    /// Similarity score in [0, 1].
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub measurements: Vec<LabelMeasurement>,
    pub mask: Mask,
    /// `[x0, y0, x1, y1]` in pixels.
    pub bbox: [f64; 4],
    /// Open-set labels offered to the detector in this frame.
    pub prompt: BTreeSet<usize>,
}

impl DetectionRecord {
    /// Union of measured labels.
    pub fn labels(&self) -> BTreeSet<usize> {
        self.measurements.iter().map(|m| m.label).collect()
    }
}

/// Detections of one frame after validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectionFrame {
    pub frame: u64,
    pub prompt: BTreeSet<usize>,
    pub detections: Vec<DetectionRecord>,
    pub skipped: SkipCounts,
}

/// Records dropped while loading, by reason.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub unknown_label: usize,
    pub label_not_in_prompt: usize,
    pub empty: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.unknown_label + self.label_not_in_prompt + self.empty
    }

    pub fn add(&mut self, other: &SkipCounts) {
        self.unknown_label += other.unknown_label;
        self.label_not_in_prompt += other.label_not_in_prompt;
        self.empty += other.empty;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelJson {
    pub name: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionJson {
    pub labels: Vec<LabelJson>,
    pub bbox: [f64; 4],
    #[serde(default)]
    pub mask_png: Option<String>,
    #[serde(default)]
    pub mask_rle: Option<Rle>,
}

/// Wire form of a detection frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionPayload {
    pub frame: u64,
    pub prompt: Vec<String>,
    pub detections: Vec<DetectionJson>,
}

pub fn payload_file_name(frame: u64) -> String {
    format!("frame-{frame:06}.json")
}

impl DetectionPayload {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::parse(path, e.into_inner())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("payload serializes")
    }

    /// Builds a payload from validated records; masks are RLE-encoded.
    pub fn from_frame(frame: &DetectionFrame, space: &LabelSpace) -> Self {
        let name = |i: usize| space.open_set.name(i).to_string();
        DetectionPayload {
            frame: frame.frame,
            prompt: frame.prompt.iter().map(|i| name(*i)).collect(),
            detections: frame
                .detections
                .iter()
                .map(|d| DetectionJson {
                    labels: d
                        .measurements
                        .iter()
                        .map(|m| LabelJson {
                            name: name(m.label),
                            score: m.score,
                        })
                        .collect(),
                    bbox: d.bbox,
                    mask_png: None,
                    mask_rle: Some(Rle::encode(&d.mask)),
                })
                .collect(),
        }
    }

    /// Validates against the label space and frame resolution. Records whose
    /// labels are unknown, absent from the prompt, or whose mask is empty are
    /// dropped and counted; structural problems are errors.
    pub fn resolve(
        &self,
        space: &LabelSpace,
        width: usize,
        height: usize,
        base_dir: Option<&Path>,
    ) -> Result<DetectionFrame> {
        let mut prompt = BTreeSet::new();
        for (i, tag) in self.prompt.iter().enumerate() {
            match space.open_set.index_of(tag) {
                Some(ix) => {
                    prompt.insert(ix);
                }
                None => warn!("frame {}: prompt[{i}] `{tag}` is not an open-set label", self.frame),
            }
        }

        let mut out = DetectionFrame {
            frame: self.frame,
            prompt: prompt.clone(),
            ..Default::default()
        };
        for (k, det) in self.detections.iter().enumerate() {
            let field = |f: &str| format!("detections[{k}].{f}");
            let mask = match (&det.mask_png, &det.mask_rle) {
                (Some(png), None) => {
                    let p = match base_dir {
                        Some(b) => b.join(png),
                        None => PathBuf::from(png),
                    };
                    read_mask_png(&p)?
                }
                (None, Some(rle)) => rle.decode().map_err(|e| Error::parse(field("mask_rle"), e))?,
                _ => {
                    return Err(Error::parse(
                        field("mask_png"),
                        "exactly one of mask_png / mask_rle must be set",
                    ))
                }
            };
            if mask.width() != width || mask.height() != height {
                return Err(Error::parse(
                    field("mask"),
                    format!(
                        "mask is {}x{}, frame is {width}x{height}",
                        mask.width(),
                        mask.height()
                    ),
                ));
            }
            if det.labels.is_empty() || mask.is_empty() {
                out.skipped.empty += 1;
                continue;
            }
            let mut measurements = Vec::with_capacity(det.labels.len());
            let mut unknown = false;
            let mut outside = false;
            for (i, l) in det.labels.iter().enumerate() {
                if !(0.0..=1.0).contains(&l.score) {
                    return Err(Error::parse(
                        format!("detections[{k}].labels[{i}].score"),
                        format!("score {} outside [0, 1]", l.score),
                    ));
                }
                match space.open_set.index_of(&l.name) {
                    Some(ix) => {
                        outside |= !prompt.contains(&ix);
                        measurements.push(LabelMeasurement {
                            label: ix,
                            score: l.score,
                        });
                    }
                    None => unknown = true,
                }
            }
            if unknown {
                warn!("frame {}: detection {k} has an unknown label; skipped", self.frame);
                out.skipped.unknown_label += 1;
                continue;
            }
            if outside {
                warn!("frame {}: detection {k} label not in prompt; skipped", self.frame);
                out.skipped.label_not_in_prompt += 1;
                continue;
            }
            out.detections.push(DetectionRecord {
                measurements,
                mask,
                bbox: det.bbox,
                prompt: prompt.clone(),
            });
        }
        Ok(out)
    }
}

/// 8-bit PNG, nonzero = set.
pub fn read_mask_png(path: &Path) -> Result<Mask> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let g = img.into_luma8();
    let (w, h) = g.dimensions();
    Mask::from_bits(w as usize, h as usize, g.into_raw().into_iter().map(|v| v != 0).collect())
}

pub fn write_mask_png(path: &Path, mask: &Mask) -> Result<()> {
    let raw: Vec<u8> = mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
    let img = image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer length matches dimensions");
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and validates one payload file.
pub fn load_detection_file(
    path: &Path,
    space: &LabelSpace,
    width: usize,
    height: usize,
) -> Result<DetectionFrame> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let payload = DetectionPayload::from_json(&text).map_err(|e| match e {
        Error::Parse { context, message } => {
            Error::parse(format!("{}: {context}", path.display()), message)
        }
        other => other,
    })?;
    payload.resolve(space, width, height, path.parent())
}
