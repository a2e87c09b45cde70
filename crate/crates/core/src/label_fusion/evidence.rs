//! Counting statistics for the statistical likelihood matrix.
//!
//! For an open label `o` and a class `c`:
//!
//! * `tag_frames`: frames observing a ground-truth instance of `c`;
//! * `tagged_frames`: those frames whose prompt contains `o`;
//! * `det_opportunities`: ground-truth instances of `c` observed while `o` was
//!   in the prompt;
//! * `det_hits`: those instances detected with label `o`.
//!
//! The tagging likelihood is `tagged_frames / tag_frames` and the detection
//! likelihood is `det_hits / det_opportunities`; the matrix entry is their
//! product.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::matrix::{LikelihoodMatrix, Provenance};
use crate::detections::LabelSpace;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceCell {
    pub tag_frames: u64,
    pub tagged_frames: u64,
    pub det_opportunities: u64,
    pub det_hits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LikelihoodEvidence {
    n_open: usize,
    n_closed: usize,
    cells: Vec<EvidenceCell>,
}

/// One ground-truth instance visible in a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtObservation {
    pub instance: u32,
    pub class: usize,
}

/// A detection with its measured labels and the ground-truth instance it covers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDetection {
    pub labels: BTreeSet<usize>,
    pub instance: Option<u32>,
}

/// One detection frame paired with its annotations. `ground_truth` is `None`
/// for frames without annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedFrame {
    pub prompt: BTreeSet<usize>,
    pub ground_truth: Option<Vec<GtObservation>>,
    pub detections: Vec<AnnotatedDetection>,
}

/// Result of [`LikelihoodEvidence::summarize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvidenceSummary {
    pub evidence: LikelihoodEvidence,
    pub skipped_frames: usize,
}

/// Matrix plus cells that had no evidence and classes left unsupported.
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticalMatrix {
    pub matrix: LikelihoodMatrix,
    /// `(open, class)` cells with a zero denominator in either ratio.
    pub no_evidence: Vec<(usize, usize)>,
    pub empty_columns: Vec<usize>,
}

impl LikelihoodEvidence {
    pub fn new(n_open: usize, n_closed: usize) -> Self {
        Self {
            n_open,
            n_closed,
            cells: vec![EvidenceCell::default(); n_open * n_closed],
        }
    }

    pub fn n_open(&self) -> usize {
        self.n_open
    }

    pub fn n_closed(&self) -> usize {
        self.n_closed
    }

    pub fn cell(&self, open: usize, class: usize) -> &EvidenceCell {
        &self.cells[open * self.n_closed + class]
    }

    pub fn cell_mut(&mut self, open: usize, class: usize) -> &mut EvidenceCell {
        &mut self.cells[open * self.n_closed + class]
    }

    pub fn summarize(frames: &[AnnotatedFrame], n_open: usize, n_closed: usize) -> Result<EvidenceSummary> {
        let mut ev = Self::new(n_open, n_closed);
        let mut skipped = 0;
        for (fi, frame) in frames.iter().enumerate() {
            let Some(gt) = &frame.ground_truth else {
                skipped += 1;
                continue;
            };
            if let Some(o) = frame.prompt.iter().find(|o| **o >= n_open) {
                return Err(Error::InvalidParameter(format!("frame {fi}: prompt label {o} out of range")));
            }
            if let Some(g) = gt.iter().find(|g| g.class >= n_closed) {
                return Err(Error::InvalidParameter(format!("frame {fi}: class {} out of range", g.class)));
            }

            let classes: BTreeSet<usize> = gt.iter().map(|g| g.class).collect();
            for &c in &classes {
                for o in 0..n_open {
                    let cell = ev.cell_mut(o, c);
                    cell.tag_frames += 1;
                    if frame.prompt.contains(&o) {
                        cell.tagged_frames += 1;
                    }
                }
            }

            let mut detected: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
            for d in &frame.detections {
                if let Some(inst) = d.instance {
                    detected.entry(inst).or_default().extend(d.labels.iter().copied());
                }
            }
            for g in gt {
                let labels = detected.get(&g.instance);
                for &o in &frame.prompt {
                    let cell = ev.cell_mut(o, g.class);
                    cell.det_opportunities += 1;
                    if labels.is_some_and(|l| l.contains(&o)) {
                        cell.det_hits += 1;
                    }
                }
            }
        }
        if skipped > 0 {
            warn!("{skipped} frames without ground truth skipped");
        }
        Ok(EvidenceSummary {
            evidence: ev,
            skipped_frames: skipped,
        })
    }

    /// Tagging likelihood, or `None` without evidence.
    pub fn tagging_likelihood(&self, open: usize, class: usize) -> Option<f64> {
        let c = self.cell(open, class);
        (c.tag_frames > 0).then(|| c.tagged_frames as f64 / c.tag_frames as f64)
    }

    /// Detection likelihood, or `None` without evidence.
    pub fn detection_likelihood(&self, open: usize, class: usize) -> Option<f64> {
        let c = self.cell(open, class);
        (c.det_opportunities > 0).then(|| c.det_hits as f64 / c.det_opportunities as f64)
    }

    /// Entry-wise product of tagging and detection likelihoods. Cells without
    /// evidence get zero and are listed; classes with an all-zero column are
    /// reported.
    pub fn build_matrix(&self) -> Result<StatisticalMatrix> {
        let mut data = vec![0.0; self.n_open * self.n_closed];
        let mut no_evidence = Vec::new();
        for o in 0..self.n_open {
            for c in 0..self.n_closed {
                match (self.tagging_likelihood(o, c), self.detection_likelihood(o, c)) {
                    (Some(t), Some(d)) => data[o * self.n_closed + c] = d * t,
                    _ => no_evidence.push((o, c)),
                }
            }
        }
        let matrix = LikelihoodMatrix::new(self.n_open, self.n_closed, data, Provenance::Statistical)?;
        let empty_columns = matrix.empty_columns();
        for c in &empty_columns {
            warn!("class {c} has no supporting open label; it can never be predicted");
        }
        Ok(StatisticalMatrix {
            matrix,
            no_evidence,
            empty_columns,
        })
    }

    /// CSV rows `open_label,class,tag_frames,tagged_frames,det_opportunities,det_hits`.
    pub fn write_csv(&self, path: &Path, space: &LabelSpace) -> Result<()> {
        let ctx = path.display().to_string();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(&ctx, e))?;
        w.write_record([
            "open_label",
            "class",
            "tag_frames",
            "tagged_frames",
            "det_opportunities",
            "det_hits",
        ])
        .map_err(|e| Error::parse(&ctx, e))?;
        for o in 0..self.n_open {
            for c in 0..self.n_closed {
                let cell = self.cell(o, c);
                w.write_record([
                    space.open_set.name(o).to_string(),
                    space.closed_set.name(c).to_string(),
                    cell.tag_frames.to_string(),
                    cell.tagged_frames.to_string(),
                    cell.det_opportunities.to_string(),
                    cell.det_hits.to_string(),
                ])
                .map_err(|e| Error::parse(&ctx, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, space: &LabelSpace) -> Result<Self> {
        let ctx = path.display().to_string();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(file);
        let mut ev = Self::new(space.open_set.len(), space.closed_set.len());
        for row in rdr.records() {
            let row = row.map_err(|e| Error::parse(&ctx, e))?;
            if row.len() != 6 {
                return Err(Error::parse(&ctx, format!("expected 6 columns, got {}", row.len())));
            }
            let o = space
                .open_set
                .index_of(&row[0])
                .ok_or_else(|| Error::parse(&ctx, format!("unknown open label `{}`", &row[0])))?;
            let c = space
                .closed_set
                .index_of(&row[1])
                .ok_or_else(|| Error::parse(&ctx, format!("unknown class `{}`", &row[1])))?;
            let n = |i: usize| -> Result<u64> {
                row[i]
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(&ctx, format!("`{}`: {e}", &row[i])))
            };
            let cell = EvidenceCell {
                tag_frames: n(2)?,
                tagged_frames: n(3)?,
                det_opportunities: n(4)?,
                det_hits: n(5)?,
            };
            if cell.tagged_frames > cell.tag_frames || cell.det_hits > cell.det_opportunities {
                return Err(Error::parse(&ctx, format!("inconsistent counts for ({}, {})", &row[0], &row[1])));
            }
            *ev.cell_mut(o, c) = cell;
        }
        Ok(ev)
    }
}

/// JSON wire form of an annotated log, with labels and classes by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedLogFile {
    pub frames: Vec<AnnotatedFrameJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFrameJson {
    pub prompt: Vec<String>,
    pub ground_truth: Option<Vec<GtObservationJson>>,
    pub detections: Vec<AnnotatedDetectionJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtObservationJson {
    pub instance: u32,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDetectionJson {
    pub labels: Vec<String>,
    pub instance: Option<u32>,
}

impl AnnotatedLogFile {
    pub fn from_frames(frames: &[AnnotatedFrame], space: &LabelSpace) -> Self {
        let open = |i: &usize| space.open_set.name(*i).to_string();
        Self {
            frames: frames
                .iter()
                .map(|f| AnnotatedFrameJson {
                    prompt: f.prompt.iter().map(open).collect(),
                    ground_truth: f.ground_truth.as_ref().map(|gt| {
                        gt.iter()
                            .map(|g| GtObservationJson {
                                instance: g.instance,
                                class: space.closed_set.name(g.class).to_string(),
                            })
                            .collect()
                    }),
                    detections: f
                        .detections
                        .iter()
                        .map(|d| AnnotatedDetectionJson {
                            labels: d.labels.iter().map(open).collect(),
                            instance: d.instance,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn resolve(&self, space: &LabelSpace) -> Result<Vec<AnnotatedFrame>> {
        let open = |n: &String, ctx: String| {
            space
                .open_set
                .index_of(n)
                .ok_or_else(|| Error::parse(ctx, format!("unknown open label `{n}`")))
        };
        self.frames
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                let prompt = f
                    .prompt
                    .iter()
                    .map(|n| open(n, format!("frames[{fi}].prompt")))
                    .collect::<Result<_>>()?;
                let ground_truth = match &f.ground_truth {
                    None => None,
                    Some(gt) => Some(
                        gt.iter()
                            .map(|g| {
                                let class = space.closed_set.index_of(&g.class).ok_or_else(|| {
                                    Error::parse(
                                        format!("frames[{fi}].ground_truth"),
                                        format!("unknown class `{}`", g.class),
                                    )
                                })?;
                                Ok(GtObservation {
                                    instance: g.instance,
                                    class,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    ),
                };
                let detections = f
                    .detections
                    .iter()
                    .map(|d| {
                        Ok(AnnotatedDetection {
                            labels: d
                                .labels
                                .iter()
                                .map(|n| open(n, format!("frames[{fi}].detections")))
                                .collect::<Result<_>>()?,
                            instance: d.instance,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(AnnotatedFrame {
                    prompt,
                    ground_truth,
                    detections,
                })
            })
            .collect()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| Error::parse(format!("{}: {}", path.display(), e.path()), e.into_inner()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("log serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(prompt: &[usize], gt: &[(u32, usize)], dets: &[(&[usize], Option<u32>)]) -> AnnotatedFrame {
        AnnotatedFrame {
            prompt: prompt.iter().copied().collect(),
            ground_truth: Some(
                gt.iter()
                    .map(|(i, c)| GtObservation { instance: *i, class: *c })
                    .collect(),
            ),
            detections: dets
                .iter()
                .map(|(l, i)| AnnotatedDetection {
                    labels: l.iter().copied().collect(),
                    instance: *i,
                })
                .collect(),
        }
    }

    #[test]
    fn tagging_ratio() {
        // 10 frames see a table; 7 prompts contain "table".
        let frames: Vec<_> = (0..10)
            .map(|i| {
                let prompt: &[usize] = if i < 7 { &[0] } else { &[] };
                frame(prompt, &[(1, 0)], &[])
            })
            .collect();
        let s = LikelihoodEvidence::summarize(&frames, 1, 1).unwrap();
        assert_eq!(s.evidence.tagging_likelihood(0, 0), Some(0.7));
    }

    #[test]
    fn zero_opportunity_is_flagged() {
        let frames = vec![frame(&[], &[(1, 0)], &[])];
        let s = LikelihoodEvidence::summarize(&frames, 2, 1).unwrap();
        assert_eq!(s.evidence.detection_likelihood(1, 0), None);
        let m = s.evidence.build_matrix().unwrap();
        assert_eq!(m.matrix.get(1, 0), 0.0);
        assert!(m.no_evidence.contains(&(1, 0)));
        assert_eq!(m.empty_columns, vec![0]);
    }

    #[test]
    fn product_of_ratios() {
        let mut ev = LikelihoodEvidence::new(1, 1);
        *ev.cell_mut(0, 0) = EvidenceCell {
            tag_frames: 10,
            tagged_frames: 7,
            det_opportunities: 4,
            det_hits: 2,
        };
        let m = ev.build_matrix().unwrap();
        assert!((m.matrix.get(0, 0) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn perfect_detector_gives_identity() {
        // Open set equals closed set; every object is tagged and detected correctly.
        let frames = vec![
            frame(&[0, 1], &[(1, 0), (2, 1)], &[(&[0], Some(1)), (&[1], Some(2))]),
            frame(&[0], &[(1, 0)], &[(&[0], Some(1))]),
            frame(&[1], &[(2, 1)], &[(&[1], Some(2))]),
        ];
        let s = LikelihoodEvidence::summarize(&frames, 2, 2).unwrap();
        let m = s.evidence.build_matrix().unwrap().matrix;
        assert_eq!(m.row(0), &[1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn door_seen_as_cabinet_creates_off_diagonal_mass() {
        // open/closed: 0 = cabinet, 1 = door.
        let frames = vec![
            frame(&[0, 1], &[(5, 1)], &[(&[0], Some(5))]),
            frame(&[1], &[(5, 1)], &[(&[1], Some(5))]),
            frame(&[0], &[(6, 0)], &[(&[0], Some(6))]),
        ];
        let m = LikelihoodEvidence::summarize(&frames, 2, 2)
            .unwrap()
            .evidence
            .build_matrix()
            .unwrap()
            .matrix;
        assert!(m.get(0, 1) > 0.0, "cabinet measured on a true door");
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn frames_without_gt_are_skipped() {
        let mut f = frame(&[0], &[], &[]);
        f.ground_truth = None;
        let s = LikelihoodEvidence::summarize(&[f], 1, 1).unwrap();
        assert_eq!(s.skipped_frames, 1);
        assert_eq!(*s.evidence.cell(0, 0), EvidenceCell::default());
    }

    #[test]
    fn csv_round_trip() {
        use crate::detections::LabelList;
        let space = LabelSpace::new(
            LabelList::new(["cabinet", "door"]).unwrap(),
            LabelList::new(["cabinet", "door"]).unwrap(),
        );
        let mut ev = LikelihoodEvidence::new(2, 2);
        *ev.cell_mut(1, 0) = EvidenceCell {
            tag_frames: 9,
            tagged_frames: 3,
            det_opportunities: 3,
            det_hits: 1,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ev.csv");
        ev.write_csv(&p, &space).unwrap();
        assert_eq!(LikelihoodEvidence::read_csv(&p, &space).unwrap(), ev);
    }
}
