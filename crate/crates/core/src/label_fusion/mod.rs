//! Closed-set label fusion from open-set measurements.

mod belief;
mod evidence;
mod matrix;

pub use belief::{normalized, SemanticBelief};
pub use evidence::{
    AnnotatedDetection, AnnotatedDetectionJson, AnnotatedFrame, AnnotatedFrameJson, AnnotatedLogFile,
    EvidenceCell, EvidenceSummary, GtObservation, GtObservationJson, LikelihoodEvidence, StatisticalMatrix,
};
pub use matrix::{CombineMode, HardAssociation, LikelihoodMatrix, Provenance};

use crate::detections::DetectionRecord;
use crate::error::Result;

/// Counts tagging and detection evidence over an annotated detection log.
pub fn summarize_evidence(frames: &[AnnotatedFrame], n_open: usize, n_closed: usize) -> Result<EvidenceSummary> {
    LikelihoodEvidence::summarize(frames, n_open, n_closed)
}

/// `M[o, c] = detection(o, c) * tagging(o, c)`.
pub fn build_statistical_matrix(evidence: &LikelihoodEvidence) -> Result<StatisticalMatrix> {
    evidence.build_matrix()
}

/// `M[o, assoc(o)] = p0`, zero elsewhere.
pub fn build_manual_matrix(assoc: &HardAssociation, p0: f64) -> Result<LikelihoodMatrix> {
    LikelihoodMatrix::manual(assoc, p0)
}

/// Belief after fusing one detection.
pub fn bayes_update(
    belief: &SemanticBelief,
    det: &DetectionRecord,
    matrix: &LikelihoodMatrix,
    mode: CombineMode,
) -> SemanticBelief {
    let mut b = belief.clone();
    b.update(&matrix.measurement_likelihood(det, mode));
    b
}
