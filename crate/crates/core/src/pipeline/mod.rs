//! Sequence orchestration, configuration, detector sources and export.

mod config;
mod export;
mod model;
mod run;
mod sequence;
mod source;

pub use config::{
    CombineKind, PipelineConfig, DEFAULT_DETECTION_STRIDE, DEFAULT_MANUAL_LIKELIHOOD, DEFAULT_PRODUCT_FLOOR,
    DEFAULT_VOXEL_LENGTH,
};
pub use export::{
    export_map, instance_records, label_points, load_predictions, read_instances, read_report, InstanceRecord,
    InstancesFile, CLOUD_FILE, EVENTS_FILE, INSTANCES_FILE, REPORT_FILE,
};
pub use model::{FusionModel, CLOSED_LABELS_FILE, OPEN_LABELS_FILE};
pub use run::{run_sequence, DetectionFrameTiming, RunOutput, RunReport, StageSummary};
pub use sequence::{
    frame_stem, write_sequence, SequenceDir, COLOR_DIR, DEPTH_DIR, INTRINSICS_FILE, POSE_DIR, PREDICTION_DIR,
};
#[cfg(feature = "remote")]
pub use source::RemoteSource;
pub use source::{DetectorSource, DirectorySource, MemorySource};
