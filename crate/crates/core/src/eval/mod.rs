//! Semantic-instance evaluation and the Cluster-All baseline.

mod ap;
mod cluster;
mod files;

pub use ap::{average_precision, class_accuracy, evaluate_ap, instance_iou_3d, ApReport, GtInstance, InstancePrediction};
pub use cluster::{cluster_all, cluster_indices};
pub use files::{
    group_ground_truth, predictions_from_cloud, read_labeled_points, write_labeled_points, LabeledPoint, GROUND_TRUTH_FILE, NO_CLASS,
};
