//! Synthetic scenes, views and detector emulation for evaluation.

mod detector;
mod render;
mod scene;

pub use detector::{detect_sequence, planted_annotated_log, NoiseModel, PlantedConfusion, SyntheticDetector};
pub use render::{
    default_trajectory, orbit_trajectory, render_analytic, render_frames, render_view, synthetic_intrinsics, RenderedView,
};
pub use scene::{generate_scene, Aabb, GroundTruthScene, SceneObject, SceneSpec};

use crate::detections::{LabelList, LabelSpace};

/// Class names used by synthetic scenes.
pub const SYNTHETIC_CLASSES: [&str; 8] = ["cabinet", "bed", "chair", "sofa", "table", "door", "bookshelf", "desk"];

/// Open and closed sets both equal to [`SYNTHETIC_CLASSES`].
pub fn synthetic_label_space() -> LabelSpace {
    let list = LabelList::new(SYNTHETIC_CLASSES).expect("distinct names");
    LabelSpace::new(list.clone(), list)
}
