//! Data association, instance creation, merging and geometry refinement.

mod associate;
mod instance;
mod log;
mod refine;

pub use associate::{
    apply_frame, associate, mask_iou, visible_instances, AssociationResult, FrameUpdate, Match,
    DEFAULT_MIN_VISIBLE_PIXELS, DEFAULT_TAU_2D,
};
pub use instance::{Instance, InstanceMap};
pub use log::{append_event_log, MapEvent, MapEventKind};
pub use refine::{
    instance_geometry_fusion, merge_pass, semantic_similarity, volumetric_overlap, MergeParams, OverlapReading,
    DEFAULT_INFLATION_SCALE, DEFAULT_TAU_3D, DEFAULT_TAU_SEM,
};
