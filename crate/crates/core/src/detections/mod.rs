//! Label spaces, detection payloads and prompt augmentation.

mod labels;
mod prompt;
mod record;
pub mod rle;

pub use labels::{LabelList, LabelSpace};
pub use prompt::{PromptState, DEFAULT_PROMPT_WINDOW};
pub use record::{
    load_detection_file, payload_file_name, read_mask_png, write_mask_png, DetectionFrame,
    DetectionJson, DetectionPayload, DetectionRecord, LabelJson, LabelMeasurement, SkipCounts,
};
pub use rle::{Rle, RleCounts};
