use nalgebra::Point3;

use super::camera::{CameraIntrinsics, Pose};
use super::image::{ColorImage, DepthImage};
use crate::error::{Error, Result};

/// One RGB-D observation with its camera-to-world pose.
#[derive(Clone, Debug)]
pub struct Frame {
    pub index: u64,
    pub depth: DepthImage,
    pub color: Option<ColorImage>,
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
}

impl Frame {
    pub fn new(
        index: u64,
        depth: DepthImage,
        color: Option<ColorImage>,
        pose: Pose,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self> {
        let frame = Self {
            index,
            depth,
            color,
            pose,
            intrinsics,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        if self.depth.width() != w || self.depth.height() != h {
            return Err(Error::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                got_w: self.depth.width(),
                got_h: self.depth.height(),
            });
        }
        if let Some(color) = &self.color {
            if color.width != w || color.height != h {
                return Err(Error::DimensionMismatch {
                    expected_w: w,
                    expected_h: h,
                    got_w: color.width,
                    got_h: color.height,
                });
            }
        }
        Ok(())
    }

    /// World-frame surface point observed at pixel (col, row), if its depth is valid.
    #[inline]
    pub fn surface_point(&self, col: usize, row: usize) -> Option<Point3<f64>> {
        let d = self.depth.get(col, row);
        if d > 0.0 {
            let p = self.intrinsics.back_project(col, row, d as f64);
            Some(self.pose.transform_point(&p))
        } else {
            None
        }
    }

    /// Zeroes depth beyond `max_depth` meters.
    pub fn clip_depth(&mut self, max_depth: f64) {
        if !max_depth.is_finite() {
            return;
        }
        let data: Vec<f32> = self
            .depth
            .as_slice()
            .iter()
            .map(|d| if (*d as f64) > max_depth { 0.0 } else { *d })
            .collect();
        self.depth = DepthImage::new(self.depth.width(), self.depth.height(), data)
            .expect("clipping preserves validity");
    }
}
