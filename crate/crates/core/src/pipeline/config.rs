use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::association::{
    MergeParams, OverlapReading, DEFAULT_INFLATION_SCALE, DEFAULT_MIN_VISIBLE_PIXELS, DEFAULT_TAU_2D,
    DEFAULT_TAU_3D, DEFAULT_TAU_SEM,
};
use crate::detections::DEFAULT_PROMPT_WINDOW;
use crate::error::{Error, Result};
use crate::geometry::DEFAULT_TRUNCATION_VOXELS;
use crate::label_fusion::CombineMode;

pub const DEFAULT_VOXEL_LENGTH: f64 = 0.015;
pub const DEFAULT_DETECTION_STRIDE: u64 = 10;
pub const DEFAULT_MANUAL_LIKELIHOOD: f64 = 0.9;
pub const DEFAULT_PRODUCT_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineKind {
    #[default]
    Sum,
    ProductFloor,
}

/// Run configuration. Read from a flat TOML table; every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub voxel_length: f64,
    pub truncation_voxels: f64,
    /// Depth beyond this range (m) is ignored; zero keeps everything.
    pub max_depth: f64,
    /// Half-width of the instance surface band in voxels.
    pub instance_band_voxels: f64,
    pub detection_stride: u64,
    pub prompt_window: usize,
    pub tau_2d: f64,
    pub tau_sem: f64,
    pub tau_3d: f64,
    pub inflation_scale: f64,
    pub min_visible_pixels: usize,
    pub combine_mode: CombineKind,
    pub product_floor: f64,
    pub overlap_reading: OverlapReading,
    /// Run the merge pass every this many detection frames; zero disables it.
    pub merge_period: u64,
    pub geometry_fusion: bool,
    pub open_labels: Option<PathBuf>,
    pub closed_labels: Option<PathBuf>,
    /// Likelihood matrix CSV. Without it a manual matrix is built.
    pub likelihood_matrix: Option<PathBuf>,
    /// Open-to-closed association CSV for the manual matrix; labels are
    /// matched by name when absent.
    pub hard_association: Option<PathBuf>,
    pub manual_likelihood: f64,
    /// Detector service endpoint; payload files are read when absent.
    pub remote_url: Option<String>,
    pub remote_timeout_ms: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            voxel_length: DEFAULT_VOXEL_LENGTH,
            truncation_voxels: DEFAULT_TRUNCATION_VOXELS,
            max_depth: 0.0,
            instance_band_voxels: 1.0,
            detection_stride: DEFAULT_DETECTION_STRIDE,
            prompt_window: DEFAULT_PROMPT_WINDOW,
            tau_2d: DEFAULT_TAU_2D,
            tau_sem: DEFAULT_TAU_SEM,
            tau_3d: DEFAULT_TAU_3D,
            inflation_scale: DEFAULT_INFLATION_SCALE,
            min_visible_pixels: DEFAULT_MIN_VISIBLE_PIXELS,
            combine_mode: CombineKind::Sum,
            product_floor: DEFAULT_PRODUCT_FLOOR,
            overlap_reading: OverlapReading::Intersection,
            merge_period: 1,
            geometry_fusion: true,
            open_labels: None,
            closed_labels: None,
            likelihood_matrix: None,
            hard_association: None,
            manual_likelihood: DEFAULT_MANUAL_LIKELIHOOD,
            remote_url: None,
            remote_timeout_ms: 5000,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::parse("config", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.message()))?;
        if let Some(base) = path.parent() {
            for p in [
                &mut cfg.open_labels,
                &mut cfg.closed_labels,
                &mut cfg.likelihood_matrix,
                &mut cfg.hard_association,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.voxel_length > 0.0 && self.voxel_length.is_finite()) {
            return bad(format!("voxel_length must be positive, got {}", self.voxel_length));
        }
        if !(self.truncation_voxels >= 1.0) {
            return bad(format!("truncation_voxels must be at least 1, got {}", self.truncation_voxels));
        }
        if !(self.max_depth >= 0.0) {
            return bad(format!("max_depth must be nonnegative, got {}", self.max_depth));
        }
        if !(self.instance_band_voxels > 0.0) {
            return bad(format!("instance_band_voxels must be positive, got {}", self.instance_band_voxels));
        }
        if self.detection_stride == 0 {
            return bad("detection_stride must be at least 1".into());
        }
        for (name, v) in [("tau_2d", self.tau_2d), ("tau_sem", self.tau_sem), ("tau_3d", self.tau_3d)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(self.inflation_scale > 1.0) {
            return bad(format!("inflation_scale must exceed 1, got {}", self.inflation_scale));
        }
        if !(self.product_floor > 0.0) {
            return bad(format!("product_floor must be positive, got {}", self.product_floor));
        }
        if !(self.manual_likelihood > 0.0 && self.manual_likelihood <= 1.0) {
            return bad(format!("manual_likelihood must be in (0, 1], got {}", self.manual_likelihood));
        }
        Ok(())
    }

    pub fn truncation(&self) -> f64 {
        self.truncation_voxels * self.voxel_length
    }

    pub fn instance_band(&self) -> f64 {
        self.instance_band_voxels * self.voxel_length
    }

    pub fn combine(&self) -> CombineMode {
        match self.combine_mode {
            CombineKind::Sum => CombineMode::Sum,
            CombineKind::ProductFloor => CombineMode::ProductFloor {
                floor: self.product_floor,
            },
        }
    }

    pub fn merge_params(&self) -> MergeParams {
        MergeParams {
            tau_sem: self.tau_sem,
            tau_3d: self.tau_3d,
            scale: self.inflation_scale,
            reading: self.overlap_reading,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), c);
    }

    #[test]
    fn flat_keys() {
        let c = PipelineConfig::from_toml_str(
            "voxel_length = 0.02\ndetection_stride = 5\ncombine_mode = \"product_floor\"\noverlap_reading = \"union\"\n",
        )
        .unwrap();
        assert_eq!(c.voxel_length, 0.02);
        assert_eq!(c.detection_stride, 5);
        assert_eq!(c.combine(), CombineMode::ProductFloor { floor: DEFAULT_PRODUCT_FLOOR });
        assert_eq!(c.overlap_reading, OverlapReading::Union);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml_str("voxel_length = 0.0").is_err());
        assert!(PipelineConfig::from_toml_str("detection_stride = 0").is_err());
        assert!(PipelineConfig::from_toml_str("tau_2d = 1.5").is_err());
        assert!(PipelineConfig::from_toml_str("no_such_key = 1").is_err());
        assert!(PipelineConfig::from_toml_str("voxel_length = \"big\"").is_err());
    }

    #[test]
    fn relative_paths_follow_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "likelihood_matrix = \"m.csv\"\n").unwrap();
        let c = PipelineConfig::load(&p).unwrap();
        assert_eq!(c.likelihood_matrix.unwrap(), dir.path().join("m.csv"));
    }
}
