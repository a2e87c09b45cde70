//! Input sequence layout:
//!
//! ```text
//! intrinsic.txt                fx fy cx cy width height
//! depth/frame-{t:06}.png       16-bit depth in millimeters
//! pose/frame-{t:06}.txt        4x4 camera-to-world, row-major
//! color/frame-{t:06}.png       optional
//! prediction/frame-{t:06}.json optional detection payloads
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::io::{
    read_color_png, read_depth_png, read_intrinsics, read_pose, write_depth_png, write_intrinsics, write_pose,
};
use crate::geometry::{CameraIntrinsics, Frame};

pub const INTRINSICS_FILE: &str = "intrinsic.txt";
pub const DEPTH_DIR: &str = "depth";
pub const POSE_DIR: &str = "pose";
pub const COLOR_DIR: &str = "color";
pub const PREDICTION_DIR: &str = "prediction";

pub fn frame_stem(index: u64) -> String {
    format!("frame-{index:06}")
}

fn parse_index(name: &str, ext: &str) -> Option<u64> {
    name.strip_prefix("frame-")?.strip_suffix(ext)?.parse().ok()
}

#[derive(Clone, Debug)]
pub struct SequenceDir {
    root: PathBuf,
    intrinsics: CameraIntrinsics,
    indices: Vec<u64>,
}

impl SequenceDir {
    /// Opens a sequence; frame indices come from the depth directory.
    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "input directory not found"),
            ));
        }
        let intrinsics = read_intrinsics(&root.join(INTRINSICS_FILE))?;
        let depth_dir = root.join(DEPTH_DIR);
        let entries = std::fs::read_dir(&depth_dir).map_err(|e| Error::io(&depth_dir, e))?;
        let mut indices = Vec::new();
        for e in entries {
            let e = e.map_err(|e| Error::io(&depth_dir, e))?;
            if let Some(i) = e.file_name().to_str().and_then(|n| parse_index(n, ".png")) {
                indices.push(i);
            }
        }
        indices.sort_unstable();
        Ok(Self {
            root: root.to_path_buf(),
            intrinsics,
            indices,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn prediction_dir(&self) -> PathBuf {
        self.root.join(PREDICTION_DIR)
    }

    pub fn load_frame(&self, index: u64) -> Result<Frame> {
        let stem = frame_stem(index);
        let depth = read_depth_png(&self.root.join(DEPTH_DIR).join(format!("{stem}.png")))?;
        let pose = read_pose(&self.root.join(POSE_DIR).join(format!("{stem}.txt")))?;
        let color_path = self.root.join(COLOR_DIR).join(format!("{stem}.png"));
        let color = if color_path.is_file() {
            Some(read_color_png(&color_path)?)
        } else {
            None
        };
        Frame::new(index, depth, color, pose, self.intrinsics.clone())
    }

    /// Frames in index order; unreadable frames are yielded as errors.
    pub fn frames(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        self.indices.iter().map(|&i| self.load_frame(i))
    }
}

/// Writes the depth, pose and intrinsics of `frames` in the input layout.
pub fn write_sequence(root: &Path, frames: &[Frame]) -> Result<()> {
    for d in [DEPTH_DIR, POSE_DIR] {
        let p = root.join(d);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    if let Some(f) = frames.first() {
        write_intrinsics(&root.join(INTRINSICS_FILE), &f.intrinsics)?;
    }
    for f in frames {
        let stem = frame_stem(f.index);
        write_depth_png(&root.join(DEPTH_DIR).join(format!("{stem}.png")), &f.depth)?;
        write_pose(&root.join(POSE_DIR).join(format!("{stem}.txt")), &f.pose)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DepthImage, Pose};

    #[test]
    fn round_trip_and_missing_pose() {
        let dir = tempfile::tempdir().unwrap();
        let k = CameraIntrinsics::new(20.0, 20.0, 8.0, 6.0, 16, 12).unwrap();
        let frames: Vec<Frame> = (0..3)
            .map(|i| {
                let depth = DepthImage::new(16, 12, vec![1.25; 192]).unwrap();
                Frame::new(i, depth, None, Pose::identity(), k.clone()).unwrap()
            })
            .collect();
        write_sequence(dir.path(), &frames).unwrap();
        std::fs::remove_file(dir.path().join(POSE_DIR).join("frame-000001.txt")).unwrap();

        let seq = SequenceDir::open(dir.path()).unwrap();
        assert_eq!(seq.indices(), &[0, 1, 2]);
        let loaded: Vec<_> = seq.frames().collect();
        assert!(loaded[1].is_err());
        let f0 = loaded[0].as_ref().unwrap();
        assert_eq!(f0.depth, frames[0].depth);
    }

    #[test]
    fn missing_directory_is_named() {
        let err = SequenceDir::open(Path::new("/no/such/seq")).unwrap_err().to_string();
        assert!(err.contains("/no/such/seq"), "{err}");
    }
}
