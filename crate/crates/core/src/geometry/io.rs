//! On-disk formats for depth images, poses and intrinsics.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};
use nalgebra::Matrix4;

use super::camera::{CameraIntrinsics, Pose};
use super::image::{ColorImage, DepthImage};
use crate::error::{Error, Result};

/// Reads a 16-bit grayscale PNG in millimeters into meters.
pub fn read_depth_png(path: &Path) -> Result<DepthImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let gray = img.into_luma16();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|mm| mm as f32 / 1000.0).collect();
    DepthImage::new(w as usize, h as usize, data)
}

/// Writes depth in meters as a 16-bit millimeter PNG. Values beyond 65.535 m saturate.
pub fn write_depth_png(path: &Path, depth: &DepthImage) -> Result<()> {
    let raw: Vec<u16> = depth
        .as_slice()
        .iter()
        .map(|m| (m * 1000.0).round().clamp(0.0, u16::MAX as f32) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, raw)
            .expect("buffer length matches dimensions");
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_color_png(path: &Path) -> Result<ColorImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(ColorImage {
        width: w as usize,
        height: h as usize,
        data: rgb.pixels().map(|p| p.0).collect(),
    })
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::parse(path.display().to_string(), format!("`{tok}`: {e}")))
        })
        .collect()
}

/// Parses a row-major 4x4 camera-to-world matrix.
pub fn read_pose(path: &Path) -> Result<Pose> {
    let v = read_numbers(path)?;
    if v.len() != 16 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected 16 numbers, found {}", v.len()),
        ));
    }
    Pose::from_matrix(&Matrix4::from_row_slice(&v))
}

pub fn format_pose(pose: &Pose) -> String {
    let m = pose.to_matrix();
    let mut s = String::new();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{:.17e}", m[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_pose(path: &Path, pose: &Pose) -> Result<()> {
    fs::write(path, format_pose(pose)).map_err(|e| Error::io(path, e))
}

/// Parses `fx fy cx cy width height`.
pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let v = read_numbers(path)?;
    if v.len() != 6 {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected 6 numbers (fx fy cx cy width height), found {}", v.len()),
        ));
    }
    let (w, h) = (v[4], v[5]);
    if w.fract() != 0.0 || h.fract() != 0.0 || w < 1.0 || h < 1.0 {
        return Err(Error::parse(
            path.display().to_string(),
            "width and height must be positive integers",
        ));
    }
    CameraIntrinsics::new(v[0], v[1], v[2], v[3], w as usize, h as usize)
}

pub fn write_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    let s = format!("{} {} {} {} {} {}\n", k.fx, k.fy, k.cx, k.cy, k.width, k.height);
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
