//! Binary little-endian PLY for labeled point clouds.
//!
//! Vertex layout: `float x, y, z; uchar red, green, blue; uint instance_id;
//! ushort class_id`. Missing attributes are written as zero.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use super::pointcloud::PointCloud;
use crate::error::{Error, Result};

const HEADER_PROPS: &str = "property float x\n\
property float y\n\
property float z\n\
property uchar red\n\
property uchar green\n\
property uchar blue\n\
property uint instance_id\n\
property ushort class_id\n";

const RECORD_BYTES: usize = 4 * 3 + 3 + 4 + 2;

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_ply_to(&mut out, cloud).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ply_to<W: Write>(out: &mut W, cloud: &PointCloud) -> std::io::Result<()> {
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n{}end_header\n",
        cloud.len(),
        HEADER_PROPS
    )?;
    for (i, p) in cloud.points.iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            out.write_all(&(c as f32).to_le_bytes())?;
        }
        let rgb = cloud.colors.as_ref().map_or([0; 3], |c| c[i]);
        out.write_all(&rgb)?;
        let inst = cloud.instance_ids.as_ref().map_or(0, |v| v[i]);
        out.write_all(&inst.to_le_bytes())?;
        let class = cloud.class_ids.as_ref().map_or(0, |v| v[i]);
        out.write_all(&class.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a file produced by [`write_ply`]. Other layouts are rejected.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let ctx = path.display().to_string();

    let mut header = String::new();
    let mut count: Option<usize> = None;
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::parse(&ctx, "unexpected end of header"));
        }
        if let Some(rest) = line.trim().strip_prefix("element vertex ") {
            count = Some(rest.parse().map_err(|e| Error::parse(&ctx, e))?);
        }
        if line.trim() == "end_header" {
            break;
        }
        header.push_str(&line);
    }
    if !header.starts_with("ply\nformat binary_little_endian 1.0\n") || !header.ends_with(HEADER_PROPS) {
        return Err(Error::parse(&ctx, "unsupported PLY layout"));
    }
    let count = count.ok_or_else(|| Error::parse(&ctx, "missing vertex count"))?;

    let mut cloud = PointCloud {
        points: Vec::with_capacity(count),
        colors: Some(Vec::with_capacity(count)),
        instance_ids: Some(Vec::with_capacity(count)),
        class_ids: Some(Vec::with_capacity(count)),
    };
    let mut rec = [0u8; RECORD_BYTES];
    for _ in 0..count {
        reader.read_exact(&mut rec).map_err(|e| Error::io(path, e))?;
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
        cloud.points.push(Point3::new(f(0), f(4), f(8)));
        cloud.colors.as_mut().unwrap().push([rec[12], rec[13], rec[14]]);
        cloud
            .instance_ids
            .as_mut()
            .unwrap()
            .push(u32::from_le_bytes(rec[15..19].try_into().unwrap()));
        cloud
            .class_ids
            .as_mut()
            .unwrap()
            .push(u16::from_le_bytes(rec[19..21].try_into().unwrap()));
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.ply");
        write_ply(&p, &PointCloud::default()).unwrap();
        assert!(read_ply(&p).unwrap().is_empty());
    }

    #[test]
    fn labeled_cloud_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ply");
        let cloud = PointCloud {
            points: vec![Point3::new(0.5, -1.25, 2.0), Point3::new(3.0, 0.0, -0.125)],
            colors: Some(vec![[255, 0, 10], [1, 2, 3]]),
            instance_ids: Some(vec![7, 0]),
            class_ids: Some(vec![3, u16::MAX]),
        };
        write_ply(&p, &cloud).unwrap();
        assert_eq!(read_ply(&p).unwrap(), cloud);
        let len = std::fs::metadata(&p).unwrap().len() as usize;
        let header_len = std::fs::read(&p)
            .unwrap()
            .windows(11)
            .position(|w| w == b"end_header\n")
            .unwrap()
            + 11;
        assert_eq!(len - header_len, 2 * RECORD_BYTES);
    }
}
