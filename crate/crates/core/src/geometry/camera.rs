use nalgebra::{Matrix3, Matrix4, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// A pixel location that lies inside the image bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    /// Column/row of the pixel whose area contains this location.
    pub fn index(&self) -> (usize, usize) {
        ((self.u + 0.5).floor() as usize, (self.v + 0.5).floor() as usize)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidParameter(format!(
                "cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidParameter(format!(
                "cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point. `None` when behind the camera or outside the image.
    pub fn project(&self, p: &Point3<f64>) -> Option<Pixel> {
        if p.z <= 0.0 {
            return None;
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        let px = Pixel { u, v };
        let (col, row) = (u + 0.5, v + 0.5);
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some(px)
    }

    /// Camera-frame point at depth `z` along the ray through pixel (col, row).
    pub fn back_project(&self, col: usize, row: usize, z: f64) -> Point3<f64> {
        Point3::new(
            (col as f64 - self.cx) * z / self.fx,
            (row as f64 - self.cy) * z / self.fy,
            z,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Rigid camera-to-world transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ORTHO_TOL: f64 = 1e-6;

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(err <= ORTHO_TOL) {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthonormal (max deviation {err:e})"
            )));
        }
        let det = rotation.determinant();
        if !((det - 1.0).abs() <= ORTHO_TOL) {
            return Err(Error::InvalidParameter(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a homogeneous 4x4 matrix; the bottom row is ignored.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let r = m.fixed_view::<3, 3>(0, 0).into_owned();
        let t = m.fixed_view::<3, 1>(0, 3).into_owned();
        Self::new(r, t)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Camera at `eye` looking at `target`. Camera axes: x right, y down, z forward.
    pub fn look_at(eye: Point3<f64>, target: Point3<f64>, up: Vector3<f64>) -> Result<Self> {
        let forward = (target - eye).try_normalize(1e-12).ok_or_else(|| {
            Error::InvalidParameter("look_at eye and target coincide".into())
        })?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidParameter("look_at up is parallel to view".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(rotation, eye.coords)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera frame to world frame.
    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// World frame to camera frame.
    pub fn inverse_transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn principal_ray_hits_principal_point() {
        let px = k().project(&Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((px.u, px.v), (320.0, 240.0));
        assert_eq!(px.index(), (320, 240));
    }

    #[test]
    fn pinhole_arithmetic() {
        let px = k().project(&Point3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((px.u - 370.0).abs() < 1e-12);
        assert!((px.v - 240.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_out_of_view() {
        assert!(k().project(&Point3::new(0.0, 0.0, -1.0)).is_none());
        assert!(k().project(&Point3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn outside_image_is_out_of_view() {
        assert!(k().project(&Point3::new(10.0, 0.0, 1.0)).is_none());
        assert!(k().project(&Point3::new(0.0, -10.0, 1.0)).is_none());
    }

    #[test]
    fn back_projection_inverts_projection() {
        let k = k();
        let p = k.back_project(100, 50, 2.5);
        let px = k.project(&p).unwrap();
        assert_eq!(px.index(), (100, 50));
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, -0.5, 4, 4).is_err());
    }

    #[test]
    fn pose_rejects_non_rotation() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(Pose::new(r, Vector3::zeros()).is_err());
        r[(0, 0)] = 1.1;
        assert!(Pose::new(r, Vector3::zeros()).is_err());
    }

    #[test]
    fn look_at_points_z_at_target() {
        let eye = Point3::new(2.0, 0.0, 1.0);
        let target = Point3::new(0.0, 0.0, 0.5);
        let pose = Pose::look_at(eye, target, Vector3::z()).unwrap();
        let in_cam = pose.inverse_transform_point(&target);
        assert!(in_cam.x.abs() < 1e-12 && in_cam.y.abs() < 1e-12);
        assert!((in_cam.z - (target - eye).norm()).abs() < 1e-12);
        let back = pose.transform_point(&in_cam);
        assert!((back - target).norm() < 1e-12);
    }
}
