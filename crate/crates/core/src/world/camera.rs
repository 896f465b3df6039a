use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("point projects outside the image at ({u:.1}, {v:.1})")]
    OutOfView { u: f64, v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |m: &str| Err(CameraError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return bad("principal point outside the image");
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Pixel coordinates plus metric depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(p: [f64; 3]) -> Self {
        Self::new(p[0], p[1], p[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    fn vec(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    fn from_vec(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(self, other: WorldPoint) -> f64 {
        (self.vec() - other.vec()).norm()
    }
}

/// Deprojects a pixel with depth into the camera frame.
pub fn pixel_to_real(p: PixelCoord, k: &CameraIntrinsics) -> Result<WorldPoint, CameraError> {
    k.validate()?;
    if !(p.depth > 0.0) {
        return Err(CameraError::NonPositiveDepth(p.depth));
    }
    Ok(WorldPoint::new(
        (p.u - k.cx) * p.depth / k.fx,
        (p.v - k.cy) * p.depth / k.fy,
        p.depth,
    ))
}

/// Projects a camera-frame point onto the image. The inverse of [`pixel_to_real`].
pub fn project(p: WorldPoint, k: &CameraIntrinsics) -> Result<PixelCoord, CameraError> {
    if !(p.z > 0.0) {
        return Err(CameraError::NonPositiveDepth(p.z));
    }
    let h = k.matrix() * p.vec();
    Ok(PixelCoord {
        u: h.x / h.z,
        v: h.y / h.z,
        depth: p.z,
    })
}

/// Camera pose in the world frame. `rotation` maps camera axes to world axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrinsic {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Default for Extrinsic {
    /// Overhead camera 0.8 m above the table centre, looking straight down,
    /// image u along world x and image v toward the viewer.
    fn default() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
            translation: [0.0, 0.4, 0.8],
        }
    }
}

impl Extrinsic {
    fn rot(&self) -> Matrix3<f64> {
        let r = self.rotation;
        Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        )
    }

    pub fn camera_to_world(&self, p: WorldPoint) -> WorldPoint {
        WorldPoint::from_vec(self.rot() * p.vec() + Vector3::from(self.translation))
    }

    pub fn world_to_camera(&self, p: WorldPoint) -> WorldPoint {
        WorldPoint::from_vec(self.rot().transpose() * (p.vec() - Vector3::from(self.translation)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Camera {
    #[serde(default)]
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub extrinsic: Extrinsic,
}

impl Camera {
    /// World point to pixel, rejecting points behind the camera or off-image.
    pub fn observe(&self, p: WorldPoint) -> Result<PixelCoord, CameraError> {
        let px = project(self.extrinsic.world_to_camera(p), &self.intrinsics)?;
        let k = &self.intrinsics;
        if !(0.0..k.width as f64).contains(&px.u) || !(0.0..k.height as f64).contains(&px.v) {
            return Err(CameraError::OutOfView { u: px.u, v: px.v });
        }
        Ok(px)
    }

    pub fn recover(&self, p: PixelCoord) -> Result<WorldPoint, CameraError> {
        pixel_to_real(p, &self.intrinsics).map(|c| self.extrinsic.camera_to_world(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn principal_point_is_on_axis() {
        let k = CameraIntrinsics::default();
        let p = pixel_to_real(PixelCoord { u: 320.0, v: 240.0, depth: 0.8 }, &k).unwrap();
        assert_eq!(p, WorldPoint::new(0.0, 0.0, 0.8));
    }

    #[test]
    fn off_axis_pixel() {
        let k = CameraIntrinsics::default();
        let p = pixel_to_real(PixelCoord { u: 920.0, v: 240.0, depth: 1.0 }, &k).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_depth_is_rejected() {
        let k = CameraIntrinsics::default();
        let err = pixel_to_real(PixelCoord { u: 1.0, v: 1.0, depth: 0.0 }, &k).unwrap_err();
        assert_eq!(err, CameraError::NonPositiveDepth(0.0));
    }

    #[test]
    fn bad_intrinsics() {
        let k = CameraIntrinsics { fx: 0.0, ..Default::default() };
        assert!(k.validate().is_err());
        let k = CameraIntrinsics { cx: 640.0, ..Default::default() };
        assert!(k.validate().is_err());
    }

    #[test]
    fn world_round_trip() {
        let cam = Camera::default();
        let p = WorldPoint::new(0.13, 0.52, 0.025);
        let back = cam.recover(cam.observe(p).unwrap()).unwrap();
        assert!(back.distance(p) < 1e-12);
    }

    #[test]
    fn table_centre_projects_to_principal_point() {
        let px = Camera::default().observe(WorldPoint::new(0.0, 0.4, 0.0)).unwrap();
        assert_abs_diff_eq!(px.u, 320.0, epsilon = 1e-9);
        assert_abs_diff_eq!(px.v, 240.0, epsilon = 1e-9);
        assert_abs_diff_eq!(px.depth, 0.8, epsilon = 1e-12);
    }
}
