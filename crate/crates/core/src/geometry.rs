//! Rigid transforms and ideal pinhole projection.
//!
//! Poses stored in a [`Sequence`](crate::Sequence) are camera-to-world. The
//! transform that carries points from one frame's camera coordinates into
//! another's is derived with [`relative_transform`], and [`project`] maps the
//! result onto the reference image plane.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Elementwise tolerance for `RᵀR = I` and `det R = 1`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Default near-plane cutoff in meters.
pub const DEFAULT_Z_MIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Pinhole intrinsics `K` plus the image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
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

    pub fn validate(&self) -> Result<(), GeometryError> {
        if ![self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeometryError::InvalidIntrinsics(
                "non-finite parameter".into(),
            ));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "image size must be positive ({}x{})",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }
}

/// Continuous image coordinates in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

/// The point lies at or behind the near plane.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("point at depth {depth} is behind the camera (z_min {z_min})")]
pub struct BehindCamera {
    pub depth: f64,
    pub z_min: f64,
}

/// Projects a camera-frame point. Pixels outside the image are returned as is.
pub fn project(k: &CameraIntrinsics, p: &Point3, z_min: f64) -> Result<Pixel, BehindCamera> {
    // NaN depth compares false, so it is rejected as well.
    if !(p.z > z_min) {
        return Err(BehindCamera { depth: p.z, z_min });
    }
    Ok(Pixel {
        u: k.fx * p.x / p.z + k.cx,
        v: k.fy * p.y / p.z + k.cy,
    })
}

/// A proper rigid motion `X ↦ R·X + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidTransform(
                "non-finite translation".into(),
            ));
        }
        check_rotation(&rotation)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds from nine row-major rotation entries and a translation.
    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(
            Mat3::from_row_slice(&rotation),
            Vec3::from_column_slice(&translation),
        )
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::new(x, y, z),
        }
    }

    /// Rotation by `angle` radians about `axis` (which need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(axis);
        Self {
            rotation: *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix(),
            translation: Vec3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Largest elementwise deviation of `RᵀR` from identity, or of `det R` from 1.
    pub fn orthonormality_drift(&self) -> f64 {
        rotation_drift(&self.rotation)
    }
}

fn rotation_drift(r: &Mat3) -> f64 {
    let gram = r.transpose() * r - Mat3::identity();
    let elem = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    elem.max((r.determinant() - 1.0).abs())
}

fn check_rotation(r: &Mat3) -> Result<(), GeometryError> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::InvalidTransform("non-finite rotation".into()));
    }
    let drift = rotation_drift(r);
    // Negated so that a NaN drift is also rejected.
    if !(drift <= ORTHONORMAL_TOL) {
        return Err(GeometryError::InvalidTransform(format!(
            "rotation is not orthonormal with det 1 (drift {drift:e})"
        )));
    }
    Ok(())
}

/// Nearest rotation in the Frobenius sense.
fn reorthonormalize(r: &Mat3) -> Mat3 {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut fixed = u * v_t;
    if fixed.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        fixed = u * v_t;
    }
    fixed
}

/// `compose(a, b)(X) = a(b(X))`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> Result<RigidTransform, GeometryError> {
    check_rotation(&a.rotation)?;
    check_rotation(&b.rotation)?;
    let mut rotation = a.rotation * b.rotation;
    if rotation_drift(&rotation) > ORTHONORMAL_TOL {
        rotation = reorthonormalize(&rotation);
    }
    Ok(RigidTransform {
        rotation,
        translation: a.rotation * b.translation + a.translation,
    })
}

pub fn invert(t: &RigidTransform) -> Result<RigidTransform, GeometryError> {
    check_rotation(&t.rotation)?;
    let rt = t.rotation.transpose();
    Ok(RigidTransform {
        rotation: rt,
        translation: -(rt * t.translation),
    })
}

/// Maps points from the camera frame of `pose_src` into the camera frame of
/// `pose_dst`, given both camera-to-world poses.
pub fn relative_transform(
    pose_src: &RigidTransform,
    pose_dst: &RigidTransform,
) -> Result<RigidTransform, GeometryError> {
    if pose_src == pose_dst {
        check_rotation(&pose_src.rotation)?;
        // Exact identity, so a frame's own observations project bit-identically.
        return Ok(RigidTransform::identity());
    }
    compose(&invert(pose_dst)?, pose_src)
}
