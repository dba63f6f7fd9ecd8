//! Rigid transforms, point clouds and sensor-centric polar conversions.
//!
//! All angles handed out by this module are degrees in `[0, 360)`, measured
//! counter-clockwise (right-hand rule about world +Z) from the sensor's
//! horizontal heading.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Minimum length of the optical axis projected onto the XY plane.
pub const HEADING_EPS: f64 = 1e-5;

/// Minimum length of a planar vector accepted by [`signed_azimuth_deg`].
pub const AZIMUTH_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point cloud is already in the world frame")]
    AlreadyWorldFrame,
    #[error("optical axis is near-vertical (horizontal projection {0:.3e}); heading undefined")]
    HeadingDegenerate(f64),
    #[error("azimuth undefined for zero-length vector")]
    ZeroLengthVector,
    #[error("quaternion cannot be normalized (norm {0})")]
    DegenerateQuaternion(f64),
    #[error("pose contains non-finite values")]
    NonFinitePose,
}

/// Which sensor-frame axis the camera looks along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpticalAxis {
    PlusX,
    /// Depth-camera convention: +Z forward, +X right, +Y down.
    #[default]
    PlusZ,
}

impl OpticalAxis {
    pub fn vector(self) -> Vec3 {
        match self {
            OpticalAxis::PlusX => Vec3::x(),
            OpticalAxis::PlusZ => Vec3::z(),
        }
    }

    /// Rotation taking sensor axes to a level world pose looking along +X.
    fn level_base(self) -> UnitQuaternion<f64> {
        match self {
            OpticalAxis::PlusX => UnitQuaternion::identity(),
            OpticalAxis::PlusZ => {
                // columns: images of sensor x (right), y (down), z (forward)
                let m = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
                UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
            }
        }
    }
}

/// Sensor pose in the world: `p_world = rotation * p_sensor + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_parts(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    /// Builds a pose from a raw (w, x, y, z) quaternion, normalizing it.
    pub fn from_raw(
        translation: Vec3,
        w: f64,
        x: f64,
        y: f64,
        z: f64,
    ) -> Result<Self, GeometryError> {
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeometryError::DegenerateQuaternion(norm));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinitePose);
        }
        Ok(Self {
            translation,
            rotation: UnitQuaternion::from_quaternion(q),
        })
    }

    /// A level sensor at `position` whose optical axis points along world
    /// yaw `yaw_deg` (counter-clockwise from +X).
    pub fn level(position: Vec3, yaw_deg: f64, axis: OpticalAxis) -> Self {
        let yaw = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw_deg.to_radians());
        Self {
            translation: position,
            rotation: yaw * axis.level_base(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation * other.translation + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Sensor,
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn sensor(points: Vec<Vec3>) -> Self {
        Self::new(points, Frame::Sensor)
    }

    pub fn world(points: Vec<Vec3>) -> Self {
        Self::new(points, Frame::World)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Applies `pose` to a sensor-frame cloud.
pub fn transform_to_world(pose: &Pose, cloud: &PointCloud) -> Result<PointCloud, GeometryError> {
    if cloud.frame == Frame::World {
        return Err(GeometryError::AlreadyWorldFrame);
    }
    if !pose.is_finite() {
        return Err(GeometryError::NonFinitePose);
    }
    let points = cloud
        .points
        .iter()
        .map(|p| pose.transform_point(p))
        .collect();
    Ok(PointCloud::world(points))
}

/// The optical axis projected onto the world XY plane, normalized.
pub fn sensor_heading_2d(pose: &Pose, axis: OpticalAxis) -> Result<Vec2, GeometryError> {
    let forward = pose.rotation * axis.vector();
    let planar = Vec2::new(forward.x, forward.y);
    let len = planar.norm();
    if !(len > HEADING_EPS) {
        return Err(GeometryError::HeadingDegenerate(len));
    }
    Ok(planar / len)
}

/// Counter-clockwise angle from `heading` to `to_point`, in `[0, 360)`.
pub fn signed_azimuth_deg(heading: &Vec2, to_point: &Vec2) -> Result<f64, GeometryError> {
    if !(to_point.norm() > AZIMUTH_EPS) {
        return Err(GeometryError::ZeroLengthVector);
    }
    let cross = heading.x * to_point.y - heading.y * to_point.x;
    let dot = heading.dot(to_point);
    Ok(wrap_degrees(cross.atan2(dot).to_degrees()))
}

/// Maps any finite angle into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid of a tiny negative value rounds up to exactly 360
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Maps an angle difference into `(-180, 180]`.
pub fn wrap_signed_degrees(deg: f64) -> f64 {
    let w = wrap_degrees(deg);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Sensor-centric polar coordinates of a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoord {
    pub azimuth_deg: f64,
    pub range_m: f64,
    pub elevation_m: f64,
}

impl PolarCoord {
    pub fn of(center: &Vec3, heading: &Vec2, p: &Vec3) -> Result<Self, GeometryError> {
        let rel = Vec2::new(p.x - center.x, p.y - center.y);
        Ok(Self {
            azimuth_deg: signed_azimuth_deg(heading, &rel)?,
            range_m: rel.norm(),
            elevation_m: p.z - center.z,
        })
    }
}

/// Unit planar direction at `azimuth_deg` counter-clockwise from `heading`.
pub fn direction_at(heading: &Vec2, azimuth_deg: f64) -> Vec2 {
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    Vec2::new(c * heading.x - s * heading.y, s * heading.x + c * heading.y)
}
