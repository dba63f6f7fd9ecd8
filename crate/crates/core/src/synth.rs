//! Synthetic rooms with box and vertical-cylinder obstacles, a pinhole depth
//! camera, and closed-form ground-truth rasters.
//!
//! Scenes are JSON:
//!
//! ```json
//! {"room": {"origin": [0, 0, 0], "size": [4, 4, 2.5]},
//!  "obstacles": [
//!    {"kind": "box", "min": [1, 3, 0], "size": [0.5, 0.5, 1]},
//!    {"kind": "cylinder", "base": [3, 1, 0], "radius": 0.3, "height": 1.5,
//!     "keyframes": [{"frame": 0, "at": [3, 1, 0]}, {"frame": 40, "at": [3, 3, 0]}],
//!     "vanish_at": 60}]}
//! ```
//!
//! `min` and `base` give the obstacle's lower corner or base center; keyframes
//! move that anchor piecewise-linearly in frame index and hold the end values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{direction_at, sensor_heading_2d, OpticalAxis, PointCloud, Pose, Vec2, Vec3};
use crate::raster::{CircularRaster, CylindricalRaster, RasterError, RasterParams, CIRCLE_BINS};

/// Slack for containment checks of hand-written scene coordinates.
const CONTAIN_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("obstacle {index} leaves the room at frame {frame}")]
    ObstacleOutsideRoom { index: usize, frame: usize },
    #[error("sensor at ({x:.3}, {y:.3}, {z:.3}) is outside the room")]
    PoseOutsideRoom { x: f64, y: f64, z: f64 },
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    #[serde(default)]
    pub origin: [f64; 3],
    pub size: [f64; 3],
}

impl Room {
    pub fn min(&self) -> Vec3 {
        Vec3::from(self.origin)
    }

    pub fn max(&self) -> Vec3 {
        Vec3::from(self.origin) + Vec3::from(self.size)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|k| p[k] > lo[k] && p[k] < hi[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: usize,
    pub at: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box {
        min: [f64; 3],
        size: [f64; 3],
    },
    Cylinder {
        base: [f64; 3],
        radius: f64,
        height: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<Keyframe>,
    /// First frame in which the obstacle exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appear_at: Option<usize>,
    /// First frame in which the obstacle no longer exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vanish_at: Option<usize>,
}

/// A primitive at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placed {
    Box {
        min: Vec3,
        max: Vec3,
    },
    Cylinder {
        center: Vec2,
        radius: f64,
        z0: f64,
        z1: f64,
    },
}

impl Placed {
    fn z_range(&self) -> (f64, f64) {
        match *self {
            Placed::Box { min, max } => (min.z, max.z),
            Placed::Cylinder { z0, z1, .. } => (z0, z1),
        }
    }
}

impl Obstacle {
    pub fn exists_at(&self, frame: usize) -> bool {
        self.appear_at.is_none_or(|a| frame >= a) && self.vanish_at.is_none_or(|v| frame < v)
    }

    fn anchor(&self) -> Vec3 {
        match &self.shape {
            Shape::Box { min, .. } => Vec3::from(*min),
            Shape::Cylinder { base, .. } => Vec3::from(*base),
        }
    }

    /// Anchor position at `frame` from the keyframes, or the static anchor.
    pub fn anchor_at(&self, frame: usize) -> Vec3 {
        let k = &self.keyframes;
        if k.is_empty() {
            return self.anchor();
        }
        if frame <= k[0].frame {
            return Vec3::from(k[0].at);
        }
        for w in k.windows(2) {
            if frame <= w[1].frame {
                let t = (frame - w[0].frame) as f64 / (w[1].frame - w[0].frame) as f64;
                return Vec3::from(w[0].at) * (1.0 - t) + Vec3::from(w[1].at) * t;
            }
        }
        Vec3::from(k[k.len() - 1].at)
    }

    fn place(&self, anchor: Vec3) -> Placed {
        match &self.shape {
            Shape::Box { size, .. } => Placed::Box {
                min: anchor,
                max: anchor + Vec3::from(*size),
            },
            Shape::Cylinder { radius, height, .. } => Placed::Cylinder {
                center: Vec2::new(anchor.x, anchor.y),
                radius: *radius,
                z0: anchor.z,
                z1: anchor.z + height,
            },
        }
    }

    pub fn placed_at(&self, frame: usize) -> Option<Placed> {
        self.exists_at(frame)
            .then(|| self.place(self.anchor_at(frame)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: Room,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let scene: SceneSpec = serde_json::from_str(text).map_err(|e| {
            SynthError::InvalidScene(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidScene(m));
        if !self.room.size.iter().all(|s| s.is_finite() && *s > 0.0)
            || !self.room.origin.iter().all(|v| v.is_finite())
        {
            return bad("room size must be positive and finite".into());
        }
        let (lo, hi) = (self.room.min(), self.room.max());
        for (index, o) in self.obstacles.iter().enumerate() {
            match &o.shape {
                Shape::Box { size, .. } if !size.iter().all(|s| s.is_finite() && *s > 0.0) => {
                    return bad(format!("obstacle {index}: box size must be positive"));
                }
                Shape::Cylinder { radius, height, .. } if !(*radius > 0.0 && *height > 0.0) => {
                    return bad(format!(
                        "obstacle {index}: cylinder radius and height must be positive"
                    ));
                }
                _ => {}
            }
            if o.keyframes.windows(2).any(|w| w[1].frame <= w[0].frame) {
                return bad(format!("obstacle {index}: keyframe frames must increase"));
            }
            let mut frames: Vec<usize> = o.keyframes.iter().map(|k| k.frame).collect();
            if frames.is_empty() {
                frames.push(0);
            }
            // the room is convex, so checking the keyframes covers the segments
            for frame in frames {
                let inside = match o.place(o.anchor_at(frame)) {
                    Placed::Box { min, max } => (0..3)
                        .all(|k| min[k] >= lo[k] - CONTAIN_EPS && max[k] <= hi[k] + CONTAIN_EPS),
                    Placed::Cylinder {
                        center,
                        radius,
                        z0,
                        z1,
                    } => {
                        center.x - radius >= lo.x - CONTAIN_EPS
                            && center.x + radius <= hi.x + CONTAIN_EPS
                            && center.y - radius >= lo.y - CONTAIN_EPS
                            && center.y + radius <= hi.y + CONTAIN_EPS
                            && z0 >= lo.z - CONTAIN_EPS
                            && z1 <= hi.z + CONTAIN_EPS
                    }
                };
                if !inside {
                    return Err(SynthError::ObstacleOutsideRoom { index, frame });
                }
            }
        }
        Ok(())
    }

    pub fn placed_at(&self, frame: usize) -> Vec<Placed> {
        self.obstacles
            .iter()
            .filter_map(|o| o.placed_at(frame))
            .collect()
    }

    fn check_inside(&self, p: &Vec3) -> Result<(), SynthError> {
        if self.room.contains(p) {
            Ok(())
        } else {
            Err(SynthError::PoseOutsideRoom {
                x: p.x,
                y: p.y,
                z: p.z,
            })
        }
    }
}

/// Distance to the first hit of the ray `o + t d` (t > 0) with a box, from outside.
fn ray_box(o: &Vec3, d: &Vec3, min: &Vec3, max: &Vec3) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < min[k] || o[k] > max[k] {
                return None;
            }
            continue;
        }
        let a = (min[k] - o[k]) / d[k];
        let b = (max[k] - o[k]) / d[k];
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// Exit distance of a ray starting inside a box.
fn ray_exit(o: &Vec3, d: &Vec3, min: &Vec3, max: &Vec3) -> f64 {
    let mut t = f64::INFINITY;
    for k in 0..3 {
        if d[k] > 0.0 {
            t = t.min((max[k] - o[k]) / d[k]);
        } else if d[k] < 0.0 {
            t = t.min((min[k] - o[k]) / d[k]);
        }
    }
    t
}

/// First hit of a ray with a closed vertical cylinder (side and caps).
fn ray_cylinder(o: &Vec3, d: &Vec3, center: &Vec2, radius: f64, z0: f64, z1: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let (ox, oy) = (o.x - center.x, o.y - center.y);
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = 2.0 * (ox * d.x + oy * d.y);
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let z = o.z + t * d.z;
                if z >= z0 && z <= z1 {
                    consider(t);
                }
            }
        }
    }
    if d.z != 0.0 {
        for zc in [z0, z1] {
            let t = (zc - o.z) / d.z;
            let (x, y) = (ox + t * d.x, oy + t * d.y);
            if x * x + y * y <= radius * radius {
                consider(t);
            }
        }
    }
    best
}

fn ray_placed(o: &Vec3, d: &Vec3, p: &Placed) -> Option<f64> {
    match p {
        Placed::Box { min, max } => ray_box(o, d, min, max),
        Placed::Cylinder {
            center,
            radius,
            z0,
            z1,
        } => ray_cylinder(o, d, center, *radius, *z0, *z1),
    }
}

/// Nearest surface along a 3D ray: obstacles or the room shell.
pub fn cast_ray(scene: &SceneSpec, frame: usize, o: &Vec3, d: &Vec3) -> f64 {
    cast_among(&scene.room, &scene.placed_at(frame), o, d, |_| true)
}

fn cast_among(
    room: &Room,
    placed: &[Placed],
    o: &Vec3,
    d: &Vec3,
    keep: impl Fn(&Placed) -> bool,
) -> f64 {
    let mut t = ray_exit(o, d, &room.min(), &room.max());
    for p in placed.iter().filter(|p| keep(p)) {
        if let Some(h) = ray_placed(o, d, p) {
            t = t.min(h);
        }
    }
    t
}

/// Ground-truth circle: a horizontal ray along each bin's lower-edge bearing,
/// against every primitive that reaches into the circle's height band.
pub fn analytic_circle(
    scene: &SceneSpec,
    pose: &Pose,
    params: &RasterParams,
    frame: usize,
) -> Result<CircularRaster, SynthError> {
    params.validate()?;
    scene.check_inside(&pose.translation)?;
    let heading = sensor_heading_2d(pose, params.optical_axis).map_err(RasterError::from)?;
    let center = pose.translation;
    let floor = params.floor_z(center.z);
    let (band_lo, band_hi) = (floor + params.ground_band, floor + params.height_cap);
    let placed = scene.placed_at(frame);
    let in_band = |p: &Placed| {
        let (z0, z1) = p.z_range();
        z1 > band_lo && z0 <= band_hi
    };
    let mut raster = CircularRaster::unknown(center, heading);
    for (k, bin) in raster.bins.iter_mut().enumerate() {
        let dir2 = direction_at(&heading, k as f64);
        let d = Vec3::new(dir2.x, dir2.y, 0.0);
        // cast at a height strictly inside every relevant primitive's z span
        let t = planar_cast(&scene.room, &placed, &center, &d, &in_band);
        if t <= params.r_max {
            *bin = Some(t);
        }
    }
    Ok(raster)
}

/// Horizontal cast that ignores heights: primitives are treated as infinite
/// vertical prisms of their footprint.
fn planar_cast(
    room: &Room,
    placed: &[Placed],
    o: &Vec3,
    d: &Vec3,
    keep: &impl Fn(&Placed) -> bool,
) -> f64 {
    let flat = |p: &Placed| match *p {
        Placed::Box { min, max } => Placed::Box {
            min: Vec3::new(min.x, min.y, f64::NEG_INFINITY),
            max: Vec3::new(max.x, max.y, f64::INFINITY),
        },
        Placed::Cylinder { center, radius, .. } => Placed::Cylinder {
            center,
            radius,
            z0: f64::NEG_INFINITY,
            z1: f64::INFINITY,
        },
    };
    let flat_room = Room {
        origin: [room.origin[0], room.origin[1], f64::MIN],
        size: [room.size[0], room.size[1], f64::INFINITY],
    };
    let kept: Vec<Placed> = placed.iter().filter(|p| keep(p)).map(flat).collect();
    cast_among(&flat_room, &kept, o, d, |_| true)
}

/// Ground-truth cylinder: a horizontal ray per (bin, row center) against the
/// primitives whose vertical span contains the row center.
pub fn analytic_cylinder(
    scene: &SceneSpec,
    pose: &Pose,
    params: &RasterParams,
    frame: usize,
) -> Result<CylindricalRaster, SynthError> {
    params.validate()?;
    scene.check_inside(&pose.translation)?;
    let heading = sensor_heading_2d(pose, params.optical_axis).map_err(RasterError::from)?;
    let center = pose.translation;
    let base = params.cylinder_base_z(center.z);
    let placed = scene.placed_at(frame);
    let (room_lo, room_hi) = (scene.room.min().z, scene.room.max().z);
    let mut raster = CylindricalRaster::unknown(center, heading, params.elevation_rows);
    for row in 0..params.elevation_rows {
        let z = base + params.row_center(row);
        // walls only exist between floor and ceiling
        if z < room_lo || z > room_hi {
            continue;
        }
        let contains = |p: &Placed| {
            let (z0, z1) = p.z_range();
            z >= z0 && z <= z1
        };
        let o = Vec3::new(center.x, center.y, z);
        for col in 0..CIRCLE_BINS {
            let dir2 = direction_at(&heading, col as f64);
            let d = Vec3::new(dir2.x, dir2.y, 0.0);
            let t = planar_cast(&scene.room, &placed, &o, &d, &contains);
            if t <= params.r_max {
                raster.set(col, row, Some(t));
            }
        }
    }
    Ok(raster)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub cols: usize,
    pub rows: usize,
    pub max_depth: f64,
    /// Standard deviation of Gaussian noise added to each ray length.
    pub noise_sigma: f64,
    pub optical_axis: OpticalAxis,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            hfov_deg: 90.0,
            vfov_deg: 60.0,
            cols: 160,
            rows: 120,
            max_depth: 10.0,
            noise_sigma: 0.0,
            optical_axis: OpticalAxis::PlusZ,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fov_ok = |f: f64| f > 0.0 && f < 180.0;
        if !fov_ok(self.hfov_deg) || !fov_ok(self.vfov_deg) {
            return Err(SynthError::InvalidCamera(
                "fields of view must be in (0, 180)",
            ));
        }
        if self.cols == 0 || self.rows == 0 {
            return Err(SynthError::InvalidCamera("need at least one pixel"));
        }
        if !(self.max_depth > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidCamera(
                "max_depth must be positive and noise non-negative",
            ));
        }
        Ok(())
    }

    /// Unit sensor-frame ray of each pixel, row-major. Pixel centers are spread
    /// uniformly on the pinhole image plane.
    pub fn pixel_rays(&self) -> Vec<Vec3> {
        let th = (self.hfov_deg.to_radians() / 2.0).tan();
        let tv = (self.vfov_deg.to_radians() / 2.0).tan();
        let mut rays = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            let down = tv * (2.0 * (r as f64 + 0.5) / self.rows as f64 - 1.0);
            for c in 0..self.cols {
                let right = th * (2.0 * (c as f64 + 0.5) / self.cols as f64 - 1.0);
                let v = match self.optical_axis {
                    OpticalAxis::PlusZ => Vec3::new(right, down, 1.0),
                    OpticalAxis::PlusX => Vec3::new(1.0, -right, -down),
                };
                rays.push(v.normalize());
            }
        }
        rays
    }
}

/// Renders one sensor-frame depth frame, row-major, dropping misses and
/// returns beyond `max_depth`. Noise is drawn from `rng` only when
/// `noise_sigma > 0`.
pub fn render_depth_frame(
    scene: &SceneSpec,
    pose: &Pose,
    camera: &CameraModel,
    frame: usize,
    rng: &mut impl Rng,
) -> Result<PointCloud, SynthError> {
    camera.validate()?;
    scene.check_inside(&pose.translation)?;
    let noise = (camera.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, camera.noise_sigma).expect("sigma checked"));
    let placed = scene.placed_at(frame);
    let o = pose.translation;
    let mut points = Vec::new();
    for ray in camera.pixel_rays() {
        let d = pose.rotation * ray;
        let mut t = cast_among(&scene.room, &placed, &o, &d, |_| true);
        if let Some(n) = &noise {
            t += n.sample(rng);
        }
        if t.is_finite() && t > 0.0 && t <= camera.max_depth {
            points.push(ray * t);
        }
    }
    Ok(PointCloud::sensor(points))
}

/// Noise generator used by the renderer; one seed fixes every draw.
pub type NoiseRng = ChaCha8Rng;

pub fn noise_rng(seed: u64) -> NoiseRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Level poses turning in place: `frames` yaws from `start_yaw_deg`,
/// `sweep_deg / frames` apart.
pub fn pan_trajectory(
    position: Vec3,
    frames: usize,
    start_yaw_deg: f64,
    sweep_deg: f64,
    axis: OpticalAxis,
) -> Vec<Pose> {
    (0..frames)
        .map(|i| {
            Pose::level(
                position,
                start_yaw_deg + sweep_deg * i as f64 / frames as f64,
                axis,
            )
        })
        .collect()
}
