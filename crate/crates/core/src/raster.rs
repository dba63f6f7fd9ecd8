//! Sensor-centric circular (2D) and cylindrical (3D) minimum-range rasters.
//!
//! Both rasters have 360 azimuth bins of one degree. Bin `k` holds points
//! whose azimuth (counter-clockwise from the sensor heading) lies in
//! `[k, k + 1)`, and stores the smallest planar range among them.

use serde::{Deserialize, Serialize};

use crate::geometry::{
    sensor_heading_2d, signed_azimuth_deg, GeometryError, OpticalAxis, Pose, Vec2, Vec3,
};

pub const CIRCLE_BINS: usize = 360;

/// Points closer than this (planar) to the sensor have no defined bearing.
const MIN_PLANAR_RANGE: f64 = 1e-6;

/// Which height the cylinder's elevation band is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElevationReference {
    /// Elevation relative to the sensor origin.
    #[default]
    Sensor,
    /// Elevation relative to the estimated floor, like the circle's band.
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterParams {
    pub r_max: f64,
    /// Lower edge of the obstacle band (circle: above floor; cylinder: see `cylinder_reference`).
    pub ground_band: f64,
    /// Upper edge of the obstacle band.
    pub height_cap: f64,
    pub elevation_rows: usize,
    /// Height of the sensor above the floor, used to place the floor plane.
    pub sensor_height: f64,
    pub cylinder_reference: ElevationReference,
    pub optical_axis: OpticalAxis,
    /// Planar radius each point is taken to occupy. A point marks every bin
    /// its disc subtends; 0 bins it by its center bearing alone.
    pub footprint_radius: f64,
}

impl Default for RasterParams {
    fn default() -> Self {
        Self {
            r_max: 10.0,
            ground_band: 0.1,
            height_cap: 2.0,
            elevation_rows: 19,
            sensor_height: 1.2,
            cylinder_reference: ElevationReference::Sensor,
            optical_axis: OpticalAxis::PlusZ,
            footprint_radius: 0.0,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("invalid raster parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl RasterParams {
    pub fn validate(&self) -> Result<(), RasterError> {
        if !(self.r_max > 0.0) {
            return Err(RasterError::InvalidParams("r_max must be positive"));
        }
        if !(self.ground_band >= 0.0 && self.ground_band < self.height_cap) {
            return Err(RasterError::InvalidParams(
                "need 0 <= ground_band < height_cap",
            ));
        }
        if !(self.footprint_radius >= 0.0 && self.footprint_radius.is_finite()) {
            return Err(RasterError::InvalidParams(
                "footprint_radius must be finite and non-negative",
            ));
        }
        if self.elevation_rows == 0 {
            return Err(RasterError::InvalidParams(
                "elevation_rows must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn row_height(&self) -> f64 {
        (self.height_cap - self.ground_band) / self.elevation_rows as f64
    }

    /// Elevation of the center of `row`.
    pub fn row_center(&self, row: usize) -> f64 {
        self.ground_band + (row as f64 + 0.5) * self.row_height()
    }

    /// Row for an elevation inside `[ground_band, height_cap]`, `None` outside.
    pub fn row_of(&self, elevation: f64) -> Option<usize> {
        if !(elevation >= self.ground_band && elevation <= self.height_cap) {
            return None;
        }
        let row = ((elevation - self.ground_band) / self.row_height()).floor();
        Some((row.max(0.0) as usize).min(self.elevation_rows - 1))
    }

    /// Height of the floor plane below a sensor at `sensor_z`.
    pub fn floor_z(&self, sensor_z: f64) -> f64 {
        sensor_z - self.sensor_height
    }

    /// Z value elevations in the cylinder are measured from.
    pub fn cylinder_base_z(&self, sensor_z: f64) -> f64 {
        match self.cylinder_reference {
            ElevationReference::Sensor => sensor_z,
            ElevationReference::Floor => self.floor_z(sensor_z),
        }
    }
}

/// Common view of a raster as a flat grid of optional ranges.
pub trait RangeGrid {
    fn cells(&self) -> &[Option<f64>];
    /// `(rows, columns)`.
    fn shape(&self) -> (usize, usize);
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircularRaster {
    pub center: Vec3,
    /// Unit planar vector defining bin 0.
    pub heading: Vec2,
    pub bins: Vec<Option<f64>>,
}

impl CircularRaster {
    pub fn unknown(center: Vec3, heading: Vec2) -> Self {
        Self {
            center,
            heading,
            bins: vec![None; CIRCLE_BINS],
        }
    }

    pub fn known_count(&self) -> usize {
        self.bins.iter().filter(|b| b.is_some()).count()
    }
}

impl RangeGrid for CircularRaster {
    fn cells(&self) -> &[Option<f64>] {
        &self.bins
    }

    fn shape(&self) -> (usize, usize) {
        (1, self.bins.len())
    }
}

/// Row-major azimuth x elevation grid: `cells[row * 360 + column]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalRaster {
    pub center: Vec3,
    pub heading: Vec2,
    pub rows: usize,
    pub cells: Vec<Option<f64>>,
}

impl CylindricalRaster {
    pub fn unknown(center: Vec3, heading: Vec2, rows: usize) -> Self {
        Self {
            center,
            heading,
            rows,
            cells: vec![None; rows * CIRCLE_BINS],
        }
    }

    pub fn get(&self, column: usize, row: usize) -> Option<f64> {
        self.cells[row * CIRCLE_BINS + column]
    }

    pub fn set(&mut self, column: usize, row: usize, value: Option<f64>) {
        self.cells[row * CIRCLE_BINS + column] = value;
    }

    pub fn known_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }
}

impl RangeGrid for CylindricalRaster {
    fn cells(&self) -> &[Option<f64>] {
        &self.cells
    }

    fn shape(&self) -> (usize, usize) {
        (self.rows, CIRCLE_BINS)
    }
}

fn keep_min(cell: &mut Option<f64>, range: f64) {
    match cell {
        Some(r) if *r <= range => {}
        _ => *cell = Some(range),
    }
}

/// Bins covered by `p` and its planar range, or `None` when out of range.
/// Without a footprint that is the single bin of the center bearing.
fn bins_of(
    center: &Vec3,
    heading: &Vec2,
    params: &RasterParams,
    p: &Vec3,
) -> Option<(BinSpan, f64)> {
    let rel = Vec2::new(p.x - center.x, p.y - center.y);
    let range = rel.norm();
    if !(range >= MIN_PLANAR_RANGE && range <= params.r_max) {
        return None;
    }
    let az = signed_azimuth_deg(heading, &rel).ok()?;
    let first = (az.floor() as usize).min(CIRCLE_BINS - 1);
    if params.footprint_radius == 0.0 {
        return Some((BinSpan { first, count: 1 }, range));
    }
    let half = (params.footprint_radius / range)
        .min(1.0)
        .asin()
        .to_degrees();
    let lo = (az - half).floor() as i64;
    let hi = (az + half).floor() as i64;
    let count = ((hi - lo + 1) as usize).min(CIRCLE_BINS);
    Some((
        BinSpan {
            first: lo.rem_euclid(CIRCLE_BINS as i64) as usize,
            count,
        },
        range,
    ))
}

#[derive(Debug, Clone, Copy)]
struct BinSpan {
    first: usize,
    count: usize,
}

impl BinSpan {
    fn iter(self) -> impl Iterator<Item = usize> {
        (0..self.count).map(move |i| (self.first + i) % CIRCLE_BINS)
    }
}

/// Keeps points whose height above the floor lies in `(ground_band, height_cap]`.
pub fn segment_ground(points: &[Vec3], sensor_z: f64, params: &RasterParams) -> Vec<Vec3> {
    let floor = params.floor_z(sensor_z);
    points
        .iter()
        .filter(|p| {
            let h = p.z - floor;
            h > params.ground_band && h <= params.height_cap
        })
        .copied()
        .collect()
}

/// Rasterizes already ground-segmented points onto the 360-bin circle.
pub fn rasterize_circle(
    points: &[Vec3],
    pose: &Pose,
    params: &RasterParams,
) -> Result<CircularRaster, RasterError> {
    params.validate()?;
    let heading = sensor_heading_2d(pose, params.optical_axis)?;
    let center = pose.translation;
    let mut raster = CircularRaster::unknown(center, heading);
    for p in points {
        if let Some((span, range)) = bins_of(&center, &heading, params, p) {
            for bin in span.iter() {
                keep_min(&mut raster.bins[bin], range);
            }
        }
    }
    Ok(raster)
}

/// Rasterizes points onto the azimuth x elevation cylinder; filters its own band.
pub fn rasterize_cylinder(
    points: &[Vec3],
    pose: &Pose,
    params: &RasterParams,
) -> Result<CylindricalRaster, RasterError> {
    params.validate()?;
    let heading = sensor_heading_2d(pose, params.optical_axis)?;
    let center = pose.translation;
    let base = params.cylinder_base_z(center.z);
    let mut raster = CylindricalRaster::unknown(center, heading, params.elevation_rows);
    for p in points {
        let Some(row) = params.row_of(p.z - base) else {
            continue;
        };
        if let Some((span, range)) = bins_of(&center, &heading, params, p) {
            for col in span.iter() {
                keep_min(&mut raster.cells[row * CIRCLE_BINS + col], range);
            }
        }
    }
    Ok(raster)
}

/// Raw depth returns are points, not voxels: no footprint.
fn raw_params(params: &RasterParams) -> RasterParams {
    RasterParams {
        footprint_radius: 0.0,
        ..*params
    }
}

/// Circle from a single world-frame depth frame, without fusion.
pub fn depth_only_circle(
    frame: &[Vec3],
    pose: &Pose,
    params: &RasterParams,
) -> Result<CircularRaster, RasterError> {
    let kept = segment_ground(frame, pose.translation.z, params);
    rasterize_circle(&kept, pose, &raw_params(params))
}

/// Cylinder from a single world-frame depth frame, without fusion.
pub fn depth_only_cylinder(
    frame: &[Vec3],
    pose: &Pose,
    params: &RasterParams,
) -> Result<CylindricalRaster, RasterError> {
    rasterize_cylinder(frame, pose, &raw_params(params))
}
