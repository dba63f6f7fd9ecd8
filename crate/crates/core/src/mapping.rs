//! Sparse voxel signed-distance map with projective fusion and free-space
//! carving.
//!
//! Each measured point is traced from the sensor through the voxel grid up
//! to one truncation band past the point. A traversed voxel whose center
//! projects more than a band in front of the point is a free-space
//! observation; any other traversed voxel observes the projective distance
//! `dist(m) - dist(center)` clamped to the band.
//!
//! Observations are aggregated per frame: a voxel seen as surface by any ray
//! of the frame fuses the mean of those distances with weight one; a voxel
//! only ever seen as free loses `carve_rate` weight and disappears at zero.

use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::geometry::{Frame, PointCloud, Pose, Vec3};

pub type VoxelIndex = [i64; 3];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MapError {
    #[error("cloud is in the sensor frame; transform it to world first")]
    SensorFrameCloud,
    #[error("pose has non-finite components")]
    NonFinitePose,
    #[error("invalid map parameters: {0}")]
    InvalidParams(&'static str),
    #[error("surface set is empty")]
    EmptySurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub voxel_size: f64,
    pub truncation_band: f64,
    pub max_range: f64,
    pub w_max: f64,
    pub carve_rate: f64,
    pub w_surface_min: f64,
}

impl MapParams {
    /// Defaults with a band of three voxels.
    pub fn new(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            truncation_band: 3.0 * voxel_size,
            max_range: 10.0,
            w_max: 100.0,
            carve_rate: 1.0,
            w_surface_min: 2.0,
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.voxel_size) {
            return Err(MapError::InvalidParams("voxel_size must be positive"));
        }
        if !positive(self.truncation_band) {
            return Err(MapError::InvalidParams("truncation_band must be positive"));
        }
        if !positive(self.max_range) {
            return Err(MapError::InvalidParams("max_range must be positive"));
        }
        if !(self.w_max >= 1.0) {
            return Err(MapError::InvalidParams("w_max must be at least 1"));
        }
        if !(self.carve_rate >= 0.0) {
            return Err(MapError::InvalidParams("carve_rate must be non-negative"));
        }
        Ok(())
    }
}

impl Default for MapParams {
    fn default() -> Self {
        Self::new(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voxel {
    pub sdf: f64,
    pub weight: f64,
    pub hits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameStats {
    pub points_used: usize,
    /// Beyond `max_range` or on top of the sensor.
    pub points_skipped: usize,
    pub voxels_fused: usize,
    pub voxels_carved: usize,
    pub voxels_erased: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SparseVoxelMap {
    params: MapParams,
    cells: FxHashMap<VoxelIndex, Voxel>,
}

#[derive(Default, Clone, Copy)]
struct FrameObs {
    sum: f64,
    count: u32,
}

impl SparseVoxelMap {
    pub fn new(params: MapParams) -> Result<Self, MapError> {
        params.validate()?;
        Ok(Self {
            params,
            cells: FxHashMap::default(),
        })
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, p: &Vec3) -> VoxelIndex {
        voxel_index(p, self.params.voxel_size)
    }

    pub fn center_of(&self, idx: VoxelIndex) -> Vec3 {
        voxel_center(idx, self.params.voxel_size)
    }

    pub fn get(&self, idx: VoxelIndex) -> Option<&Voxel> {
        self.cells.get(&idx)
    }

    /// All cells sorted by index.
    pub fn sorted_cells(&self) -> Vec<(VoxelIndex, Voxel)> {
        let mut v: Vec<_> = self.cells.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }

    /// Fuses one world-frame cloud observed from `pose.translation`.
    pub fn integrate_frame(
        &mut self,
        pose: &Pose,
        cloud: &PointCloud,
    ) -> Result<FrameStats, MapError> {
        let start = Instant::now();
        if cloud.frame != Frame::World {
            return Err(MapError::SensorFrameCloud);
        }
        if !pose.is_finite() {
            return Err(MapError::NonFinitePose);
        }
        let p = self.params;
        let origin = pose.translation;
        let mut stats = FrameStats::default();
        // surface observations; a present entry with count 0 means free only
        let mut obs: FxHashMap<VoxelIndex, FrameObs> = FxHashMap::default();
        for m in &cloud.points {
            let ray = m - origin;
            let dist = ray.norm();
            if !(dist > 1e-9 && dist <= p.max_range) {
                stats.points_skipped += 1;
                continue;
            }
            stats.points_used += 1;
            let dir = ray / dist;
            let end = m + dir * p.truncation_band;
            traverse(&origin, &end, p.voxel_size, |idx| {
                let s = (voxel_center(idx, p.voxel_size) - origin).dot(&dir);
                let entry = obs.entry(idx).or_default();
                if s >= dist - p.truncation_band {
                    entry.sum += (dist - s).clamp(-p.truncation_band, p.truncation_band);
                    entry.count += 1;
                }
            });
        }
        for (idx, o) in obs {
            if o.count > 0 {
                let d = o.sum / o.count as f64;
                let cell = self.cells.entry(idx).or_insert(Voxel {
                    sdf: 0.0,
                    weight: 0.0,
                    hits: 0,
                });
                cell.sdf = ((cell.weight * cell.sdf + d) / (cell.weight + 1.0))
                    .clamp(-p.truncation_band, p.truncation_band);
                cell.weight = (cell.weight + 1.0).min(p.w_max);
                cell.hits += 1;
                stats.voxels_fused += 1;
            } else if let Some(cell) = self.cells.get_mut(&idx) {
                cell.weight -= p.carve_rate;
                stats.voxels_carved += 1;
                if cell.weight <= 0.0 {
                    self.cells.remove(&idx);
                    stats.voxels_erased += 1;
                }
            }
        }
        stats.elapsed = start.elapsed();
        Ok(stats)
    }
}

pub fn voxel_index(p: &Vec3, voxel_size: f64) -> VoxelIndex {
    [
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    ]
}

pub fn voxel_center(idx: VoxelIndex, voxel_size: f64) -> Vec3 {
    Vec3::new(
        (idx[0] as f64 + 0.5) * voxel_size,
        (idx[1] as f64 + 0.5) * voxel_size,
        (idx[2] as f64 + 0.5) * voxel_size,
    )
}

/// Visits every voxel the segment `a -> b` passes through, in order
/// (Amanatides & Woo). Both end voxels are included.
pub fn traverse(a: &Vec3, b: &Vec3, voxel_size: f64, mut visit: impl FnMut(VoxelIndex)) {
    let mut idx = voxel_index(a, voxel_size);
    let last = voxel_index(b, voxel_size);
    let d = b - a;
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for k in 0..3 {
        if d[k] > 0.0 {
            step[k] = 1;
            t_max[k] = ((idx[k] + 1) as f64 * voxel_size - a[k]) / d[k];
            t_delta[k] = voxel_size / d[k];
        } else if d[k] < 0.0 {
            step[k] = -1;
            t_max[k] = (idx[k] as f64 * voxel_size - a[k]) / d[k];
            t_delta[k] = -voxel_size / d[k];
        }
    }
    // each step moves one axis toward `last`; this bounds the walk even when
    // rounding makes t_max overshoot
    let budget: i64 = (0..3).map(|k| (last[k] - idx[k]).abs()).sum();
    visit(idx);
    for _ in 0..budget {
        let k = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[k] > 1.0 || idx[k] == last[k] {
            // rounding at a boundary; finish on the remaining axes
            let Some(k) = (0..3).find(|&k| idx[k] != last[k]) else {
                break;
            };
            idx[k] += step[k];
            t_max[k] += t_delta[k];
            visit(idx);
            continue;
        }
        idx[k] += step[k];
        t_max[k] += t_delta[k];
        visit(idx);
    }
}

/// Voxel centers on the zero crossing, ordered by voxel index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceSet {
    pub points: Vec<Vec3>,
}

impl SurfaceSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Centers of cells with `|sdf| < voxel_size / 2` and `weight >= w_surface_min`.
pub fn extract_surface(map: &SparseVoxelMap) -> SurfaceSet {
    let p = map.params();
    let mut idx: Vec<VoxelIndex> = map
        .cells
        .iter()
        .filter(|(_, c)| c.sdf.abs() < p.voxel_size / 2.0 && c.weight >= p.w_surface_min)
        .map(|(k, _)| *k)
        .collect();
    idx.sort_unstable();
    SurfaceSet {
        points: idx
            .into_iter()
            .map(|k| voxel_center(k, p.voxel_size))
            .collect(),
    }
}

/// Gradient returned when the query sits exactly on a surface point.
pub const EDF_FALLBACK_GRADIENT: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Distance and unit gradient (pointing away from the closest surface point)
/// by exhaustive search. Ties go to the lowest point index; a query exactly on
/// a surface point gets [`EDF_FALLBACK_GRADIENT`].
pub fn edf_query(surface: &SurfaceSet, q: &Vec3) -> Result<(f64, Vec3), MapError> {
    let mut best: Option<(f64, usize)> = None;
    for (i, s) in surface.points.iter().enumerate() {
        let d2 = (q - s).norm_squared();
        if best.is_none_or(|(b, _)| d2 < b) {
            best = Some((d2, i));
        }
    }
    let (d2, i) = best.ok_or(MapError::EmptySurface)?;
    let d = d2.sqrt();
    let grad = if d > 0.0 {
        (q - surface.points[i]) / d
    } else {
        EDF_FALLBACK_GRADIENT
    };
    Ok((d, grad))
}
