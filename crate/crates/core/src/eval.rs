//! Accuracy, coverage, timing and distance-field comparison metrics.

use serde::Serialize;

use crate::geometry::{direction_at, signed_azimuth_deg, wrap_signed_degrees, Vec2, Vec3};
use crate::mapping::{edf_query, MapError, SurfaceSet};
use crate::raster::{CircularRaster, RangeGrid};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("raster shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("reference raster has no known cells")]
    EmptyReference,
    #[error(transparent)]
    Map(#[from] MapError),
}

fn check_shapes(a: &impl RangeGrid, b: &impl RangeGrid) -> Result<(), EvalError> {
    if a.shape() != b.shape() || a.cells().len() != b.cells().len() {
        return Err(EvalError::ShapeMismatch {
            a: a.shape(),
            b: b.shape(),
        });
    }
    Ok(())
}

/// Root mean squared range error over the cells known in both rasters;
/// `None` when no cell is.
pub fn rmse<R: RangeGrid>(estimate: &R, truth: &R) -> Result<Option<f64>, EvalError> {
    check_shapes(estimate, truth)?;
    let (sum, n) = estimate
        .cells()
        .iter()
        .zip(truth.cells())
        .filter_map(|(e, t)| Some((e.as_ref()? - t.as_ref()?).powi(2)))
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    Ok((n > 0).then(|| (sum / n as f64).sqrt()))
}

/// Share of the reference's known cells that the estimate also knows.
pub fn coverage<R: RangeGrid>(estimate: &R, reference: &R) -> Result<f64, EvalError> {
    check_shapes(estimate, reference)?;
    let known_ref = reference.cells().iter().filter(|c| c.is_some()).count();
    if known_ref == 0 {
        return Err(EvalError::EmptyReference);
    }
    let both = estimate
        .cells()
        .iter()
        .zip(reference.cells())
        .filter(|(e, r)| e.is_some() && r.is_some())
        .count();
    Ok(both as f64 / known_ref as f64)
}

/// One known circle bin next to the distance field sampled on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BearingRecord {
    pub bin: usize,
    /// Bearing of the circle ray, counter-clockwise from the heading.
    pub circle_bearing_deg: f64,
    pub circle_range_m: f64,
    pub query: [f64; 3],
    pub edf_distance_m: f64,
    pub edf_gradient: [f64; 3],
    /// Planar bearing of the gradient in the circle's frame; `None` for a vertical gradient.
    pub gradient_bearing_deg: Option<f64>,
    /// Gradient bearing minus ray bearing, in `(-180, 180]`.
    pub angle_diff_deg: Option<f64>,
}

/// For each known bin, queries the distance field one meter from the sensor
/// along the bin's bearing, at sensor height.
pub fn edf_bearing_compare(
    circle: &CircularRaster,
    surface: &SurfaceSet,
) -> Result<Vec<BearingRecord>, EvalError> {
    if surface.is_empty() {
        return Err(MapError::EmptySurface.into());
    }
    let mut out = Vec::new();
    for (bin, range) in circle.bins.iter().enumerate() {
        let Some(range) = *range else { continue };
        let bearing = bin as f64;
        let dir = direction_at(&circle.heading, bearing);
        let q = circle.center + Vec3::new(dir.x, dir.y, 0.0);
        let (d, g) = edf_query(surface, &q)?;
        let gb = signed_azimuth_deg(&circle.heading, &Vec2::new(g.x, g.y)).ok();
        out.push(BearingRecord {
            bin,
            circle_bearing_deg: bearing,
            circle_range_m: range,
            query: [q.x, q.y, q.z],
            edf_distance_m: d,
            edf_gradient: [g.x, g.y, g.z],
            gradient_bearing_deg: gb,
            angle_diff_deg: gb.map(|b| wrap_signed_degrees(b - bearing)),
        });
    }
    Ok(out)
}

/// Sum of absolute wrapped bearing changes between consecutive entries.
/// A `None` entry breaks the chain.
pub fn bearing_total_variation(bearings: &[Option<f64>]) -> f64 {
    bearings
        .windows(2)
        .filter_map(|w| Some(wrap_signed_degrees(w[1]? - w[0]?).abs()))
        .sum()
}

/// Total variation of the circle bearings and of the gradient bearings over
/// runs of adjacent bins.
pub fn bearing_variations(records: &[BearingRecord]) -> (f64, f64) {
    let mut circle = 0.0;
    let mut edf = 0.0;
    for w in records.windows(2) {
        if w[1].bin != w[0].bin + 1 {
            continue;
        }
        circle += wrap_signed_degrees(w[1].circle_bearing_deg - w[0].circle_bearing_deg).abs();
        if let (Some(a), Some(b)) = (w[0].gradient_bearing_deg, w[1].gradient_bearing_deg) {
            edf += wrap_signed_degrees(b - a).abs();
        }
    }
    (circle, edf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub count: usize,
    pub median_ms: f64,
    pub max_ms: f64,
}

/// Median (mean of the middle pair for even counts) and maximum.
pub fn timing_stats(samples_ms: &[f64]) -> Option<TimingStats> {
    if samples_ms.is_empty() {
        return None;
    }
    let mut v = samples_ms.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median_ms = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    Some(TimingStats {
        count: n,
        median_ms,
        max_ms: v[n - 1],
    })
}
