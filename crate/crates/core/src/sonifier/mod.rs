//! Turns a circular raster into a counter-clockwise binaural sweep.
//!
//! The 360 one-degree bins are grouped into sectors (10 degrees by default).
//! Each sector with a known range becomes a pitch-cued `tap` filtered by the
//! BRIR nearest to its closest bin. A sector with no known bins becomes a
//! `woosh` rendered at the sector center and the far distance.

mod brir;
pub mod dsp;
mod sweep;

use thiserror::Error;

pub use brir::{
    grid_azimuths, grid_distances, select_brir, signed_azimuth, snap_to_grid, Brir, BrirKey,
    BrirStore, SphericalHead, GRID_AZIMUTH_MAX_DEG, GRID_AZIMUTH_MIN_DEG, GRID_DISTANCE_COUNT,
    MAX_DISTANCE_M, MIN_DISTANCE_M,
};
pub use sweep::{
    aggregate_sectors, map_distance, pitch_class, pitch_shift, plan_events, render_sweep,
    render_unlimited, EventKind, SectorReading, SonoEvent, Sweep, SweepConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SonifyError {
    #[error("no BRIR for grid cell (azimuth {azimuth_deg} deg, distance {distance_m} m)")]
    MissingGridCell { azimuth_deg: i32, distance_m: f64 },
    #[error("range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("sample rate mismatch: {what} is {found} Hz, BRIR store is {expected} Hz")]
    SampleRateMismatch {
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("{0} sound must be mono")]
    NotMono(&'static str),
    #[error("sector width {0} deg does not divide 360")]
    BadSectorWidth(u32),
    #[error("expected {expected} sectors, got {found}")]
    SectorCount { expected: usize, found: usize },
    #[error("circle must have 360 bins, got {0}")]
    BinCount(usize),
}
