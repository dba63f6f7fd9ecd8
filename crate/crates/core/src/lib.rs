//! Incremental voxel distance mapping, sensor-centric range rasters and
//! binaural sonification of those rasters.
//!
//! The pipeline per frame: fuse a posed cloud into a [`mapping::SparseVoxelMap`],
//! extract the zero-crossing [`mapping::SurfaceSet`], rasterize it around the
//! sensor ([`raster`]), and render the circle as a sweep of spatialized taps
//! ([`sonifier`]). [`synth`] provides ground truth and [`eval`] the metrics.

pub mod dataio;
pub mod eval;
pub mod geometry;
pub mod mapping;
pub mod raster;
pub mod sonifier;
pub mod synth;
