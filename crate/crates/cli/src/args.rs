use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sonomap::geometry::{OpticalAxis, Vec3};
use sonomap::mapping::MapParams;
use sonomap::raster::{ElevationReference, RasterParams};
use sonomap::synth::CameraModel;

#[derive(Debug, Parser)]
#[command(
    name = "sonomap",
    version,
    about = "Map posed depth frames into range rasters and render them as binaural sweeps"
)]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse frames and write per-frame rasters plus metrics.csv.
    Run(RunArgs),
    /// Render one circle raster as a binaural sweep.
    Sonify(SonifyArgs),
    /// Render a synthetic scene to PLY frames, a TUM trajectory and ground-truth rasters.
    SynthGen(SynthGenArgs),
    /// Compare circle bearings with distance-field gradients at one frame.
    EdfCompare(EdfCompareArgs),
    /// Score stored rasters against ground-truth rasters.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    PlusX,
    PlusZ,
}

impl From<AxisArg> for OpticalAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::PlusX => OpticalAxis::PlusX,
            AxisArg::PlusZ => OpticalAxis::PlusZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ElevationArg {
    Sensor,
    Floor,
}

impl From<ElevationArg> for ElevationReference {
    fn from(a: ElevationArg) -> Self {
        match a {
            ElevationArg::Sensor => ElevationReference::Sensor,
            ElevationArg::Floor => ElevationReference::Floor,
        }
    }
}

/// Where frames come from: a recorded dataset or a synthetic scene.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// TUM trajectory; clouds are looked up as `<clouds>/<timestamp:.6>.ply`.
    #[arg(long, requires = "clouds", conflicts_with = "scene")]
    pub trajectory: Option<PathBuf>,
    #[arg(long, requires = "trajectory")]
    pub clouds: Option<PathBuf>,
    /// Scene JSON rendered on the fly along an in-place pan.
    #[arg(long, required_unless_present = "trajectory")]
    pub scene: Option<PathBuf>,
    /// Scene used as ground truth for a dataset input.
    #[arg(long, conflicts_with = "scene")]
    pub gt_scene: Option<PathBuf>,
    #[command(flatten)]
    pub pan: PanArgs,
    #[command(flatten)]
    pub camera: CameraArgs,
    /// Seed for all sensor noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct PanArgs {
    /// Number of poses in the pan.
    #[arg(long = "pan-frames", default_value_t = 72)]
    pub frames: usize,
    /// Sensor position `x,y,z`.
    #[arg(long, value_parser = parse_vec3, default_value = "2.075,2.075,1.2")]
    pub position: Vec3,
    #[arg(long, default_value_t = 0.0)]
    pub start_yaw: f64,
    /// Total turn in degrees, split evenly over the poses.
    #[arg(long, default_value_t = 360.0)]
    pub sweep: f64,
    /// Seconds between poses in written trajectories.
    #[arg(long, default_value_t = 0.1)]
    pub frame_period: f64,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three finite numbers x,y,z, got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CameraArgs {
    #[arg(long, default_value_t = 90.0)]
    pub hfov: f64,
    #[arg(long, default_value_t = 60.0)]
    pub vfov: f64,
    #[arg(long, default_value_t = 160)]
    pub cols: usize,
    #[arg(long, default_value_t = 120)]
    pub rows: usize,
    #[arg(long, default_value_t = 10.0)]
    pub max_depth: f64,
    /// Gaussian range noise sigma in meters.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

impl CameraArgs {
    pub fn model(&self, axis: OpticalAxis) -> CameraModel {
        CameraModel {
            hfov_deg: self.hfov,
            vfov_deg: self.vfov,
            cols: self.cols,
            rows: self.rows,
            max_depth: self.max_depth,
            noise_sigma: self.noise,
            optical_axis: axis,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    #[arg(long, default_value_t = 0.05)]
    pub voxel_size: f64,
    /// Defaults to three voxels.
    #[arg(long)]
    pub truncation_band: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub carve_rate: f64,
    #[arg(long, default_value_t = 100.0)]
    pub w_max: f64,
    #[arg(long, default_value_t = 2.0)]
    pub w_surface_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub max_range: f64,
}

impl MapArgs {
    pub fn params(&self) -> MapParams {
        MapParams {
            truncation_band: self.truncation_band.unwrap_or(3.0 * self.voxel_size),
            carve_rate: self.carve_rate,
            w_max: self.w_max,
            w_surface_min: self.w_surface_min,
            max_range: self.max_range,
            ..MapParams::new(self.voxel_size)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RasterArgs {
    #[arg(long, default_value_t = 10.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub ground_band: f64,
    #[arg(long, default_value_t = 2.0)]
    pub height_cap: f64,
    #[arg(long, default_value_t = 19)]
    pub elevation_rows: usize,
    #[arg(long, default_value_t = 1.2)]
    pub sensor_height: f64,
    /// What cylinder elevations are measured from.
    #[arg(long, value_enum, default_value_t = ElevationArg::Sensor)]
    pub cylinder_ref: ElevationArg,
    #[arg(long, value_enum, default_value_t = AxisArg::PlusZ)]
    pub optical_axis: AxisArg,
    /// Planar radius of each surface point when binning; defaults to half a voxel.
    #[arg(long)]
    pub footprint: Option<f64>,
}

impl RasterArgs {
    /// Raster parameters for surface points of `voxel_size` voxels, or for
    /// raw points when `None`.
    pub fn params(&self, voxel_size: Option<f64>) -> RasterParams {
        RasterParams {
            footprint_radius: self
                .footprint
                .or(voxel_size.map(|v| v / 2.0))
                .unwrap_or(0.0),
            r_max: self.r_max,
            ground_band: self.ground_band,
            height_cap: self.height_cap,
            elevation_rows: self.elevation_rows,
            sensor_height: self.sensor_height,
            cylinder_reference: self.cylinder_ref.into(),
            optical_axis: self.optical_axis.into(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FrameArgs {
    #[arg(long, default_value_t = 0)]
    pub frame_start: usize,
    /// Exclusive end; defaults to the last frame.
    #[arg(long)]
    pub frame_end: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub raster: RasterArgs,
    #[command(flatten)]
    pub frames: FrameArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Leave timing columns empty so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    /// Also write the final voxel map as `map.csv`.
    #[arg(long)]
    pub dump_map: bool,
    /// Render a sweep per selected frame with this BRIR manifest.
    #[arg(long, requires_all = ["tap", "woosh"])]
    pub brir: Option<PathBuf>,
    #[arg(long, requires = "brir")]
    pub tap: Option<PathBuf>,
    #[arg(long, requires = "brir")]
    pub woosh: Option<PathBuf>,
    #[command(flatten)]
    pub sweep: SweepSettings,
}

#[derive(Debug, Clone, Args)]
pub struct SweepSettings {
    /// Reject BRIR sets that miss any cell of the 3 deg x 0.4 m grid.
    #[arg(long)]
    pub require_full_grid: bool,
    /// Multiplier from raster range to listening distance.
    #[arg(long, default_value_t = 1.0)]
    pub distance_scale: f64,
    /// Seconds between sector events.
    #[arg(long, default_value_t = 0.1)]
    pub cadence: f64,
    #[arg(long, default_value_t = 10)]
    pub sector_deg: u32,
}

#[derive(Debug, Clone, Args)]
pub struct SonifyArgs {
    /// Circle CSV to render.
    #[arg(long, conflicts_with_all = ["run_dir", "frame"])]
    pub circle: Option<PathBuf>,
    /// Output directory of `run`; use with `--frame`.
    #[arg(long, requires = "frame")]
    pub run_dir: Option<PathBuf>,
    #[arg(long, requires = "run_dir")]
    pub frame: Option<usize>,
    /// BRIR manifest JSON.
    #[arg(long)]
    pub brir: PathBuf,
    #[arg(long)]
    pub tap: PathBuf,
    #[arg(long)]
    pub woosh: PathBuf,
    #[command(flatten)]
    pub sweep: SweepSettings,
    /// Output WAV.
    #[arg(long)]
    pub out: PathBuf,
    /// Event log; defaults to the output path with a `.csv` extension.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthGenArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[command(flatten)]
    pub pan: PanArgs,
    #[command(flatten)]
    pub camera: CameraArgs,
    #[command(flatten)]
    pub raster: RasterArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write ascii instead of binary PLY.
    #[arg(long)]
    pub ascii: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EdfCompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub raster: RasterArgs,
    #[command(flatten)]
    pub frames: FrameArgs,
    /// Frame whose snapshot is compared.
    #[arg(long)]
    pub frame: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Output directory of `run`.
    #[arg(long)]
    pub run: PathBuf,
    /// Directory with ground-truth `circle_*.csv` / `cylinder_*.csv`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Where to write the scores; defaults to `<run>/eval.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
