//! Frame sources and the per-frame fuse/snapshot loop shared by `run` and
//! `edf-compare`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use sonomap::dataio::{parse_ply, parse_trajectory, MetricsRow, Trajectory};
use sonomap::eval::{coverage, rmse};
use sonomap::geometry::{transform_to_world, OpticalAxis, PointCloud, Pose};
use sonomap::mapping::{extract_surface, MapParams, SparseVoxelMap, SurfaceSet};
use sonomap::raster::{
    depth_only_circle, rasterize_circle, rasterize_cylinder, segment_ground, CircularRaster,
    CylindricalRaster, RasterParams,
};
use sonomap::synth::{
    analytic_circle, analytic_cylinder, noise_rng, pan_trajectory, render_depth_frame, CameraModel,
    SceneSpec,
};

use crate::args::{FrameArgs, InputArgs};

pub fn load_scene(path: &Path) -> Result<SceneSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SceneSpec::from_json(&text).with_context(|| format!("scene {}", path.display()))
}

/// Cloud file for a trajectory timestamp.
pub fn cloud_path(dir: &Path, timestamp: f64) -> PathBuf {
    dir.join(format!("{timestamp:.6}.ply"))
}

pub enum Source {
    Dataset {
        trajectory: Trajectory,
        clouds: PathBuf,
        truth: Option<SceneSpec>,
    },
    Scene {
        scene: SceneSpec,
        poses: Vec<Pose>,
        camera: CameraModel,
        seed: u64,
    },
}

impl Source {
    pub fn from_args(input: &InputArgs, axis: OpticalAxis) -> Result<Self> {
        if let (Some(traj), Some(clouds)) = (&input.trajectory, &input.clouds) {
            let trajectory =
                parse_trajectory(traj).with_context(|| format!("trajectory {}", traj.display()))?;
            let truth = input.gt_scene.as_deref().map(load_scene).transpose()?;
            return Ok(Source::Dataset {
                trajectory,
                clouds: clouds.clone(),
                truth,
            });
        }
        let Some(path) = &input.scene else {
            bail!("give either --trajectory/--clouds or --scene");
        };
        let scene = load_scene(path)?;
        let pan = &input.pan;
        Ok(Source::Scene {
            scene,
            poses: pan_trajectory(pan.position, pan.frames, pan.start_yaw, pan.sweep, axis),
            camera: input.camera.model(axis),
            seed: input.seed,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Source::Dataset { trajectory, .. } => trajectory.len(),
            Source::Scene { poses, .. } => poses.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pose(&self, i: usize) -> Pose {
        match self {
            Source::Dataset { trajectory, .. } => trajectory.records[i].pose,
            Source::Scene { poses, .. } => poses[i],
        }
    }

    pub fn truth(&self) -> Option<&SceneSpec> {
        match self {
            Source::Dataset { truth, .. } => truth.as_ref(),
            Source::Scene { scene, .. } => Some(scene),
        }
    }

    /// Sensor-frame cloud of frame `i`. Synthetic noise uses stream `i` of the
    /// seeded generator, so a frame's draws do not depend on which others ran.
    pub fn cloud(&self, i: usize) -> Result<PointCloud> {
        match self {
            Source::Dataset {
                trajectory, clouds, ..
            } => {
                let ts = trajectory.records[i].timestamp;
                let path = cloud_path(clouds, ts);
                if !path.is_file() {
                    bail!(
                        "frame {i}: no cloud for timestamp {ts:.6} (expected {})",
                        path.display()
                    );
                }
                parse_ply(&path).with_context(|| format!("frame {i}: {}", path.display()))
            }
            Source::Scene {
                scene,
                poses,
                camera,
                seed,
            } => {
                let mut rng = noise_rng(*seed);
                rng.set_stream(i as u64);
                render_depth_frame(scene, &poses[i], camera, i, &mut rng)
                    .with_context(|| format!("frame {i}"))
            }
        }
    }
}

/// Frame indices `start, start + stride, ...` below `end` (default: all).
pub fn select_frames(frames: &FrameArgs, available: usize) -> Result<Vec<usize>> {
    if frames.stride == 0 {
        bail!("--stride must be at least 1");
    }
    let end = frames.frame_end.unwrap_or(available);
    if end > available {
        bail!("--frame-end {end} is past the last frame ({available} available)");
    }
    Ok((frames.frame_start..end).step_by(frames.stride).collect())
}

/// Rasters and timings after fusing one frame.
pub struct Snapshot {
    pub frame: usize,
    pub pose: Pose,
    pub surface: SurfaceSet,
    pub circle: CircularRaster,
    pub cylinder: CylindricalRaster,
    pub depth_circle: CircularRaster,
    pub fuse_ms: f64,
    pub circle_ms: f64,
    pub cylinder_ms: f64,
}

pub struct Pipeline {
    pub map: SparseVoxelMap,
    pub raster: RasterParams,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl Pipeline {
    pub fn new(map: MapParams, raster: RasterParams) -> Result<Self> {
        raster.validate()?;
        Ok(Self {
            map: SparseVoxelMap::new(map)?,
            raster,
        })
    }

    pub fn step(&mut self, frame: usize, pose: &Pose, cloud: &PointCloud) -> Result<Snapshot> {
        let world = transform_to_world(pose, cloud).with_context(|| format!("frame {frame}"))?;
        let t = Instant::now();
        self.map
            .integrate_frame(pose, &world)
            .with_context(|| format!("frame {frame}: fusion"))?;
        let fuse_ms = ms(t);

        let t = Instant::now();
        let surface = extract_surface(&self.map);
        let band = segment_ground(&surface.points, pose.translation.z, &self.raster);
        let circle = rasterize_circle(&band, pose, &self.raster)
            .with_context(|| format!("frame {frame}: circle"))?;
        let circle_ms = ms(t);

        let t = Instant::now();
        let cylinder = rasterize_cylinder(&surface.points, pose, &self.raster)
            .with_context(|| format!("frame {frame}: cylinder"))?;
        let cylinder_ms = ms(t);

        let depth_circle = depth_only_circle(&world.points, pose, &self.raster)?;
        Ok(Snapshot {
            frame,
            pose: *pose,
            surface,
            circle,
            cylinder,
            depth_circle,
            fuse_ms,
            circle_ms,
            cylinder_ms,
        })
    }
}

/// Metrics row for a snapshot; accuracy columns need a ground-truth scene.
pub fn metrics_row(
    snap: &Snapshot,
    truth: Option<&SceneSpec>,
    params: &RasterParams,
    timing: bool,
) -> Result<MetricsRow> {
    let mut row = MetricsRow {
        frame_index: snap.frame,
        ..MetricsRow::default()
    };
    if timing {
        row.fuse_ms = Some(snap.fuse_ms);
        row.circle_ms = Some(snap.circle_ms);
        row.cylinder_ms = Some(snap.cylinder_ms);
        row.elapsed_ms = Some(snap.fuse_ms + snap.circle_ms + snap.cylinder_ms);
    }
    if let Some(scene) = truth {
        let ctx = || format!("frame {}: ground truth", snap.frame);
        let gt_circle = analytic_circle(scene, &snap.pose, params, snap.frame).with_context(ctx)?;
        let gt_cyl = analytic_cylinder(scene, &snap.pose, params, snap.frame).with_context(ctx)?;
        row.rmse_m = rmse(&snap.circle, &gt_circle)?;
        row.coverage = coverage(&snap.circle, &gt_circle).ok();
        row.rmse_cyl_m = rmse(&snap.cylinder, &gt_cyl)?;
        row.coverage_cyl = coverage(&snap.cylinder, &gt_cyl).ok();
        row.depth_rmse_m = rmse(&snap.depth_circle, &gt_circle)?;
        row.depth_coverage = coverage(&snap.depth_circle, &gt_circle).ok();
    }
    Ok(row)
}
