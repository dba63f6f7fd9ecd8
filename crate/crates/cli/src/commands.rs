use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use sonomap::dataio::{
    parse_brir_manifest, read_circle_csv, read_cylinder_csv, read_metrics_csv, read_wav,
    write_circle_csv, write_cylinder_csv, write_events_csv, write_map_dump, write_metrics_csv,
    write_ply, write_trajectory, write_wav, PlyFormat, Trajectory, TrajectoryRecord,
};
use sonomap::eval::{bearing_variations, coverage, edf_bearing_compare, rmse, timing_stats};
use sonomap::raster::CircularRaster;
use sonomap::sonifier::{aggregate_sectors, render_sweep, BrirStore, Sweep, SweepConfig};
use sonomap::synth::{
    analytic_circle, analytic_cylinder, noise_rng, pan_trajectory, render_depth_frame,
};

use crate::args::{EdfCompareArgs, EvalArgs, RunArgs, SonifyArgs, SweepSettings, SynthGenArgs};
use crate::pipeline::{cloud_path, load_scene, metrics_row, select_frames, Pipeline, Source};

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

pub fn circle_file(dir: &Path, frame: usize) -> PathBuf {
    dir.join("circle").join(format!("circle_{frame:05}.csv"))
}

pub fn cylinder_file(dir: &Path, frame: usize) -> PathBuf {
    dir.join("cylinder")
        .join(format!("cylinder_{frame:05}.csv"))
}

/// BRIRs plus tap and woosh sounds, ready to render sweeps.
struct Sonifier {
    store: BrirStore,
    cfg: SweepConfig,
}

impl Sonifier {
    fn load(brir: &Path, tap: &Path, woosh: &Path, settings: &SweepSettings) -> Result<Self> {
        let store = parse_brir_manifest(brir, settings.require_full_grid)
            .with_context(|| format!("BRIR manifest {}", brir.display()))?;
        let tap = read_wav(tap).with_context(|| format!("tap {}", tap.display()))?;
        let woosh = read_wav(woosh).with_context(|| format!("woosh {}", woosh.display()))?;
        let cfg = SweepConfig {
            sector_deg: settings.sector_deg,
            cadence_s: settings.cadence,
            distance_scale: settings.distance_scale,
            ..SweepConfig::new(tap, woosh)
        };
        Ok(Self { store, cfg })
    }

    fn render(&self, circle: &CircularRaster) -> Result<Sweep> {
        let sectors = aggregate_sectors(circle, self.cfg.sector_deg)?;
        Ok(render_sweep(&sectors, &self.store, &self.cfg)?)
    }
}

fn write_sweep(sweep: &Sweep, wav: &Path, events: &Path) -> Result<()> {
    write_wav(wav, &sweep.audio).with_context(|| format!("writing {}", wav.display()))?;
    write_events_csv(events, &sweep.events)
        .with_context(|| format!("writing {}", events.display()))?;
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<()> {
    let params = args.raster.params(Some(args.map.voxel_size));
    let source = Source::from_args(&args.input, params.optical_axis)?;
    let frames = select_frames(&args.frames, source.len())?;
    let sonifier = match (&args.brir, &args.tap, &args.woosh) {
        (Some(b), Some(t), Some(w)) => Some(Sonifier::load(b, t, w, &args.sweep)?),
        _ => None,
    };
    let out = &args.out;
    create_dir(&out.join("circle"))?;
    create_dir(&out.join("cylinder"))?;
    if sonifier.is_some() {
        create_dir(&out.join("sweep"))?;
    }

    let mut pipeline = Pipeline::new(args.map.params(), params)?;
    let mut rows = Vec::with_capacity(frames.len());
    for &i in &frames {
        let cloud = source.cloud(i)?;
        let snap = pipeline.step(i, &source.pose(i), &cloud)?;
        write_circle_csv(circle_file(out, i), &snap.circle)?;
        write_cylinder_csv(cylinder_file(out, i), &snap.cylinder, &params)?;
        if let Some(s) = &sonifier {
            let sweep = s
                .render(&snap.circle)
                .with_context(|| format!("frame {i}: sonify"))?;
            let dir = out.join("sweep");
            write_sweep(
                &sweep,
                &dir.join(format!("sweep_{i:05}.wav")),
                &dir.join(format!("events_{i:05}.csv")),
            )?;
        }
        let row = metrics_row(&snap, source.truth(), &params, !args.no_timing)?;
        info!(
            "frame {i}: {} voxels, circle {} known, cylinder {} known",
            pipeline.map.len(),
            snap.circle.known_count(),
            snap.cylinder.known_count()
        );
        rows.push(row);
    }
    write_metrics_csv(out.join("metrics.csv"), &rows)?;
    if args.dump_map {
        let cells = pipeline.map.sorted_cells();
        write_map_dump(
            out.join("map.csv"),
            cells.into_iter().map(|(i, v)| (i, v.sdf, v.weight)),
        )?;
    }
    if !args.no_timing {
        let totals: Vec<f64> = rows.iter().filter_map(|r| r.elapsed_ms).collect();
        if let Some(t) = timing_stats(&totals) {
            println!(
                "frames={} median_ms={:.3} max_ms={:.3}",
                t.count, t.median_ms, t.max_ms
            );
        }
    }
    println!("wrote {} frames to {}", rows.len(), out.display());
    Ok(())
}

pub fn sonify(args: &SonifyArgs) -> Result<()> {
    let path = match (&args.circle, &args.run_dir, args.frame) {
        (Some(c), _, _) => c.clone(),
        (None, Some(dir), Some(frame)) => {
            let p = circle_file(dir, frame);
            if !p.is_file() {
                bail!("frame {frame} has no circle raster in {}", dir.display());
            }
            p
        }
        _ => bail!("give --circle or --run-dir with --frame"),
    };
    let circle = read_circle_csv(&path).with_context(|| format!("circle {}", path.display()))?;
    let sonifier = Sonifier::load(&args.brir, &args.tap, &args.woosh, &args.sweep)?;
    let sweep = sonifier.render(&circle)?;
    let events = args
        .events
        .clone()
        .unwrap_or_else(|| args.out.with_extension("csv"));
    write_sweep(&sweep, &args.out, &events)?;
    let taps = sweep
        .events
        .iter()
        .filter(|e| e.distance_m.is_some())
        .count();
    println!(
        "{} events ({} taps, {} wooshes), {:.3} s -> {}",
        sweep.events.len(),
        taps,
        sweep.events.len() - taps,
        sweep.audio.duration_s(),
        args.out.display()
    );
    Ok(())
}

pub fn synth_gen(args: &SynthGenArgs) -> Result<()> {
    let params = args.raster.params(None);
    let axis = params.optical_axis;
    let scene = load_scene(&args.scene)?;
    let camera = args.camera.model(axis);
    let pan = &args.pan;
    if !(pan.frame_period > 0.0) {
        bail!("--frame-period must be positive");
    }
    let poses = pan_trajectory(pan.position, pan.frames, pan.start_yaw, pan.sweep, axis);
    let clouds = args.out.join("clouds");
    let gt = args.out.join("gt");
    create_dir(&clouds)?;
    create_dir(&gt.join("circle"))?;
    create_dir(&gt.join("cylinder"))?;
    let format = if args.ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::BinaryLittleEndian
    };
    let mut records = Vec::with_capacity(poses.len());
    for (i, pose) in poses.iter().enumerate() {
        let mut rng = noise_rng(args.seed);
        rng.set_stream(i as u64);
        let cloud = render_depth_frame(&scene, pose, &camera, i, &mut rng)
            .with_context(|| format!("frame {i}"))?;
        let timestamp = i as f64 * pan.frame_period;
        write_ply(cloud_path(&clouds, timestamp), &cloud.points, format)?;
        let circle =
            analytic_circle(&scene, pose, &params, i).with_context(|| format!("frame {i}"))?;
        let cylinder =
            analytic_cylinder(&scene, pose, &params, i).with_context(|| format!("frame {i}"))?;
        write_circle_csv(circle_file(&gt, i), &circle)?;
        write_cylinder_csv(cylinder_file(&gt, i), &cylinder, &params)?;
        records.push(TrajectoryRecord {
            timestamp,
            pose: *pose,
        });
    }
    write_trajectory(args.out.join("trajectory.txt"), &Trajectory { records })?;
    println!("wrote {} frames to {}", poses.len(), args.out.display());
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn edf_compare(args: &EdfCompareArgs) -> Result<()> {
    let params = args.raster.params(Some(args.map.voxel_size));
    let source = Source::from_args(&args.input, params.optical_axis)?;
    let frames = select_frames(&args.frames, source.len())?;
    if !frames.contains(&args.frame) {
        bail!("frame {} is not among the selected frames", args.frame);
    }
    let mut pipeline = Pipeline::new(args.map.params(), params)?;
    let mut last = None;
    for &i in frames.iter().take_while(|&&i| i <= args.frame) {
        let cloud = source.cloud(i)?;
        last = Some(pipeline.step(i, &source.pose(i), &cloud)?);
    }
    let snap = last.expect("target frame is selected");
    let records = edf_bearing_compare(&snap.circle, &snap.surface)
        .with_context(|| format!("frame {}", args.frame))?;
    let mut s = String::from(
        "bin,circle_bearing_deg,circle_range_m,query_x,query_y,query_z,edf_distance_m,grad_x,grad_y,grad_z,gradient_bearing_deg,angle_diff_deg\n",
    );
    for r in &records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.bin,
            r.circle_bearing_deg,
            r.circle_range_m,
            r.query[0],
            r.query[1],
            r.query[2],
            r.edf_distance_m,
            r.edf_gradient[0],
            r.edf_gradient[1],
            r.edf_gradient[2],
            opt(r.gradient_bearing_deg),
            opt(r.angle_diff_deg)
        );
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&args.out, s).with_context(|| format!("writing {}", args.out.display()))?;
    let (circle_tv, edf_tv) = bearing_variations(&records);
    let ratio = if circle_tv > 0.0 {
        edf_tv / circle_tv
    } else {
        f64::NAN
    };
    println!(
        "bins={} circle_tv_deg={circle_tv} edf_tv_deg={edf_tv} ratio={ratio:.3}",
        records.len()
    );
    Ok(())
}

/// Frame numbers of `<dir>/circle/circle_NNNNN.csv` files, sorted.
fn circle_frames(dir: &Path) -> Result<Vec<usize>> {
    let circle_dir = dir.join("circle");
    let mut frames = Vec::new();
    for entry in
        fs::read_dir(&circle_dir).with_context(|| format!("listing {}", circle_dir.display()))?
    {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(n) = name
            .strip_prefix("circle_")
            .and_then(|n| n.strip_suffix(".csv"))
        {
            if let Ok(f) = n.parse() {
                frames.push(f);
            }
        }
    }
    frames.sort_unstable();
    Ok(frames)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let frames = circle_frames(&args.run)?;
    if frames.is_empty() {
        bail!("no circle rasters under {}", args.run.display());
    }
    let mut s =
        String::from("frame_index,rmse_m,coverage_fraction,rmse_cyl_m,coverage_cyl_fraction\n");
    for &i in &frames {
        let est = read_circle_csv(circle_file(&args.run, i))?;
        let truth_path = circle_file(&args.truth, i);
        let truth = read_circle_csv(&truth_path)
            .with_context(|| format!("frame {i}: {}", truth_path.display()))?;
        let mut line = format!(
            "{i},{},{}",
            opt(rmse(&est, &truth)?),
            opt(coverage(&est, &truth).ok())
        );
        let (est_c, truth_c) = (cylinder_file(&args.run, i), cylinder_file(&args.truth, i));
        if est_c.is_file() && truth_c.is_file() {
            let (a, _) = read_cylinder_csv(&est_c)?;
            let (b, _) = read_cylinder_csv(&truth_c)?;
            let _ = write!(
                line,
                ",{},{}",
                opt(rmse(&a, &b)?),
                opt(coverage(&a, &b).ok())
            );
        } else {
            line.push_str(",,");
        }
        s.push_str(&line);
        s.push('\n');
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.run.join("eval.csv"));
    fs::write(&out, s).with_context(|| format!("writing {}", out.display()))?;
    println!("scored {} frames -> {}", frames.len(), out.display());

    let metrics = args.run.join("metrics.csv");
    if metrics.is_file() {
        let rows = read_metrics_csv(&metrics)?;
        let totals: Vec<f64> = rows.iter().filter_map(|r| r.elapsed_ms).collect();
        match timing_stats(&totals) {
            Some(t) => println!(
                "timing: frames={} median_ms={:.3} max_ms={:.3}",
                t.count, t.median_ms, t.max_ms
            ),
            None => println!("timing: not recorded"),
        }
    }
    Ok(())
}
