//! Plain CSV outputs: rasters, sweep event logs, per-frame metrics and the
//! voxel map dump.
//!
//! Raster files start with a `# center x y z heading hx hy` comment so a read
//! reproduces the raster including its frame. Floats are written in Rust's
//! shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_file, DataError, Result};
use crate::geometry::{Vec2, Vec3};
use crate::raster::{CircularRaster, CylindricalRaster, RasterParams, CIRCLE_BINS};
use crate::sonifier::{EventKind, SonoEvent};

const CIRCLE_HEADER: &str = "angle_deg,range_m,known";
const CYLINDER_HEADER: &str = "angle_deg,elevation_m,range_m,known";
const EVENTS_HEADER: &str = "onset_s,sector,kind,azimuth_deg,distance_m,semitones";
const METRICS_HEADER: &str =
    "frame_index,rmse_m,coverage_fraction,elapsed_ms,rmse_cyl_m,coverage_cyl_fraction,\
depth_rmse_m,depth_coverage_fraction,fuse_ms,circle_ms,cylinder_ms";
const MAP_HEADER: &str = "ix,iy,iz,sdf,weight";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn frame_comment(center: &Vec3, heading: &Vec2) -> String {
    format!(
        "# center {} {} {} heading {} {}\n",
        center.x, center.y, center.z, heading.x, heading.y
    )
}

fn syntax(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| syntax(line, format!("bad {what} `{field}`")))
}

fn parse_opt(line: usize, field: &str, what: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(line, field, what).map(Some)
    }
}

/// Data lines with 1-based line numbers, after an optional frame comment and
/// a mandatory header.
struct Lines<'a> {
    frame: Option<(Vec3, Vec2)>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn split_table<'a>(text: &'a str, header: &str) -> Result<Lines<'a>> {
    let mut frame = None;
    let mut rows = Vec::new();
    let mut header_seen = false;
    let expected = header.split(',').count();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let t: Vec<&str> = rest.split_whitespace().collect();
            if t.len() == 7 && t[0] == "center" && t[4] == "heading" {
                let v: Vec<f64> = [1, 2, 3, 5, 6]
                    .iter()
                    .map(|&k| parse_f64(line, t[k], "frame value"))
                    .collect::<Result<_>>()?;
                frame = Some((Vec3::new(v[0], v[1], v[2]), Vec2::new(v[3], v[4])));
            }
            continue;
        }
        if !header_seen {
            if trimmed != header {
                return Err(syntax(line, format!("expected header `{header}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != expected {
            return Err(DataError::FieldCount {
                line,
                expected,
                found: fields.len(),
            });
        }
        rows.push((line, fields));
    }
    if !header_seen {
        return Err(syntax(1, format!("missing header `{header}`")));
    }
    Ok(Lines { frame, rows })
}

fn parse_known(line: usize, field: &str, range: Option<f64>) -> Result<Option<f64>> {
    match (field.trim(), range) {
        ("1", Some(r)) => Ok(Some(r)),
        ("0", None) => Ok(None),
        ("1", None) => Err(syntax(line, "known=1 without a range")),
        ("0", Some(_)) => Err(syntax(line, "known=0 with a range")),
        (f, _) => Err(syntax(line, format!("bad known flag `{f}`"))),
    }
}

fn parse_angle(line: usize, field: &str) -> Result<usize> {
    let a: usize = field
        .trim()
        .parse()
        .map_err(|_| syntax(line, format!("bad angle `{field}`")))?;
    if a >= CIRCLE_BINS {
        return Err(syntax(line, format!("angle {a} outside 0..360")));
    }
    Ok(a)
}

pub fn circle_csv_string(raster: &CircularRaster) -> String {
    let mut s = frame_comment(&raster.center, &raster.heading);
    s.push_str(CIRCLE_HEADER);
    s.push('\n');
    for (angle, bin) in raster.bins.iter().enumerate() {
        let _ = writeln!(s, "{angle},{},{}", opt(*bin), bin.is_some() as u8);
    }
    s
}

pub fn write_circle_csv(path: impl AsRef<Path>, raster: &CircularRaster) -> Result<()> {
    write_file(path.as_ref(), circle_csv_string(raster).as_bytes())
}

pub fn read_circle_csv_str(text: &str) -> Result<CircularRaster> {
    let lines = split_table(text, CIRCLE_HEADER)?;
    let (center, heading) = lines.frame.unwrap_or((Vec3::zeros(), Vec2::new(1.0, 0.0)));
    let mut raster = CircularRaster::unknown(center, heading);
    let mut seen = [false; CIRCLE_BINS];
    for (line, f) in &lines.rows {
        let angle = parse_angle(*line, f[0])?;
        if std::mem::replace(&mut seen[angle], true) {
            return Err(syntax(*line, format!("angle {angle} repeated")));
        }
        raster.bins[angle] = parse_known(*line, f[2], parse_opt(*line, f[1], "range")?)?;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(DataError::Invalid(format!(
            "circle CSV lacks angle {missing}"
        )));
    }
    Ok(raster)
}

pub fn read_circle_csv(path: impl AsRef<Path>) -> Result<CircularRaster> {
    read_circle_csv_str(&read_text(path.as_ref())?)
}

/// Rows run angle-major; `elevation_m` is the row center.
pub fn cylinder_csv_string(raster: &CylindricalRaster, params: &RasterParams) -> String {
    let mut s = frame_comment(&raster.center, &raster.heading);
    s.push_str(CYLINDER_HEADER);
    s.push('\n');
    for angle in 0..CIRCLE_BINS {
        for row in 0..raster.rows {
            let cell = raster.get(angle, row);
            let _ = writeln!(
                s,
                "{angle},{},{},{}",
                params.row_center(row),
                opt(cell),
                cell.is_some() as u8
            );
        }
    }
    s
}

pub fn write_cylinder_csv(
    path: impl AsRef<Path>,
    raster: &CylindricalRaster,
    params: &RasterParams,
) -> Result<()> {
    write_file(
        path.as_ref(),
        cylinder_csv_string(raster, params).as_bytes(),
    )
}

/// Returns the raster and its row elevations in ascending order.
pub fn read_cylinder_csv_str(text: &str) -> Result<(CylindricalRaster, Vec<f64>)> {
    let lines = split_table(text, CYLINDER_HEADER)?;
    let mut elevations: Vec<f64> = Vec::new();
    for (line, f) in &lines.rows {
        let e = parse_f64(*line, f[1], "elevation")?;
        if !elevations.contains(&e) {
            elevations.push(e);
        }
    }
    elevations.sort_by(f64::total_cmp);
    let rows = elevations.len();
    if lines.rows.len() != rows * CIRCLE_BINS {
        return Err(DataError::Invalid(format!(
            "cylinder CSV has {} cells, expected 360 x {rows}",
            lines.rows.len()
        )));
    }
    let (center, heading) = lines.frame.unwrap_or((Vec3::zeros(), Vec2::new(1.0, 0.0)));
    let mut raster = CylindricalRaster::unknown(center, heading, rows);
    let mut seen = vec![false; rows * CIRCLE_BINS];
    for (line, f) in &lines.rows {
        let angle = parse_angle(*line, f[0])?;
        let e = parse_f64(*line, f[1], "elevation")?;
        let row = elevations
            .iter()
            .position(|x| *x == e)
            .expect("collected above");
        if std::mem::replace(&mut seen[row * CIRCLE_BINS + angle], true) {
            return Err(syntax(*line, format!("cell ({angle}, {e}) repeated")));
        }
        raster.set(
            angle,
            row,
            parse_known(*line, f[3], parse_opt(*line, f[2], "range")?)?,
        );
    }
    Ok((raster, elevations))
}

pub fn read_cylinder_csv(path: impl AsRef<Path>) -> Result<(CylindricalRaster, Vec<f64>)> {
    read_cylinder_csv_str(&read_text(path.as_ref())?)
}

pub fn events_csv_string(events: &[SonoEvent]) -> String {
    let mut s = String::from(EVENTS_HEADER);
    s.push('\n');
    for e in events {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.onset_s,
            e.sector,
            e.kind.as_str(),
            e.azimuth_deg,
            opt(e.distance_m),
            e.semitones
        );
    }
    s
}

pub fn write_events_csv(path: impl AsRef<Path>, events: &[SonoEvent]) -> Result<()> {
    write_file(path.as_ref(), events_csv_string(events).as_bytes())
}

pub fn read_events_csv_str(text: &str) -> Result<Vec<SonoEvent>> {
    let lines = split_table(text, EVENTS_HEADER)?;
    lines
        .rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            let kind = match f[2].trim() {
                "tap" => EventKind::Tap,
                "woosh" => EventKind::Woosh,
                k => return Err(syntax(line, format!("bad kind `{k}`"))),
            };
            Ok(SonoEvent {
                onset_s: parse_f64(line, f[0], "onset")?,
                sector: f[1]
                    .trim()
                    .parse()
                    .map_err(|_| syntax(line, "bad sector"))?,
                kind,
                azimuth_deg: parse_f64(line, f[3], "azimuth")?,
                distance_m: parse_opt(line, f[4], "distance")?,
                semitones: f[5]
                    .trim()
                    .parse()
                    .map_err(|_| syntax(line, "bad semitones"))?,
            })
        })
        .collect()
}

pub fn read_events_csv(path: impl AsRef<Path>) -> Result<Vec<SonoEvent>> {
    read_events_csv_str(&read_text(path.as_ref())?)
}

/// One line of `metrics.csv`. Absent values are written as empty fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsRow {
    pub frame_index: usize,
    pub rmse_m: Option<f64>,
    pub coverage: Option<f64>,
    /// fuse + circle + cylinder.
    pub elapsed_ms: Option<f64>,
    pub rmse_cyl_m: Option<f64>,
    pub coverage_cyl: Option<f64>,
    pub depth_rmse_m: Option<f64>,
    pub depth_coverage: Option<f64>,
    pub fuse_ms: Option<f64>,
    pub circle_ms: Option<f64>,
    pub cylinder_ms: Option<f64>,
}

pub fn metrics_csv_string(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.frame_index,
            opt(r.rmse_m),
            opt(r.coverage),
            opt(r.elapsed_ms),
            opt(r.rmse_cyl_m),
            opt(r.coverage_cyl),
            opt(r.depth_rmse_m),
            opt(r.depth_coverage),
            opt(r.fuse_ms),
            opt(r.circle_ms),
            opt(r.cylinder_ms)
        );
    }
    s
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    write_file(path.as_ref(), metrics_csv_string(rows).as_bytes())
}

pub fn read_metrics_csv_str(text: &str) -> Result<Vec<MetricsRow>> {
    let lines = split_table(text, METRICS_HEADER)?;
    lines
        .rows
        .iter()
        .map(|(line, f)| {
            let line = *line;
            let o = |k: usize| parse_opt(line, f[k], "metric");
            Ok(MetricsRow {
                frame_index: f[0]
                    .trim()
                    .parse()
                    .map_err(|_| syntax(line, "bad frame_index"))?,
                rmse_m: o(1)?,
                coverage: o(2)?,
                elapsed_ms: o(3)?,
                rmse_cyl_m: o(4)?,
                coverage_cyl: o(5)?,
                depth_rmse_m: o(6)?,
                depth_coverage: o(7)?,
                fuse_ms: o(8)?,
                circle_ms: o(9)?,
                cylinder_ms: o(10)?,
            })
        })
        .collect()
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    read_metrics_csv_str(&read_text(path.as_ref())?)
}

/// `ix,iy,iz,sdf,weight` for each cell, in the given order.
pub fn write_map_dump<I>(path: impl AsRef<Path>, cells: I) -> Result<()>
where
    I: IntoIterator<Item = ([i64; 3], f64, f64)>,
{
    let mut s = String::from(MAP_HEADER);
    s.push('\n');
    for ([x, y, z], sdf, w) in cells {
        let _ = writeln!(s, "{x},{y},{z},{sdf},{w}");
    }
    write_file(path.as_ref(), s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unknown_circle_rows() {
        let c = CircularRaster::unknown(Vec3::zeros(), Vec2::new(1.0, 0.0));
        let text = circle_csv_string(&c);
        let data: Vec<&str> = text.lines().skip(2).collect();
        assert_eq!(data.len(), 360);
        assert!(data.iter().all(|l| l.ends_with(",,0")));
    }

    #[test]
    fn known_row_format() {
        let mut c = CircularRaster::unknown(Vec3::zeros(), Vec2::new(1.0, 0.0));
        c.bins[90] = Some(2.5);
        assert!(circle_csv_string(&c).lines().any(|l| l == "90,2.5,1"));
    }

    #[test]
    fn cylinder_round_trip() {
        let params = RasterParams::default();
        let mut c = CylindricalRaster::unknown(
            Vec3::new(1.0, 2.0, 1.2),
            Vec2::new(0.0, 1.0),
            params.elevation_rows,
        );
        c.set(10, 0, Some(3.0));
        c.set(359, 18, Some(0.1 + 0.2));
        let (back, elev) = read_cylinder_csv_str(&cylinder_csv_string(&c, &params)).unwrap();
        assert_eq!(back, c);
        assert_eq!(elev.len(), 19);
        assert!((elev[0] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn positioned_errors() {
        let mut text =
            circle_csv_string(&CircularRaster::unknown(Vec3::zeros(), Vec2::new(1.0, 0.0)));
        text = text.replacen("5,,0", "5,abc,1", 1);
        assert!(matches!(
            read_circle_csv_str(&text),
            Err(DataError::Syntax { line: 8, .. })
        ));
        assert!(matches!(
            read_circle_csv_str("angle_deg,range_m,known\n0,1\n"),
            Err(DataError::FieldCount { line: 2, .. })
        ));
        assert!(read_circle_csv_str("nope\n").is_err());
        assert!(read_circle_csv_str("").is_err());
    }

    #[test]
    fn events_round_trip() {
        let ev = vec![
            SonoEvent {
                onset_s: 0.0,
                sector: 0,
                kind: EventKind::Tap,
                azimuth_deg: 7.0,
                distance_m: Some(1.5),
                semitones: 0,
            },
            SonoEvent {
                onset_s: 0.1,
                sector: 1,
                kind: EventKind::Woosh,
                azimuth_deg: 15.0,
                distance_m: None,
                semitones: 0,
            },
        ];
        assert_eq!(read_events_csv_str(&events_csv_string(&ev)).unwrap(), ev);
    }

    #[test]
    fn metrics_round_trip() {
        let rows = vec![
            MetricsRow {
                frame_index: 3,
                rmse_m: Some(0.012),
                coverage: Some(0.25),
                ..Default::default()
            },
            MetricsRow::default(),
        ];
        let text = metrics_csv_string(&rows);
        assert!(text.starts_with("frame_index,rmse_m,coverage_fraction,elapsed_ms,"));
        assert_eq!(read_metrics_csv_str(&text).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn circle_round_trip(bins in prop::collection::vec(prop::option::of(1e-6f64..10.0), 360),
                             cx in -5.0f64..5.0, hy in -1.0f64..1.0) {
            let mut c = CircularRaster::unknown(Vec3::new(cx, -cx, 1.0), Vec2::new(1.0, hy).normalize());
            c.bins = bins;
            prop_assert_eq!(read_circle_csv_str(&circle_csv_string(&c)).unwrap(), c);
        }

        #[test]
        fn reader_never_panics(text in "[0-9a-z,.#\\n -]{0,300}") {
            let _ = read_circle_csv_str(&text);
            let _ = read_cylinder_csv_str(&text);
            let _ = read_events_csv_str(&text);
            let _ = read_metrics_csv_str(&text);
        }
    }
}
