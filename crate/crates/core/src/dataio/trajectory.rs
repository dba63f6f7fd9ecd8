use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::{Pose, Vec3};

use super::{read_text, write_file, DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Timestamped poses in file order, timestamps strictly increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Parses TUM lines `timestamp tx ty tz qx qy qz qw`; `#` starts a comment.
pub fn parse_trajectory_str(text: &str) -> Result<Trajectory> {
    let mut records: Vec<TrajectoryRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(DataError::FieldCount {
                line,
                expected: 8,
                found: fields.len(),
            });
        }
        let mut v = [0.0f64; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse::<f64>().map_err(|_| DataError::Syntax {
                line,
                msg: format!("invalid number `{f}`"),
            })?;
            if !slot.is_finite() {
                return Err(DataError::Syntax {
                    line,
                    msg: format!("non-finite value `{f}`"),
                });
            }
        }
        let [t, tx, ty, tz, qx, qy, qz, qw] = v;
        if let Some(prev) = records.last() {
            if !(t > prev.timestamp) {
                return Err(DataError::Monotonicity {
                    line,
                    timestamp: t,
                    previous: prev.timestamp,
                });
            }
        }
        let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
        if !(0.9..=1.1).contains(&norm) {
            return Err(DataError::QuaternionNorm { line, norm });
        }
        let pose = Pose::from_raw(Vec3::new(tx, ty, tz), qw, qx, qy, qz).map_err(|e| {
            DataError::Syntax {
                line,
                msg: e.to_string(),
            }
        })?;
        records.push(TrajectoryRecord { timestamp: t, pose });
    }
    Ok(Trajectory { records })
}

pub fn parse_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    parse_trajectory_str(&read_text(path.as_ref())?)
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for r in &traj.records {
        let t = r.pose.translation;
        let q = r.pose.rotation.quaternion();
        let _ = writeln!(
            out,
            "{:.6} {} {} {} {} {} {} {}",
            r.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        );
    }
    write_file(path.as_ref(), out.as_bytes())
}
