//! File formats: TUM trajectories, PLY clouds, WAV audio, BRIR manifests and
//! the CSV outputs of the pipeline.
//!
//! Every parser works on in-memory bytes or text and reports failures with a
//! line number or byte offset. The `path` wrappers only add file I/O.

use std::path::{Path, PathBuf};

use thiserror::Error;

mod audio;
mod brir_manifest;
mod csv;
mod ply;
mod trajectory;

pub use audio::{read_wav, read_wav_bytes, wav_bytes, write_wav, AudioBuffer};
pub use brir_manifest::{
    load_brir_store, parse_brir_manifest, parse_brir_manifest_str, write_brir_dataset, BrirEntry,
    BrirManifest, Convention, Rotation,
};
pub use csv::{
    circle_csv_string, cylinder_csv_string, events_csv_string, metrics_csv_string, read_circle_csv,
    read_circle_csv_str, read_cylinder_csv, read_cylinder_csv_str, read_events_csv,
    read_events_csv_str, read_metrics_csv, read_metrics_csv_str, write_circle_csv,
    write_cylinder_csv, write_events_csv, write_map_dump, write_metrics_csv, MetricsRow,
};
pub use ply::{parse_ply, ply_bytes, read_ply_bytes, write_ply, PlyFormat, PlyRead};
pub use trajectory::{
    parse_trajectory, parse_trajectory_str, write_trajectory, Trajectory, TrajectoryRecord,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: timestamp {timestamp} does not increase (previous {previous})")]
    Monotonicity {
        line: usize,
        timestamp: f64,
        previous: f64,
    },
    #[error("line {line}: quaternion norm {norm} outside [0.9, 1.1]")]
    QuaternionNorm { line: usize, norm: f64 },
    #[error("PLY header line {line}: {msg}")]
    PlyHeader { line: usize, msg: String },
    /// Data ends at byte `actual` but `expected` bytes were needed.
    #[error("byte {actual}: truncated {what}, expected {expected} bytes")]
    Truncated {
        what: &'static str,
        expected: u64,
        actual: u64,
    },
    #[error("byte {offset}: {msg}")]
    Binary { offset: u64, msg: String },
    #[error("byte {offset}: unsupported WAV codec, format tag {tag:#06x} ({bits} bits)")]
    UnsupportedCodec { offset: u64, tag: u16, bits: u16 },
    /// `at` is a JSON path such as `entries[3]`.
    #[error("manifest {at}: {msg}")]
    Manifest { at: String, msg: String },
    #[error("manifest entry {index}: duplicate key (azimuth {azimuth_deg} deg, distance {distance_m} m)")]
    DuplicateKey {
        index: usize,
        azimuth_deg: f64,
        distance_m: f64,
    },
    #[error("{path}: sample rate {found} Hz does not match {expected} Hz")]
    SampleRateMismatch {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("BRIR grid incomplete: missing azimuth {azimuth_deg} deg, distance {distance_m} m")]
    MissingGridCell { azimuth_deg: i32, distance_m: f64 },
    #[error("cannot write non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

impl DataError {
    /// Where in the input the problem sits: a path, line, byte offset, JSON
    /// path or index. `None` only for free-form validation messages.
    pub fn position(&self) -> Option<String> {
        use DataError::*;
        Some(match self {
            Io { path, .. } | SampleRateMismatch { path, .. } => path.display().to_string(),
            Syntax { line, .. }
            | FieldCount { line, .. }
            | Monotonicity { line, .. }
            | QuaternionNorm { line, .. }
            | PlyHeader { line, .. } => format!("line {line}"),
            Truncated { actual, .. } => format!("byte {actual}"),
            Binary { offset, .. } | UnsupportedCodec { offset, .. } => format!("byte {offset}"),
            Manifest { at, .. } => at.clone(),
            DuplicateKey { index, .. } => format!("entries[{index}]"),
            MissingGridCell {
                azimuth_deg,
                distance_m,
            } => format!("grid cell ({azimuth_deg} deg, {distance_m} m)"),
            NonFiniteSample(i) => format!("sample {i}"),
            Invalid(_) => return None,
        })
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}
