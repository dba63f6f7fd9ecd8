//! JSON manifest listing one stereo (or left/right mono pair) WAV per
//! `(azimuth, distance)` grid cell.
//!
//! ```json
//! {"sample_rate": 48000,
//!  "convention": {"azimuth_zero": "front", "positive": "ccw"},
//!  "entries": [{"azimuth_deg": 0, "distance_m": 0.4, "wav": "az0_d0.4.wav"}]}
//! ```
//!
//! Relative WAV paths resolve against the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audio::{read_wav, write_wav, AudioBuffer};
use super::{read_text, write_file, DataError, Result};
use crate::sonifier::{Brir, BrirStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    #[default]
    Ccw,
    Cw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Convention {
    #[serde(default = "front")]
    pub azimuth_zero: String,
    #[serde(default)]
    pub positive: Rotation,
}

fn front() -> String {
    "front".into()
}

impl Default for Convention {
    fn default() -> Self {
        Self {
            azimuth_zero: front(),
            positive: Rotation::Ccw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrirEntry {
    pub azimuth_deg: f64,
    pub distance_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrirManifest {
    pub sample_rate: u32,
    #[serde(default)]
    pub convention: Convention,
    pub entries: Vec<BrirEntry>,
}

impl BrirManifest {
    /// Azimuth of `entry` in the internal front-zero, counter-clockwise convention.
    pub fn ccw_azimuth(&self, entry: &BrirEntry) -> f64 {
        match self.convention.positive {
            Rotation::Ccw => entry.azimuth_deg,
            Rotation::Cw => -entry.azimuth_deg,
        }
    }
}

fn manifest_err(at: &str, msg: String) -> DataError {
    DataError::Manifest { at: at.into(), msg }
}

/// Parses and validates the manifest structure without touching any WAV.
pub fn parse_brir_manifest_str(text: &str) -> Result<BrirManifest> {
    let m: BrirManifest = serde_json::from_str(text).map_err(|e| DataError::Syntax {
        line: e.line(),
        msg: format!("column {}: {e}", e.column()),
    })?;
    if m.sample_rate == 0 {
        return Err(manifest_err("sample_rate", "must be positive".into()));
    }
    if m.convention.azimuth_zero != "front" {
        return Err(manifest_err(
            "convention.azimuth_zero",
            format!(
                "unsupported value `{}` (only `front`)",
                m.convention.azimuth_zero
            ),
        ));
    }
    for (index, e) in m.entries.iter().enumerate() {
        if !e.azimuth_deg.is_finite() || !(e.distance_m.is_finite() && e.distance_m > 0.0) {
            return Err(manifest_err(
                &format!("entries[{index}]"),
                "non-finite azimuth or non-positive distance".into(),
            ));
        }
        let stereo = e.wav.is_some();
        let pair = e.left.is_some() && e.right.is_some();
        let partial = e.left.is_some() != e.right.is_some();
        if stereo == pair || partial {
            return Err(manifest_err(
                &format!("entries[{index}]"),
                "give either `wav` or both `left` and `right`".into(),
            ));
        }
    }
    let mut seen = BrirStore::new(m.sample_rate);
    for (index, e) in m.entries.iter().enumerate() {
        if !seen.insert(m.ccw_azimuth(e), e.distance_m, Brir::identity()) {
            return Err(DataError::DuplicateKey {
                index,
                azimuth_deg: e.azimuth_deg,
                distance_m: e.distance_m,
            });
        }
    }
    Ok(m)
}

fn load_checked(path: &Path, sample_rate: u32) -> Result<AudioBuffer> {
    let buf = read_wav(path)?;
    if buf.sample_rate != sample_rate {
        return Err(DataError::SampleRateMismatch {
            path: path.to_owned(),
            expected: sample_rate,
            found: buf.sample_rate,
        });
    }
    Ok(buf)
}

fn mono_of(path: &Path, buf: AudioBuffer) -> Result<Vec<f32>> {
    if buf.channels != 1 {
        return Err(DataError::Invalid(format!(
            "{}: expected a mono WAV",
            path.display()
        )));
    }
    Ok(buf.samples)
}

/// Decodes every WAV of `manifest` into a store. Relative paths resolve
/// against `base_dir`.
pub fn load_brir_store(
    manifest: &BrirManifest,
    base_dir: &Path,
    require_full_grid: bool,
) -> Result<BrirStore> {
    let resolve = |p: &PathBuf| {
        if p.is_absolute() {
            p.clone()
        } else {
            base_dir.join(p)
        }
    };
    let mut store = BrirStore::new(manifest.sample_rate);
    for e in &manifest.entries {
        let brir = match (&e.wav, &e.left, &e.right) {
            (Some(w), _, _) => {
                let path = resolve(w);
                let buf = load_checked(&path, manifest.sample_rate)?;
                if buf.channels != 2 {
                    return Err(DataError::Invalid(format!(
                        "{}: expected a stereo WAV",
                        path.display()
                    )));
                }
                Brir {
                    left: buf.channel(0),
                    right: buf.channel(1),
                }
            }
            (None, Some(l), Some(r)) => {
                let (lp, rp) = (resolve(l), resolve(r));
                Brir {
                    left: mono_of(&lp, load_checked(&lp, manifest.sample_rate)?)?,
                    right: mono_of(&rp, load_checked(&rp, manifest.sample_rate)?)?,
                }
            }
            _ => unreachable!("validated by parse_brir_manifest_str"),
        };
        store.insert(manifest.ccw_azimuth(e), e.distance_m, brir);
    }
    if require_full_grid {
        if let Some((azimuth_deg, distance_m)) = store.first_missing_grid_cell() {
            return Err(DataError::MissingGridCell {
                azimuth_deg,
                distance_m,
            });
        }
    }
    Ok(store)
}

/// Reads a manifest file and all WAVs it references.
pub fn parse_brir_manifest(path: impl AsRef<Path>, require_full_grid: bool) -> Result<BrirStore> {
    let path = path.as_ref();
    let manifest = parse_brir_manifest_str(&read_text(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    load_brir_store(&manifest, base, require_full_grid)
}

/// Writes `store` as `manifest.json` plus one stereo WAV per entry into `dir`.
pub fn write_brir_dataset(dir: impl AsRef<Path>, store: &BrirStore) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut entries = Vec::with_capacity(store.len());
    for key in store.keys() {
        let brir = store.get(key).expect("key from store");
        let name = format!(
            "brir_az{:+08.3}_d{:.3}.wav",
            key.azimuth_deg(),
            key.distance_m()
        );
        let n = brir.left.len().max(brir.right.len());
        let mut l = brir.left.clone();
        let mut r = brir.right.clone();
        l.resize(n, 0.0);
        r.resize(n, 0.0);
        write_wav(
            dir.join(&name),
            &AudioBuffer::stereo(store.sample_rate(), &l, &r),
        )?;
        entries.push(BrirEntry {
            azimuth_deg: key.azimuth_deg(),
            distance_m: key.distance_m(),
            wav: Some(name.into()),
            left: None,
            right: None,
        });
    }
    let manifest = BrirManifest {
        sample_rate: store.sample_rate(),
        convention: Convention::default(),
        entries,
    };
    let path = dir.join("manifest.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| DataError::Invalid(e.to_string()))?;
    write_file(&path, text.as_bytes())?;
    Ok(path)
}
