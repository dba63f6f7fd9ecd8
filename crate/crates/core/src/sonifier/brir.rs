//! Binaural room impulse responses indexed on an (azimuth, distance) grid.
//!
//! Azimuths are degrees with 0 = front and positive counter-clockwise
//! (positive = listener's left), stored in `(-180, 180]`. The recorded grid
//! has 120 azimuths every 3 degrees from -177 to 180 and 10 distances from
//! 0.4 m to 4.0 m in 0.4 m steps.

use std::collections::BTreeMap;

use super::SonifyError;

pub const GRID_AZIMUTH_STEP_DEG: i32 = 3;
pub const GRID_AZIMUTH_MIN_DEG: i32 = -177;
pub const GRID_AZIMUTH_MAX_DEG: i32 = 180;
pub const GRID_DISTANCE_STEP_M: f64 = 0.4;
pub const GRID_DISTANCE_COUNT: usize = 10;
pub const MIN_DISTANCE_M: f64 = 0.4;
pub const MAX_DISTANCE_M: f64 = 4.0;

/// Slack so exact ties snap in the documented direction despite rounding.
const TIE_EPS: f64 = 1e-9;

pub fn grid_azimuths() -> impl Iterator<Item = i32> {
    (GRID_AZIMUTH_MIN_DEG..=GRID_AZIMUTH_MAX_DEG).step_by(GRID_AZIMUTH_STEP_DEG as usize)
}

pub fn grid_distances() -> impl Iterator<Item = f64> {
    (1..=GRID_DISTANCE_COUNT).map(|k| k as f64 * GRID_DISTANCE_STEP_M)
}

/// Maps any azimuth in degrees into `(-180, 180]`.
pub fn signed_azimuth(az_deg: f64) -> f64 {
    let w = az_deg.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Quantized lookup key; millidegrees and millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BrirKey {
    azimuth_mdeg: i64,
    distance_mm: i64,
}

impl BrirKey {
    pub fn new(azimuth_deg: f64, distance_m: f64) -> Self {
        let mut az = (signed_azimuth(azimuth_deg) * 1000.0).round() as i64;
        if az <= -180_000 {
            az += 360_000;
        }
        Self {
            azimuth_mdeg: az,
            distance_mm: (distance_m * 1000.0).round() as i64,
        }
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_mdeg as f64 / 1000.0
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_mm as f64 / 1000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Brir {
    pub left: Vec<f32>,
    pub right: Vec<f32>,
}

impl Brir {
    /// Unit impulse in both ears.
    pub fn identity() -> Self {
        Self {
            left: vec![1.0],
            right: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrirStore {
    sample_rate: u32,
    entries: BTreeMap<BrirKey, Brir>,
}

impl BrirStore {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            entries: BTreeMap::new(),
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds an entry; returns `false` (and keeps the old one) on a duplicate key.
    pub fn insert(&mut self, azimuth_deg: f64, distance_m: f64, brir: Brir) -> bool {
        match self.entries.entry(BrirKey::new(azimuth_deg, distance_m)) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(brir);
                true
            }
        }
    }

    pub fn get(&self, key: &BrirKey) -> Option<&Brir> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &BrirKey> {
        self.entries.keys()
    }

    /// First cell of the recorded grid (azimuth-major) absent from the store.
    pub fn first_missing_grid_cell(&self) -> Option<(i32, f64)> {
        for az in grid_azimuths() {
            for d in grid_distances() {
                if !self.entries.contains_key(&BrirKey::new(az as f64, d)) {
                    return Some((az, d));
                }
            }
        }
        None
    }

    pub fn is_full_grid(&self) -> bool {
        self.first_missing_grid_cell().is_none()
    }
}

/// Nearest grid azimuth (degrees) and distance (meters).
///
/// The azimuth is first made signed by subtracting 360 above 180. Ties
/// round toward +azimuth and toward the larger distance. -180 folds onto 180.
pub fn snap_to_grid(azimuth_deg: f64, distance_m: f64) -> (i32, f64) {
    let az = signed_azimuth(azimuth_deg);
    let step = GRID_AZIMUTH_STEP_DEG as f64;
    let mut snapped = ((az / step + 0.5 + TIE_EPS).floor() * step) as i32;
    if snapped <= -180 {
        snapped += 360;
    }
    let k = (distance_m / GRID_DISTANCE_STEP_M + 0.5 + TIE_EPS).floor();
    let k = k.clamp(1.0, GRID_DISTANCE_COUNT as f64);
    (snapped, k * GRID_DISTANCE_STEP_M)
}

/// Looks up the grid entry nearest to a raster azimuth in `[0, 360)` and a
/// clamped distance.
pub fn select_brir(
    store: &BrirStore,
    azimuth_deg: f64,
    distance_m: f64,
) -> Result<(BrirKey, &Brir), SonifyError> {
    let (az, d) = snap_to_grid(azimuth_deg, distance_m);
    let key = BrirKey::new(az as f64, d);
    store
        .get(&key)
        .map(|b| (key, b))
        .ok_or(SonifyError::MissingGridCell {
            azimuth_deg: az,
            distance_m: d,
        })
}

/// Parameters of the spherical-head test fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalHead {
    pub radius_m: f64,
    pub speed_of_sound: f64,
    /// Extra attenuation of the far ear for a fully lateral source.
    pub max_ild_db: f64,
}

impl Default for SphericalHead {
    fn default() -> Self {
        Self {
            radius_m: 0.0875,
            speed_of_sound: 343.0,
            max_ild_db: 6.0,
        }
    }
}

impl SphericalHead {
    /// Interaural time difference (Woodworth) for a source at `azimuth_deg`.
    pub fn itd_s(&self, azimuth_deg: f64) -> f64 {
        let az = signed_azimuth(azimuth_deg).to_radians().abs();
        let lateral = if az > std::f64::consts::FRAC_PI_2 {
            std::f64::consts::PI - az
        } else {
            az
        };
        self.radius_m / self.speed_of_sound * (lateral + lateral.sin())
    }

    /// A pair of delayed unit impulses scaled by `0.4 / distance`.
    ///
    /// This is a synthetic fixture, not a measured response.
    pub fn brir(&self, azimuth_deg: f64, distance_m: f64, sample_rate: u32) -> Brir {
        let sr = sample_rate as f64;
        let len =
            ((MAX_DISTANCE_M / self.speed_of_sound + self.itd_s(90.0)) * sr).ceil() as usize + 2;
        let gain = (MIN_DISTANCE_M / distance_m) as f32;
        let az = signed_azimuth(azimuth_deg);
        let far_gain =
            gain * 10f64.powf(-self.max_ild_db * az.to_radians().sin().abs() / 20.0) as f32;
        let near = (distance_m / self.speed_of_sound * sr).round() as usize;
        let far = ((distance_m / self.speed_of_sound + self.itd_s(az)) * sr).round() as usize;
        let mut left = vec![0.0f32; len];
        let mut right = vec![0.0f32; len];
        // positive azimuth = source on the left
        if az >= 0.0 {
            left[near] = gain;
            right[far] = far_gain;
        } else {
            right[near] = gain;
            left[far] = far_gain;
        }
        Brir { left, right }
    }

    /// The full 120 x 10 grid at `sample_rate`.
    pub fn store(&self, sample_rate: u32) -> BrirStore {
        let mut store = BrirStore::new(sample_rate);
        for az in grid_azimuths() {
            for d in grid_distances() {
                store.insert(az as f64, d, self.brir(az as f64, d, sample_rate));
            }
        }
        store
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn grid_has_120_by_10_cells() {
        assert_eq!(grid_azimuths().count(), 120);
        assert_eq!(grid_distances().count(), 10);
        assert_eq!(grid_azimuths().last(), Some(180));
        let s = SphericalHead::default().store(8000);
        assert_eq!(s.len(), 1200);
        assert!(s.is_full_grid());
    }

    #[test]
    fn snapping_examples() {
        assert_eq!(snap_to_grid(44.0, 1.1), (45, 1.2000000000000002));
        assert_eq!(snap_to_grid(359.0, 0.4).0, 0);
        assert_eq!(snap_to_grid(359.0, 0.4).1, 0.4);
        // -178.5 lies halfway between 180 (= -180) and -177; ties go toward +azimuth
        assert_eq!(snap_to_grid(181.5, 4.0), (-177, 4.0));
        // -180 is the same direction as 180
        assert_eq!(snap_to_grid(180.0, 4.0).0, 180);
        assert_eq!(snap_to_grid(178.6, 4.0).0, 180);
        assert_eq!(snap_to_grid(181.4, 4.0).0, 180);
        // distance ties go to the larger cell
        assert_eq!(snap_to_grid(0.0, 0.6).1, 0.8);
        assert_eq!(snap_to_grid(0.0, 0.2).1, 0.4);
    }

    #[test]
    fn snapping_covers_every_grid_azimuth() {
        // enumerate the snap over [0, 360) in 0.01 degree steps
        let mut seen = BTreeSet::new();
        for i in 0..36_000 {
            let (az, _) = snap_to_grid(i as f64 * 0.01, 1.0);
            assert!((GRID_AZIMUTH_MIN_DEG..=GRID_AZIMUTH_MAX_DEG).contains(&az));
            assert_eq!(az % 3, 0);
            seen.insert(az);
        }
        let expected: BTreeSet<i32> = grid_azimuths().collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn missing_cell_reported() {
        let mut store = BrirStore::new(8000);
        store.insert(0.0, 0.4, Brir::identity());
        assert!(select_brir(&store, 0.5, 0.41).is_ok());
        assert!(matches!(
            select_brir(&store, 90.0, 1.0),
            Err(SonifyError::MissingGridCell {
                azimuth_deg: 90,
                ..
            })
        ));
        assert_eq!(store.first_missing_grid_cell(), Some((-177, 0.4)));
    }

    #[test]
    fn duplicate_insert_rejected() {
        let mut store = BrirStore::new(8000);
        assert!(store.insert(0.0, 0.4, Brir::identity()));
        assert!(!store.insert(360.0, 0.4000001, Brir::identity()));
        // -180 and 180 name the same direction
        assert!(store.insert(-180.0, 0.4, Brir::identity()));
        assert!(!store.insert(180.0, 0.4, Brir::identity()));
    }

    #[test]
    fn spherical_head_lateralizes() {
        let head = SphericalHead::default();
        let b = head.brir(90.0, 1.2, 48_000);
        let e = |v: &[f32]| v.iter().map(|s| s * s).sum::<f32>();
        assert!(e(&b.left) > e(&b.right));
        let lead_l = b.left.iter().position(|s| *s != 0.0).unwrap();
        let lead_r = b.right.iter().position(|s| *s != 0.0).unwrap();
        assert!(lead_l < lead_r);
        assert!(head.itd_s(0.0).abs() < 1e-12);
        assert!((head.itd_s(30.0) - head.itd_s(150.0)).abs() < 1e-12);
    }
}
