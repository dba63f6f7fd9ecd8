use crate::dataio::AudioBuffer;
use crate::raster::{CircularRaster, CIRCLE_BINS};

use super::brir::{select_brir, BrirStore, MAX_DISTANCE_M, MIN_DISTANCE_M};
use super::dsp::{convolve, resample_pitch};
use super::SonifyError;

/// Taps nearer than this are shifted down.
const NEAR_PITCH_M: f64 = 1.5;
/// Taps farther than this are shifted up.
const FAR_PITCH_M: f64 = 2.5;
const PITCH_STEP_SEMITONES: i32 = 4;
/// Peak level after limiting, applied only when the mix exceeds 1.
const LIMIT_PEAK: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sector_deg: u32,
    pub cadence_s: f64,
    pub distance_scale: f64,
    pub tap: AudioBuffer,
    pub woosh: AudioBuffer,
}

impl SweepConfig {
    pub fn new(tap: AudioBuffer, woosh: AudioBuffer) -> Self {
        Self {
            sector_deg: 10,
            cadence_s: 0.1,
            distance_scale: 1.0,
            tap,
            woosh,
        }
    }

    pub fn sector_count(&self) -> usize {
        (360 / self.sector_deg.max(1)) as usize
    }

    fn validate(&self) -> Result<(), SonifyError> {
        if self.sector_deg == 0 || 360 % self.sector_deg != 0 {
            return Err(SonifyError::BadSectorWidth(self.sector_deg));
        }
        Ok(())
    }
}

/// The closest known bin of one sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorReading {
    pub sector: usize,
    /// `(bin angle in degrees, range in meters)`, `None` when nothing in the sector is known.
    pub nearest: Option<(usize, f64)>,
}

/// Groups bins into `sector_deg` sectors, keeping each sector's minimum
/// range. Ties go to the lowest angle.
pub fn aggregate_sectors(
    circle: &CircularRaster,
    sector_deg: u32,
) -> Result<Vec<SectorReading>, SonifyError> {
    if circle.bins.len() != CIRCLE_BINS {
        return Err(SonifyError::BinCount(circle.bins.len()));
    }
    if sector_deg == 0 || 360 % sector_deg != 0 {
        return Err(SonifyError::BadSectorWidth(sector_deg));
    }
    let width = sector_deg as usize;
    Ok(circle
        .bins
        .chunks(width)
        .enumerate()
        .map(|(sector, bins)| {
            let nearest = bins
                .iter()
                .enumerate()
                .filter_map(|(i, b)| b.map(|r| (sector * width + i, r)))
                .fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 <= cur.1 => Some(b),
                    _ => Some(cur),
                });
            SectorReading { sector, nearest }
        })
        .collect())
}

/// Scales a range into the BRIR distance span, clamping to `[0.4, 4.0]` m.
pub fn map_distance(range_m: f64, distance_scale: f64) -> Result<f64, SonifyError> {
    if !(range_m > 0.0) {
        return Err(SonifyError::NonPositiveRange(range_m));
    }
    Ok((range_m * distance_scale).clamp(MIN_DISTANCE_M, MAX_DISTANCE_M))
}

/// -4 semitones below 1.5 m, +4 above 2.5 m, 0 in between (inclusive).
pub fn pitch_class(clamped_distance_m: f64) -> i32 {
    if clamped_distance_m < NEAR_PITCH_M {
        -PITCH_STEP_SEMITONES
    } else if clamped_distance_m > FAR_PITCH_M {
        PITCH_STEP_SEMITONES
    } else {
        0
    }
}

/// Pitch shift of a mono buffer by playback-rate resampling.
pub fn pitch_shift(buf: &AudioBuffer, semitones: i32) -> Result<AudioBuffer, SonifyError> {
    if buf.channels != 1 {
        return Err(SonifyError::NotMono("input"));
    }
    Ok(AudioBuffer::mono(
        buf.sample_rate,
        resample_pitch(&buf.samples, semitones),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Tap,
    Woosh,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Tap => "tap",
            EventKind::Woosh => "woosh",
        }
    }
}

/// One scheduled sector sound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonoEvent {
    pub onset_s: f64,
    pub sector: usize,
    pub kind: EventKind,
    /// Bin angle for taps, sector center for wooshes.
    pub azimuth_deg: f64,
    /// Clamped distance; taps only.
    pub distance_m: Option<f64>,
    pub semitones: i32,
}

/// Schedules one event per sector, sector 0 first, one per cadence step.
pub fn plan_events(
    sectors: &[SectorReading],
    cfg: &SweepConfig,
) -> Result<Vec<SonoEvent>, SonifyError> {
    cfg.validate()?;
    if sectors.len() != cfg.sector_count() {
        return Err(SonifyError::SectorCount {
            expected: cfg.sector_count(),
            found: sectors.len(),
        });
    }
    sectors
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let onset_s = i as f64 * cfg.cadence_s;
            Ok(match s.nearest {
                Some((bin, range)) => {
                    let d = map_distance(range, cfg.distance_scale)?;
                    SonoEvent {
                        onset_s,
                        sector: s.sector,
                        kind: EventKind::Tap,
                        azimuth_deg: bin as f64,
                        distance_m: Some(d),
                        semitones: pitch_class(d),
                    }
                }
                None => SonoEvent {
                    onset_s,
                    sector: s.sector,
                    kind: EventKind::Woosh,
                    azimuth_deg: (s.sector as f64 + 0.5) * cfg.sector_deg as f64,
                    distance_m: None,
                    semitones: 0,
                },
            })
        })
        .collect()
}

fn check_rates(store: &BrirStore, cfg: &SweepConfig) -> Result<(), SonifyError> {
    for (what, buf) in [("tap", &cfg.tap), ("woosh", &cfg.woosh)] {
        if buf.channels != 1 {
            return Err(SonifyError::NotMono(what));
        }
        if buf.sample_rate != store.sample_rate() {
            return Err(SonifyError::SampleRateMismatch {
                what,
                expected: store.sample_rate(),
                found: buf.sample_rate,
            });
        }
    }
    Ok(())
}

/// Mixes `events` into left/right timelines without limiting.
pub fn render_unlimited(
    events: &[SonoEvent],
    store: &BrirStore,
    cfg: &SweepConfig,
) -> Result<(Vec<f64>, Vec<f64>), SonifyError> {
    check_rates(store, cfg)?;
    let sr = store.sample_rate() as f64;
    let mut left: Vec<f64> = Vec::new();
    let mut right: Vec<f64> = Vec::new();
    for ev in events {
        let (source, distance) = match ev.kind {
            EventKind::Tap => (
                resample_pitch(&cfg.tap.samples, ev.semitones),
                ev.distance_m.unwrap_or(MAX_DISTANCE_M),
            ),
            EventKind::Woosh => (cfg.woosh.samples.clone(), MAX_DISTANCE_M),
        };
        let (_, brir) = select_brir(store, ev.azimuth_deg, distance)?;
        let l = convolve(&source, &brir.left);
        let r = convolve(&source, &brir.right);
        let onset = (ev.onset_s * sr).round() as usize;
        let end = onset + l.len().max(r.len());
        if left.len() < end {
            left.resize(end, 0.0);
            right.resize(end, 0.0);
        }
        for (i, v) in l.iter().enumerate() {
            left[onset + i] += *v as f64;
        }
        for (i, v) in r.iter().enumerate() {
            right[onset + i] += *v as f64;
        }
    }
    Ok((left, right))
}

/// A rendered sweep and its event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub audio: AudioBuffer,
    pub events: Vec<SonoEvent>,
}

/// Renders one full sweep. The mix is scaled to a 0.99 peak only when it
/// would otherwise exceed 1.
pub fn render_sweep(
    sectors: &[SectorReading],
    store: &BrirStore,
    cfg: &SweepConfig,
) -> Result<Sweep, SonifyError> {
    let events = plan_events(sectors, cfg)?;
    let (left, right) = render_unlimited(&events, store, cfg)?;
    let peak = left
        .iter()
        .chain(&right)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 1.0 { LIMIT_PEAK / peak } else { 1.0 };
    let l: Vec<f32> = left.iter().map(|v| (v * gain) as f32).collect();
    let r: Vec<f32> = right.iter().map(|v| (v * gain) as f32).collect();
    Ok(Sweep {
        audio: AudioBuffer::stereo(store.sample_rate(), &l, &r),
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Vec2, Vec3};
    use crate::sonifier::{Brir, SphericalHead};

    fn circle(bins: &[(usize, f64)]) -> CircularRaster {
        let mut c = CircularRaster::unknown(Vec3::zeros(), Vec2::new(1.0, 0.0));
        for &(b, r) in bins {
            c.bins[b] = Some(r);
        }
        c
    }

    fn identity_store(sr: u32) -> BrirStore {
        let mut s = BrirStore::new(sr);
        for az in crate::sonifier::grid_azimuths() {
            for d in crate::sonifier::grid_distances() {
                s.insert(az as f64, d, Brir::identity());
            }
        }
        s
    }

    fn cfg(sr: u32) -> SweepConfig {
        let tap: Vec<f32> = (0..200)
            .map(|i| ((i as f32) * 0.3).sin() * (1.0 - i as f32 / 200.0) * 0.5)
            .collect();
        let woosh: Vec<f32> = (0..300).map(|i| ((i as f32) * 0.05).sin() * 0.2).collect();
        SweepConfig::new(AudioBuffer::mono(sr, tap), AudioBuffer::mono(sr, woosh))
    }

    #[test]
    fn sector_minimum_and_ties() {
        let s = aggregate_sectors(&circle(&[(5, 2.0), (7, 1.5)]), 10).unwrap();
        assert_eq!(s.len(), 36);
        assert_eq!(s[0].nearest, Some((7, 1.5)));
        assert_eq!(s[1].nearest, None);

        let all: Vec<(usize, f64)> = (0..360).map(|b| (b, 3.0)).collect();
        let s = aggregate_sectors(&circle(&all), 10).unwrap();
        for (i, r) in s.iter().enumerate() {
            assert_eq!(r.nearest, Some((10 * i, 3.0)));
        }
    }

    #[test]
    fn distance_mapping() {
        assert_eq!(map_distance(5.0, 1.0).unwrap(), 4.0);
        assert_eq!(map_distance(0.2, 1.0).unwrap(), 0.4);
        assert_eq!(map_distance(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(map_distance(2.0, 0.5).unwrap(), 1.0);
        assert!(map_distance(0.0, 1.0).is_err());
        assert!(map_distance(-1.0, 1.0).is_err());
    }

    #[test]
    fn pitch_thresholds() {
        assert_eq!(pitch_class(1.0), -4);
        assert_eq!(pitch_class(2.0), 0);
        assert_eq!(pitch_class(3.0), 4);
        assert_eq!(pitch_class(1.5), 0);
        assert_eq!(pitch_class(2.5), 0);
    }

    #[test]
    fn all_unknown_gives_wooshes() {
        let c = cfg(8000);
        let s = aggregate_sectors(&circle(&[]), 10).unwrap();
        let sweep = render_sweep(&s, &identity_store(8000), &c).unwrap();
        assert_eq!(sweep.events.len(), 36);
        assert!(sweep
            .events
            .iter()
            .all(|e| e.kind == EventKind::Woosh && e.distance_m.is_none()));
        for w in sweep.events.windows(2) {
            assert!(w[1].onset_s > w[0].onset_s);
        }
        // 35 cadence steps plus the final woosh convolved with a 1-sample BRIR
        let expected = (35.0 * c.cadence_s * 8000.0).round() as usize + c.woosh.samples.len();
        assert_eq!(sweep.audio.frames(), expected);
    }

    #[test]
    fn identity_brir_places_shifted_tap() {
        let c = cfg(8000);
        let s = aggregate_sectors(&circle(&[(123, 1.0)]), 10).unwrap();
        let (l, r) =
            render_unlimited(&plan_events(&s, &c).unwrap(), &identity_store(8000), &c).unwrap();
        let shifted = resample_pitch(&c.tap.samples, -4);
        let onset = (12.0 * c.cadence_s * 8000.0).round() as usize;
        // every other sector is a woosh; subtract them by rendering wooshes alone
        let only_wooshes: Vec<SonoEvent> = plan_events(&s, &c)
            .unwrap()
            .into_iter()
            .filter(|e| e.kind == EventKind::Woosh)
            .collect();
        let (wl, _) = render_unlimited(&only_wooshes, &identity_store(8000), &c).unwrap();
        for (i, v) in shifted.iter().enumerate() {
            let got = l[onset + i] - wl.get(onset + i).copied().unwrap_or(0.0);
            assert!((got - *v as f64).abs() < 1e-6);
        }
        assert_eq!(l, r);
    }

    #[test]
    fn left_source_is_louder_left() {
        let c = cfg(48_000);
        let c = SweepConfig {
            tap: AudioBuffer::mono(48_000, c.tap.samples),
            woosh: AudioBuffer::mono(48_000, vec![0.0; 10]),
            ..c
        };
        let s = aggregate_sectors(&circle(&[(90, 2.0)]), 10).unwrap();
        let sweep = render_sweep(&s, &SphericalHead::default().store(48_000), &c).unwrap();
        let e = |v: Vec<f32>| v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>();
        assert!(e(sweep.audio.channel(0)) > e(sweep.audio.channel(1)));
    }

    #[test]
    fn render_is_linear_in_tap() {
        let c = cfg(8000);
        let store = SphericalHead::default().store(8000);
        let s = aggregate_sectors(&circle(&[(3, 0.9), (95, 2.2), (200, 3.7)]), 10).unwrap();
        let a = c.tap.samples.clone();
        let b: Vec<f32> = (0..200).map(|i| ((i as f32) * 0.11).cos() * 0.3).collect();
        let sum: Vec<f32> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let silent = AudioBuffer::mono(8000, vec![0.0; 300]);
        let with = |tap: Vec<f32>| {
            let cfg = SweepConfig {
                tap: AudioBuffer::mono(8000, tap),
                woosh: silent.clone(),
                ..c.clone()
            };
            render_unlimited(&plan_events(&s, &cfg).unwrap(), &store, &cfg).unwrap()
        };
        let (la, ra) = with(a);
        let (lb, rb) = with(b);
        let (ls, rs) = with(sum);
        for i in 0..ls.len() {
            assert!((ls[i] - la[i] - lb[i]).abs() < 1e-6);
            assert!((rs[i] - ra[i] - rb[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn limiting_only_when_clipping() {
        let mut c = cfg(8000);
        c.tap = AudioBuffer::mono(8000, vec![0.9; 50]);
        c.cadence_s = 0.001;
        let all: Vec<(usize, f64)> = (0..360).map(|b| (b, 2.0)).collect();
        let s = aggregate_sectors(&circle(&all), 10).unwrap();
        let sweep = render_sweep(&s, &identity_store(8000), &c).unwrap();
        assert!(sweep.audio.peak() <= 0.99 + 1e-6);
        assert!(sweep.audio.peak() > 0.98);

        let quiet = render_sweep(
            &aggregate_sectors(&circle(&[(0, 2.0)]), 10).unwrap(),
            &identity_store(8000),
            &cfg(8000),
        )
        .unwrap();
        assert!((quiet.audio.peak() - 0.5).abs() < 0.05);
    }

    #[test]
    fn sample_rate_mismatch() {
        let c = cfg(8000);
        let s = aggregate_sectors(&circle(&[]), 10).unwrap();
        assert!(matches!(
            render_sweep(&s, &identity_store(16_000), &c),
            Err(SonifyError::SampleRateMismatch { .. })
        ));
    }
}
