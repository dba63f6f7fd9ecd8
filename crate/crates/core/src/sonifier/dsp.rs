//! Resampling pitch shift, linear convolution and a spectral peak probe.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Above this many multiply-adds convolution goes through the FFT.
const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 18;

/// Playback-rate factor for a shift of `semitones`.
pub fn pitch_factor(semitones: i32) -> f64 {
    2f64.powf(semitones as f64 / 12.0)
}

/// Shifts pitch by reading `samples` at `2^(semitones/12)` times the original
/// rate with linear interpolation. Duration scales by the inverse factor.
pub fn resample_pitch(samples: &[f32], semitones: i32) -> Vec<f32> {
    if semitones == 0 {
        return samples.to_vec();
    }
    let factor = pitch_factor(semitones);
    let n = samples.len();
    let out_len = (n as f64 / factor).floor() as usize;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * factor;
            let k = pos.floor() as usize;
            let frac = pos - k as f64;
            let a = samples[k.min(n - 1)] as f64;
            let b = samples[(k + 1).min(n - 1)] as f64;
            (a + (b - a) * frac) as f32
        })
        .collect()
}

/// Full linear convolution, `len(a) + len(b) - 1` samples.
pub fn convolve(a: &[f32], b: &[f32]) -> Vec<f32> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len() * b.len() <= DIRECT_CONVOLUTION_LIMIT {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    }
}

fn convolve_direct(a: &[f32], b: &[f32]) -> Vec<f32> {
    let mut out = vec![0.0f64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &h) in b.iter().enumerate() {
            out[i + j] += x as f64 * h as f64;
        }
    }
    out.into_iter().map(|v| v as f32).collect()
}

fn convolve_fft(a: &[f32], b: &[f32]) -> Vec<f32> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f32]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x as f64, 0.0)).collect();
        buf.resize(size, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len]
        .iter()
        .map(|c| (c.re * scale) as f32)
        .collect()
}

/// Frequency of the largest magnitude FFT bin, refined by parabolic
/// interpolation over its neighbours. Uses a Hann window.
pub fn dominant_frequency_hz(samples: &[f32], sample_rate: u32) -> f64 {
    let n = samples.len();
    if n < 4 {
        return 0.0;
    }
    let size = n.next_power_of_two() * 4;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            Complex::new(s as f64 * w, 0.0)
        })
        .collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    FftPlanner::<f64>::new()
        .plan_fft_forward(size)
        .process(&mut buf);
    let mags: Vec<f64> = buf[..size / 2].iter().map(|c| c.norm()).collect();
    let (k, _) =
        mags.iter().enumerate().skip(1).fold(
            (1, f64::MIN),
            |best, (i, &m)| if m > best.1 { (i, m) } else { best },
        );
    let offset = if k + 1 < mags.len() {
        let (l, c, r) = (mags[k - 1].ln(), mags[k].ln(), mags[k + 1].ln());
        let denom = l - 2.0 * c + r;
        if denom.abs() > 1e-12 {
            0.5 * (l - r) / denom
        } else {
            0.0
        }
    } else {
        0.0
    };
    (k as f64 + offset) * sample_rate as f64 / size as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(freq: f64, sr: u32, n: usize) -> Vec<f32> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin() as f32)
            .collect()
    }

    #[test]
    fn zero_shift_is_identical() {
        let s = sine(440.0, 48_000, 1000);
        assert_eq!(resample_pitch(&s, 0), s);
    }

    #[test]
    fn up_shift_length() {
        let n = 48_000;
        let out = resample_pitch(&sine(440.0, 48_000, n), 4);
        assert!((pitch_factor(4) - 1.259_921_049_894_873).abs() < 1e-12);
        assert_eq!(
            out.len(),
            (n as f64 / 2f64.powf(4.0 / 12.0)).floor() as usize
        );
    }

    #[test]
    fn down_shift_spectral_peak() {
        let out = resample_pitch(&sine(440.0, 48_000, 48_000), -4);
        let f = dominant_frequency_hz(&out, 48_000);
        assert!((f - 440.0 * 2f64.powf(-1.0 / 3.0)).abs() < 2.0, "{f}");
    }

    #[test]
    fn peak_probe_on_known_tone() {
        let f = dominant_frequency_hz(&sine(1000.0, 16_000, 4000), 16_000);
        assert!((f - 1000.0).abs() < 0.5, "{f}");
    }

    #[test]
    fn convolution_with_unit_impulse() {
        let x = vec![0.5, -0.25, 1.0];
        assert_eq!(convolve(&x, &[1.0]), x);
        assert_eq!(convolve(&x, &[0.0, 1.0]), vec![0.0, 0.5, -0.25, 1.0]);
        assert!(convolve(&[], &x).is_empty());
    }

    proptest! {
        #[test]
        fn fft_matches_direct(a in prop::collection::vec(-1.0f32..1.0, 1..300), b in prop::collection::vec(-1.0f32..1.0, 1..300)) {
            let d = convolve_direct(&a, &b);
            let f = convolve_fft(&a, &b);
            prop_assert_eq!(d.len(), f.len());
            for (x, y) in d.iter().zip(&f) {
                prop_assert!((x - y).abs() < 1e-5);
            }
        }
    }
}
