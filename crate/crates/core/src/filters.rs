//! Kaiser-window FIR low-pass design and application.
//!
//! The design follows the usual window method: an ideal low-pass impulse
//! response with its cutoff halfway through the transition band, multiplied
//! by a Kaiser window whose shape parameter and length come from the target
//! stopband attenuation and transition width. The length estimate is only
//! approximate, so the design checks its own response and grows by two taps
//! until the requested attenuation is measured.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Number of frequency points used to verify a design on `[0, fs/2]`.
pub const RESPONSE_POINTS: usize = 4096;

/// Maximum passband deviation accepted by the design check, in dB.
pub const MAX_PASSBAND_DEVIATION_DB: f64 = 0.1;

/// Symmetric, odd-length low-pass FIR filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Arc<[f64]>,
    pub cutoff_hz: f64,
    pub transition_hz: f64,
    pub atten_db: f64,
    pub fs_hz: f64,
    pub beta: f64,
}

impl FirFilter {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Group delay in samples, `(L - 1) / 2`.
    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn stopband_edge_hz(&self) -> f64 {
        self.cutoff_hz + self.transition_hz
    }

    /// Zero-phase amplitude response at `freq_hz`.
    pub fn amplitude(&self, freq_hz: f64) -> f64 {
        amplitude_response(&self.taps, freq_hz / self.fs_hz)
    }

    /// Smallest attenuation (dB) over the sampled stopband `[edge, fs/2]`,
    /// the edge frequency itself included. Infinite when the stopband edge
    /// lies beyond Nyquist.
    pub fn measured_stopband_db(&self, points: usize) -> f64 {
        let edge = self.stopband_edge_hz();
        if edge > self.fs_hz / 2.0 {
            return f64::INFINITY;
        }
        let worst = frequency_grid(self.fs_hz, points)
            .filter(|&f| f >= edge)
            .chain(std::iter::once(edge))
            .map(|f| self.amplitude(f).abs())
            .fold(0.0f64, f64::max);
        if worst == 0.0 {
            f64::INFINITY
        } else {
            -20.0 * worst.log10()
        }
    }

    /// Largest deviation from 0 dB over the sampled passband `[0, cutoff]`.
    pub fn measured_passband_deviation_db(&self, points: usize) -> f64 {
        frequency_grid(self.fs_hz, points)
            .filter(|&f| f <= self.cutoff_hz)
            .map(|f| (20.0 * self.amplitude(f).abs().log10()).abs())
            .fold(0.0, f64::max)
    }
}

fn frequency_grid(fs_hz: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = fs_hz / 2.0 / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(move |k| k as f64 * step)
}

/// Amplitude response of symmetric odd-length taps at normalized frequency
/// `f` (cycles per sample).
pub fn amplitude_response(taps: &[f64], f: f64) -> f64 {
    let m = (taps.len() - 1) / 2;
    let w = 2.0 * PI * f;
    let mut acc = taps[m];
    for k in 1..=m {
        acc += 2.0 * taps[m + k] * (w * k as f64).cos();
    }
    acc
}

/// Kaiser window shape parameter for a stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Kaiser's length estimate, `ceil((A - 8) / (2.285 dw))` rounded up to odd.
pub fn kaiser_tap_estimate(atten_db: f64, transition_hz: f64, fs_hz: f64) -> usize {
    let dw = 2.0 * PI * transition_hz / fs_hz;
    let order = ((atten_db - 8.0) / (2.285 * dw)).ceil().max(1.0) as usize;
    order | 1
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    let half = (len - 1) as f64 / 2.0;
    (0..len)
        .map(|k| {
            let r = (k as f64 - half) / half;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn windowed_sinc(len: usize, fc: f64, beta: f64) -> Vec<f64> {
    let window = kaiser_window(len, beta);
    let half = (len - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let t = k as f64 - half;
            let ideal = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * t).sin() / (PI * t)
            };
            ideal * window[k]
        })
        .collect();
    // Symmetrize exactly, then normalize for unit DC gain.
    for k in 0..len / 2 {
        let avg = 0.5 * (taps[k] + taps[len - 1 - k]);
        taps[k] = avg;
        taps[len - 1 - k] = avg;
    }
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= dc);
    taps
}

/// Minimum-length Kaiser low-pass with passband edge `cutoff_hz` and
/// stopband edge `cutoff_hz + transition_hz`.
pub fn design_kaiser_lowpass(
    fs_hz: f64,
    cutoff_hz: f64,
    transition_hz: f64,
    atten_db: f64,
) -> Result<FirFilter> {
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(Error::BadRate(fs_hz));
    }
    if !(cutoff_hz > 0.0 && transition_hz > 0.0 && atten_db > 0.0) {
        return Err(Error::BadBand(format!(
            "cutoff {cutoff_hz} Hz, transition {transition_hz} Hz, attenuation {atten_db} dB"
        )));
    }
    if cutoff_hz + transition_hz / 2.0 >= fs_hz / 2.0 {
        return Err(Error::BadBand(format!(
            "band edge {} Hz at or beyond Nyquist {} Hz",
            cutoff_hz + transition_hz / 2.0,
            fs_hz / 2.0
        )));
    }
    let beta = kaiser_beta(atten_db);
    let fc = (cutoff_hz + transition_hz / 2.0) / fs_hz;
    let first = kaiser_tap_estimate(atten_db, transition_hz, fs_hz);
    let mut len = first;
    loop {
        let filter = FirFilter {
            taps: windowed_sinc(len, fc, beta).into(),
            cutoff_hz,
            transition_hz,
            atten_db,
            fs_hz,
            beta,
        };
        let meets = filter.measured_stopband_db(RESPONSE_POINTS) >= atten_db
            && filter.measured_passband_deviation_db(RESPONSE_POINTS) <= MAX_PASSBAND_DEVIATION_DB;
        if meets || len >= 4 * first + 64 {
            return Ok(filter);
        }
        len += 2;
    }
}

/// Index into `0..n` mirrored at both ends without repeating the edge sample.
#[inline]
pub(crate) fn reflect_index(idx: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = idx.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Convolves with the taps, compensating the group delay, with reflected
/// edges. Output length equals input length.
pub fn apply_zero_phase(filter: &FirFilter, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let taps = filter.taps();
    let half = filter.delay() as isize;
    let padded: Vec<f64> = (-half..n as isize + half)
        .map(|i| x[reflect_index(i, n)])
        .collect();
    (0..n)
        .map(|k| {
            padded[k..k + taps.len()]
                .iter()
                .zip(taps)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Smallest DFT-bin frequency below which `energy_fraction` of the one-sided
/// power lies. Returns 0 for an all-zero signal.
pub fn estimate_max_frequency(x: &[f64], fs_hz: f64, energy_fraction: f64) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Empty("signal shorter than 2 samples"));
    }
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::BadSpec(format!(
            "energy fraction {energy_fraction} outside (0, 1]"
        )));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let power: Vec<f64> = (0..bins)
        .map(|k| {
            let p = buf[k].norm_sqr();
            let doubled = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            if doubled {
                2.0 * p
            } else {
                p
            }
        })
        .collect();
    let total: f64 = power.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let target = energy_fraction * total;
    let mut acc = 0.0;
    for (k, p) in power.iter().enumerate() {
        acc += p;
        // Relative slack absorbs rounding when the fraction is 1.
        if acc >= target * (1.0 - 1e-12) {
            return Ok(k as f64 * fs_hz / n as f64);
        }
    }
    Ok((bins - 1) as f64 * fs_hz / n as f64)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Anti-aliasing filter for `up/down` resampling, designed at `fs * up`.
/// Its band is centered on the lower of the input and output Nyquist
/// frequencies, with a transition of 20% of that frequency and 60 dB
/// attenuation.
pub fn resampling_filter(fs_hz: f64, up: usize, down: usize) -> Result<FirFilter> {
    let fs_up = fs_hz * up as f64;
    let nyquist = (fs_hz / 2.0).min(fs_up / (2.0 * down as f64));
    design_kaiser_lowpass(fs_up, 0.9 * nyquist, 0.2 * nyquist, 60.0)
}

/// Rational resampling by `up/down`. Returns the new signal and rate.
///
/// Equivalent to zero-stuffing by `up`, zero-phase low-pass filtering with
/// gain `up`, and keeping every `down`-th sample, evaluated only at the kept
/// positions. Edges are reflected on the original grid.
pub fn resample_rational(x: &[f64], fs_hz: f64, up: usize, down: usize) -> Result<(Vec<f64>, f64)> {
    if up == 0 || down == 0 {
        return Err(Error::BadFactor { up, down });
    }
    if x.is_empty() {
        return Err(Error::Empty("signal"));
    }
    let g = gcd(up, down);
    let (up, down) = (up / g, down / g);
    let new_fs = fs_hz * up as f64 / down as f64;
    if up == 1 && down == 1 {
        return Ok((x.to_vec(), new_fs));
    }
    let filter = resampling_filter(fs_hz, up, down)?;
    let taps = filter.taps();
    let half = filter.delay() as isize;
    let (n, l, m) = (x.len(), up as isize, down as isize);
    let out_len = (n * up).div_ceil(down);
    let gain = up as f64;
    let out = (0..out_len as isize)
        .map(|k| {
            let start = k * m - half;
            let mut tap = (-start).rem_euclid(l);
            let mut acc = 0.0;
            while (tap as usize) < taps.len() {
                let src = (start + tap) / l;
                acc += taps[tap as usize] * x[reflect_index(src, n)];
                tap += l;
            }
            gain * acc
        })
        .collect();
    Ok((out, new_fs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| (2.0 * PI * freq * k as f64 / fs).sin())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn beta_and_length_for_60db_5hz_500hz() {
        // 0.1102 * (60 - 8.7) = 5.65326
        assert!((kaiser_beta(60.0) - 5.65326).abs() < 1e-9);
        // dw = 2 pi 5 / 500 = 0.0628319; 52 / (2.285 dw) = 362.19 -> 363
        assert_eq!(kaiser_tap_estimate(60.0, 5.0, 500.0), 363);
        let f = design_kaiser_lowpass(500.0, 30.0, 5.0, 60.0).unwrap();
        assert!(f.len() >= 363 && f.len() % 2 == 1);
    }

    #[test]
    fn beta_branches() {
        assert_eq!(kaiser_beta(20.0), 0.0);
        // 0.5842 * 9^0.4 + 0.07886 * 9
        let mid = 0.5842 * 9f64.powf(0.4) + 0.07886 * 9.0;
        assert!((kaiser_beta(30.0) - mid).abs() < 1e-12);
        assert!((kaiser_beta(50.0) - (0.5842 * 29f64.powf(0.4) + 0.07886 * 29.0)).abs() < 1e-12);
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        // I0(1) = 1.2660658777520082, I0(5) = 27.239871823604442
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_2).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_442).abs() < 1e-11);
    }

    #[test]
    fn taps_symmetric_odd_unit_dc() {
        for &(fs, fc, tw, a) in &[
            (500.0, 30.0, 5.0, 60.0),
            (175.0, 30.0, 5.0, 60.0),
            (1000.0, 100.0, 20.0, 40.0),
            (500.0, 30.0, 10.0, 20.0),
        ] {
            let f = design_kaiser_lowpass(fs, fc, tw, a).unwrap();
            let h = f.taps();
            assert_eq!(h.len() % 2, 1);
            for k in 0..h.len() {
                assert_eq!(h[k], h[h.len() - 1 - k]);
            }
            assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_attenuation_meets_design() {
        for &(fs, fc, tw) in &[
            (500.0, 30.0, 5.0),
            (250.0, 30.0, 5.0),
            (175.0, 30.0, 5.0),
            (500.0, 10.0, 5.0),
            (500.0, 100.0, 20.0),
        ] {
            let f = design_kaiser_lowpass(fs, fc, tw, 60.0).unwrap();
            assert!(f.measured_stopband_db(RESPONSE_POINTS) >= 60.0, "{fs} {fc} {tw}");
            assert!(f.measured_passband_deviation_db(RESPONSE_POINTS) <= 0.1);
        }
    }

    #[test]
    fn band_beyond_nyquist_rejected() {
        assert!(matches!(
            design_kaiser_lowpass(100.0, 48.0, 5.0, 60.0),
            Err(Error::BadBand(_))
        ));
        assert!(matches!(
            design_kaiser_lowpass(100.0, 0.0, 5.0, 60.0),
            Err(Error::BadBand(_))
        ));
    }

    #[test]
    fn constant_passes_unchanged() {
        let f = design_kaiser_lowpass(500.0, 30.0, 5.0, 60.0).unwrap();
        let y = apply_zero_phase(&f, &[3.5; 200]);
        for v in y {
            assert!((v - 3.5).abs() < 3.5e-3, "{v}");
        }
    }

    #[test]
    fn impulse_returns_centered_taps() {
        let f = design_kaiser_lowpass(500.0, 30.0, 5.0, 60.0).unwrap();
        let n = 1001;
        let mut x = vec![0.0; n];
        x[500] = 1.0;
        let y = apply_zero_phase(&f, &x);
        let half = f.delay();
        for (k, &h) in f.taps().iter().enumerate() {
            assert_eq!(y[500 - half + k], h);
        }
        assert_eq!(y[500 - half - 1], 0.0);
    }

    #[test]
    fn stopband_edge_tone_suppressed() {
        let fs = 500.0;
        let f = design_kaiser_lowpass(fs, 30.0, 5.0, 60.0).unwrap();
        let x = tone(35.0, fs, 2000);
        let y = apply_zero_phase(&f, &x);
        let h = f.delay();
        let inner = &y[h..y.len() - h];
        assert!(rms(inner) <= rms(&x) * 1e-3 * 1.01, "{}", rms(inner));
    }

    #[test]
    fn zero_lag_for_passband_tone() {
        let fs = 500.0;
        let f = design_kaiser_lowpass(fs, 30.0, 5.0, 60.0).unwrap();
        let x = tone(10.0, fs, 2000);
        let y = apply_zero_phase(&f, &x);
        let xc = |lag: isize| -> f64 {
            (400..1600)
                .map(|k| x[k] * y[(k as isize + lag) as usize])
                .sum()
        };
        let best = (-20..=20).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn short_signal_filtering_reflects_repeatedly() {
        let f = design_kaiser_lowpass(500.0, 30.0, 5.0, 60.0).unwrap();
        assert_eq!(apply_zero_phase(&f, &[2.0]), vec![2.0 * f.taps().iter().sum::<f64>()]);
        let y = apply_zero_phase(&f, &[1.0, 1.0, 1.0]);
        assert_eq!(y.len(), 3);
    }

    #[test]
    fn reflect_index_mirrors() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
    }

    #[test]
    fn max_frequency_of_pure_tone() {
        let x = tone(10.0, 500.0, 500);
        assert_eq!(estimate_max_frequency(&x, 500.0, 0.999).unwrap(), 10.0);
    }

    #[test]
    fn max_frequency_of_zero_signal() {
        assert_eq!(estimate_max_frequency(&[0.0; 64], 500.0, 0.999).unwrap(), 0.0);
        assert!(estimate_max_frequency(&[1.0], 500.0, 0.999).is_err());
    }

    #[test]
    fn max_frequency_of_filtered_noise() {
        let mut rng = crate::rng::SplitMix64::new(5);
        let fs = 500.0;
        let noise: Vec<f64> = (0..4000).map(|_| rng.normal()).collect();
        // -6 dB point (band center) at 30 Hz.
        let f = design_kaiser_lowpass(fs, 27.5, 5.0, 60.0).unwrap();
        let y = apply_zero_phase(&f, &noise);
        let fm = estimate_max_frequency(&y, fs, 0.999).unwrap();
        assert!((28.0..=32.0).contains(&fm), "{fm}");
    }

    #[test]
    fn resample_lengths_and_rates() {
        let x = tone(10.0, 500.0, 500);
        let (y, fs) = resample_rational(&x, 500.0, 1, 2).unwrap();
        assert_eq!((y.len(), fs), (250, 250.0));
        let (y, fs) = resample_rational(&x, 500.0, 7, 20).unwrap();
        assert_eq!((y.len(), fs), (175, 175.0));
        let (y, fs) = resample_rational(&x, 500.0, 3, 3).unwrap();
        assert_eq!((y, fs), (x.clone(), 500.0));
        assert!(matches!(
            resample_rational(&x, 500.0, 0, 2),
            Err(Error::BadFactor { .. })
        ));
    }

    #[test]
    fn resampled_tone_matches_analytic() {
        let fs = 500.0;
        let x = tone(10.0, fs, 1000);
        for &(l, m) in &[(1, 2), (7, 20), (3, 2)] {
            let (y, new_fs) = resample_rational(&x, fs, l, m).unwrap();
            let expected = tone(10.0, new_fs, y.len());
            let margin = y.len() / 5;
            for k in margin..y.len() - margin {
                assert!((y[k] - expected[k]).abs() < 2e-3, "{l}/{m} at {k}");
            }
        }
    }

    #[test]
    fn resampling_removes_aliasing_tone() {
        // 200 Hz is above the 125 Hz output Nyquist of a 500 -> 250 Hz change.
        let fs = 500.0;
        let x = tone(200.0, fs, 1000);
        let (y, _) = resample_rational(&x, fs, 1, 2).unwrap();
        assert!(rms(&y[100..400]) < 1e-3);
    }
}
