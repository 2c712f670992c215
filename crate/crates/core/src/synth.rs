//! Synthetic stimulus-locked trials with known latency jitter.
//!
//! A template is a sum of signed Gaussian bumps on the epoch time axis. Each
//! trial resamples the template through a random monotone piecewise-linear
//! time warp plus a uniform latency shift, scales it, and adds white noise:
//!
//! ```text
//! trial_t(tau) = a_t * template(w_t(tau) + shift_t) + noise
//! ```
//!
//! `tau` and `w_t` are in samples from the start of the epoch. A positive
//! shift therefore moves the waveform earlier. The warp has `knots` equal
//! segments with slopes in `[1 - strength, 1 + strength]` and keeps both
//! epoch ends fixed. The template is evaluated by linear interpolation with
//! constant extension beyond the epoch.
//!
//! Trial `t` draws from its own stream `sub_seed(seed, t)` in the order:
//! shift, warp slopes, scale, noise. Generation is therefore independent of
//! evaluation order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Polarity;
use crate::rng::{sub_seed, SplitMix64};
use crate::signal::{axis, Trial, TrialSet};

/// Bumps are exactly zero beyond this many widths from their center.
const BUMP_SUPPORT_WIDTHS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center_ms: f64,
    /// Gaussian standard deviation.
    pub width_ms: f64,
    /// Magnitude; the sign comes from `polarity`.
    pub amplitude_uv: f64,
    pub polarity: Polarity,
}

impl Bump {
    pub fn new(center_ms: f64, width_ms: f64, amplitude_uv: f64, polarity: Polarity) -> Self {
        Self {
            center_ms,
            width_ms,
            amplitude_uv,
            polarity,
        }
    }

    fn eval(&self, t_ms: f64) -> f64 {
        let z = (t_ms - self.center_ms) / self.width_ms;
        if z.abs() > BUMP_SUPPORT_WIDTHS {
            return 0.0;
        }
        let sign = match self.polarity {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        };
        sign * self.amplitude_uv * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub n: usize,
    pub fs_hz: f64,
    pub prestim_ms: f64,
    pub bumps: Vec<Bump>,
}

impl TemplateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::BadSpec(format!("epoch length {}", self.n)));
        }
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(Error::BadRate(self.fs_hz));
        }
        if !(self.prestim_ms >= 0.0 && self.prestim_ms * self.fs_hz / 1000.0 < self.n as f64) {
            return Err(Error::BadSpec(format!("prestim {} ms", self.prestim_ms)));
        }
        let start = -self.prestim_ms;
        let end = start + (self.n - 1) as f64 * 1000.0 / self.fs_hz;
        for b in &self.bumps {
            if !(b.width_ms > 0.0 && b.width_ms.is_finite()) {
                return Err(Error::BadSpec(format!("bump width {}", b.width_ms)));
            }
            if !(b.center_ms >= start && b.center_ms <= end) {
                return Err(Error::BadSpec(format!(
                    "bump center {} ms outside epoch [{start}, {end}] ms",
                    b.center_ms
                )));
            }
            if !b.amplitude_uv.is_finite() {
                return Err(Error::BadSpec("non-finite bump amplitude".into()));
            }
        }
        Ok(())
    }

    pub fn with_bump(mut self, bump: Bump) -> Self {
        self.bumps.push(bump);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    /// Shifts are uniform in `[-latency_shift_ms, latency_shift_ms]`.
    pub latency_shift_ms: f64,
    /// Maximum local slope deviation of the time warp, in `[0, 1)`.
    pub warp_strength: f64,
    pub warp_knots: usize,
    pub amplitude_scale: (f64, f64),
    pub noise_std_uv: f64,
    pub seed: u64,
}

impl JitterSpec {
    /// No jitter, no noise, unit scale.
    pub fn none(seed: u64) -> Self {
        Self {
            latency_shift_ms: 0.0,
            warp_strength: 0.0,
            warp_knots: 8,
            amplitude_scale: (1.0, 1.0),
            noise_std_uv: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.latency_shift_ms,
            self.warp_strength,
            self.amplitude_scale.0,
            self.amplitude_scale.1,
            self.noise_std_uv,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::BadSpec("non-finite jitter parameter".into()));
        }
        if !(0.0..1.0).contains(&self.warp_strength) {
            return Err(Error::BadSpec(format!(
                "warp strength {} outside [0, 1)",
                self.warp_strength
            )));
        }
        if self.warp_knots == 0 {
            return Err(Error::BadSpec("warp needs at least one segment".into()));
        }
        if self.latency_shift_ms < 0.0 || self.noise_std_uv < 0.0 {
            return Err(Error::BadSpec("negative shift range or noise".into()));
        }
        if self.amplitude_scale.0 > self.amplitude_scale.1 {
            return Err(Error::BadSpec("amplitude scale range reversed".into()));
        }
        Ok(())
    }
}

/// Per-trial parameters actually drawn by the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub shifts_ms: Vec<f64>,
    pub scales: Vec<f64>,
    /// Segment slopes of each trial's time warp.
    pub warp_slopes: Vec<Vec<f64>>,
}

/// A full synthetic dataset description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub template: TemplateSpec,
    pub jitter: JitterSpec,
    pub trials: usize,
}

impl SynthConfig {
    /// The canonical oracle set: 500 samples at 500 Hz with 200 ms before
    /// onset, N100 (-5 uV, 100 ms, 15 ms) and P200 (+10 uV, 200 ms, 25 ms),
    /// 100 trials, shifts within 20 ms, warp strength 0.15, scale 0.8-1.2,
    /// 5 uV noise.
    pub fn config_a(seed: u64) -> Self {
        Self {
            template: TemplateSpec {
                n: 500,
                fs_hz: 500.0,
                prestim_ms: 200.0,
                bumps: vec![
                    Bump::new(100.0, 15.0, 5.0, Polarity::Negative),
                    Bump::new(200.0, 25.0, 10.0, Polarity::Positive),
                ],
            },
            jitter: JitterSpec {
                latency_shift_ms: 20.0,
                warp_strength: 0.15,
                warp_knots: 8,
                amplitude_scale: (0.8, 1.2),
                noise_std_uv: 5.0,
                seed,
            },
            trials: 100,
        }
    }

    /// Same as this config with the P200 bump moved to `center_ms`.
    pub fn with_p200_at(mut self, center_ms: f64) -> Self {
        for b in &mut self.template.bumps {
            if b.polarity == Polarity::Positive {
                b.center_ms = center_ms;
            }
        }
        self
    }
}

pub fn make_template(spec: &TemplateSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(axis(spec.n, spec.fs_hz, spec.prestim_ms)
        .into_iter()
        .map(|t| {
            let t_ms = t * 1000.0;
            spec.bumps.iter().map(|b| b.eval(t_ms)).sum()
        })
        .collect())
}

/// Linear interpolation at fractional sample `pos`, constant beyond the ends.
pub fn interpolate(signal: &[f64], pos: f64) -> f64 {
    let last = signal.len() - 1;
    if pos <= 0.0 {
        return signal[0];
    }
    if pos >= last as f64 {
        return signal[last];
    }
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    signal[k] + frac * (signal[k + 1] - signal[k])
}

/// Slopes of a monotone warp with fixed endpoints: zero-mean deviations
/// bounded by `strength`.
fn draw_slopes(rng: &mut SplitMix64, knots: usize, strength: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..knots).map(|_| rng.uniform(-strength, strength)).collect();
    let mean = raw.iter().sum::<f64>() / knots as f64;
    let centered: Vec<f64> = raw.iter().map(|e| e - mean).collect();
    let peak = centered.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let shrink = if peak > strength { strength / peak } else { 1.0 };
    centered.iter().map(|e| 1.0 + e * shrink).collect()
}

/// Evaluates the piecewise-linear warp with the given segment slopes on
/// `[0, len - 1]`. Both ends map to themselves.
pub fn warp_positions(slopes: &[f64], len: usize) -> Vec<f64> {
    if slopes.iter().all(|&s| s == 1.0) {
        return (0..len).map(|k| k as f64).collect();
    }
    let span = (len - 1) as f64;
    let seg = span / slopes.len() as f64;
    // Knot values, rescaled so the last knot lands exactly on `span`.
    let mut knots = Vec::with_capacity(slopes.len() + 1);
    knots.push(0.0);
    for s in slopes {
        knots.push(knots.last().unwrap() + s * seg);
    }
    let end = *knots.last().unwrap();
    knots.iter_mut().for_each(|k| *k *= span / end);
    (0..len)
        .map(|k| {
            let tau = k as f64;
            let i = ((tau / seg).floor() as usize).min(slopes.len() - 1);
            let frac = (tau - i as f64 * seg) / seg;
            knots[i] + frac * (knots[i + 1] - knots[i])
        })
        .collect()
}

/// Generates jittered trials of `template` on the template's epoch.
pub fn generate_trials(
    spec: &TemplateSpec,
    t_count: usize,
    jitter: &JitterSpec,
) -> Result<(TrialSet, GroundTruth)> {
    let template = make_template(spec)?;
    jitter.validate()?;
    if t_count == 0 {
        return Err(Error::BadSpec("zero trials requested".into()));
    }
    let samples_per_ms = spec.fs_hz / 1000.0;
    let drawn: Vec<(f64, Vec<f64>, f64, Vec<f64>)> = (0..t_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = SplitMix64::new(sub_seed(jitter.seed, t as u64));
            let shift_ms = rng.uniform(-jitter.latency_shift_ms, jitter.latency_shift_ms);
            let slopes = draw_slopes(&mut rng, jitter.warp_knots, jitter.warp_strength);
            let scale = rng.uniform(jitter.amplitude_scale.0, jitter.amplitude_scale.1);
            let shift = shift_ms * samples_per_ms;
            let samples = warp_positions(&slopes, spec.n)
                .into_iter()
                .map(|w| {
                    let clean = scale * interpolate(&template, w + shift);
                    clean + jitter.noise_std_uv * rng.normal()
                })
                .collect();
            (shift_ms, slopes, scale, samples)
        })
        .collect();

    let mut truth = GroundTruth {
        shifts_ms: Vec::with_capacity(t_count),
        scales: Vec::with_capacity(t_count),
        warp_slopes: Vec::with_capacity(t_count),
    };
    let mut trials = Vec::with_capacity(t_count);
    for (id, (shift, slopes, scale, samples)) in drawn.into_iter().enumerate() {
        truth.shifts_ms.push(shift);
        truth.warp_slopes.push(slopes);
        truth.scales.push(scale);
        trials.push(Trial::new(id, samples));
    }
    let ts = TrialSet::new(trials, spec.fs_hz, spec.prestim_ms)?.with_channel("synthetic");
    Ok((ts, truth))
}

/// Generates a labelled set from several class configurations. Class `c`
/// uses stream `sub_seed(seed, c)` for its jitter seed; trial ids are
/// consecutive across classes.
pub fn generate_classes(classes: &[(String, SynthConfig)], seed: u64) -> Result<TrialSet> {
    let mut all = Vec::new();
    let mut meta: Option<(f64, f64)> = None;
    for (c, (label, cfg)) in classes.iter().enumerate() {
        let mut jitter = cfg.jitter.clone();
        jitter.seed = sub_seed(seed, c as u64);
        let (ts, _) = generate_trials(&cfg.template, cfg.trials, &jitter)?;
        match meta {
            None => meta = Some((ts.fs_hz, ts.prestim_ms)),
            Some(m) if m != (ts.fs_hz, ts.prestim_ms) => {
                return Err(Error::BadSpec("classes disagree on epoch metadata".into()))
            }
            Some(_) => {}
        }
        for t in ts.trials {
            let id = all.len();
            all.push(Trial::new(id, t.samples).with_label(label.clone()));
        }
    }
    let (fs, pre) = meta.ok_or(Error::BadSpec("no classes".into()))?;
    Ok(TrialSet::new(all, fs, pre)?.with_channel("synthetic"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_one_bump() -> TemplateSpec {
        TemplateSpec {
            n: 500,
            fs_hz: 500.0,
            prestim_ms: 200.0,
            bumps: vec![Bump::new(200.0, 20.0, 10.0, Polarity::Positive)],
        }
    }

    #[test]
    fn single_bump_peak() {
        let x = make_template(&spec_one_bump()).unwrap();
        let (k, v) = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(*v, 10.0);
        assert_eq!(k, 200); // 200 ms after a 200 ms pre-stimulus at 2 ms/sample
    }

    #[test]
    fn empty_template_is_zero() {
        let mut s = spec_one_bump();
        s.bumps.clear();
        assert!(make_template(&s).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bad_specs() {
        let mut s = spec_one_bump();
        s.bumps[0].width_ms = 0.0;
        assert!(make_template(&s).is_err());
        let mut s = spec_one_bump();
        s.bumps[0].center_ms = 900.0;
        assert!(make_template(&s).is_err());
        let mut j = JitterSpec::none(1);
        j.warp_strength = 1.0;
        assert!(generate_trials(&spec_one_bump(), 3, &j).is_err());
    }

    #[test]
    fn no_jitter_reproduces_template() {
        let spec = spec_one_bump();
        let template = make_template(&spec).unwrap();
        let (ts, truth) = generate_trials(&spec, 5, &JitterSpec::none(9)).unwrap();
        for t in &ts.trials {
            assert_eq!(t.samples, template);
        }
        assert!(truth.shifts_ms.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn same_seed_same_trials() {
        let cfg = SynthConfig::config_a(42);
        let a = generate_trials(&cfg.template, 20, &cfg.jitter).unwrap();
        let b = generate_trials(&cfg.template, 20, &cfg.jitter).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.jitter.clone();
        other.seed = 43;
        assert_ne!(a.0, generate_trials(&cfg.template, 20, &other).unwrap().0);
    }

    #[test]
    fn prefix_is_stable_when_count_grows() {
        let cfg = SynthConfig::config_a(7);
        let (small, _) = generate_trials(&cfg.template, 5, &cfg.jitter).unwrap();
        let (large, _) = generate_trials(&cfg.template, 50, &cfg.jitter).unwrap();
        assert_eq!(small.trials[..], large.trials[..5]);
    }

    #[test]
    fn warps_are_strictly_increasing_with_fixed_ends() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let slopes = draw_slopes(&mut rng, 8, 0.6);
            assert!(slopes.iter().all(|s| (0.4 - 1e-12..=1.6 + 1e-12).contains(s)));
            let w = warp_positions(&slopes, 300);
            assert_eq!(w[0], 0.0);
            assert!((w[299] - 299.0).abs() < 1e-9);
            assert!(w.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn labelled_classes() {
        let a = SynthConfig {
            trials: 4,
            ..SynthConfig::config_a(1)
        };
        let b = a.clone().with_p200_at(230.0);
        let ts = generate_classes(&[("a".into(), a), ("b".into(), b)], 5).unwrap();
        assert_eq!(ts.len(), 8);
        assert_eq!(ts.labels(), vec!["a".to_string(), "b".to_string()]);
        assert_eq!(ts.trials[7].id, 7);
    }
}
