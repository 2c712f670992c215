//! Evaluation measures: distance of a trial to an average, descriptive
//! statistics, boxplot summaries and ERP component measurement.
//!
//! Quantiles interpolate linearly between closest ranks: for sorted values
//! `x[0..n]` and probability `p`, `h = (n - 1) p`, and the quantile is
//! `x[floor(h)] + (h - floor(h)) (x[floor(h) + 1] - x[floor(h)])`.
//! Standard deviations in [`StatsSummary`] are sample (n - 1) deviations.
//!
//! Component amplitude is peak minus the opposite-polarity extremum of a
//! preceding reference window (for P200, the N100 trough).

use serde::{Deserialize, Serialize};

use crate::accum;
use crate::error::{Error, Result};
use crate::signal::{AverageSignal, Scheme, TrialSet};

/// Tolerance (seconds) when comparing sample times to window bounds.
const TIME_EPS: f64 = 1e-9;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("signal"));
    }
    Ok(())
}

/// Root-mean-square difference between a trial and an average.
pub fn rms_to_average(trial: &[f64], average: &[f64]) -> Result<f64> {
    check_lengths(trial, average)?;
    let ss = accum::sum(trial.iter().zip(average).map(|(s, r)| (s - r) * (s - r)));
    Ok((ss / trial.len() as f64).sqrt())
}

/// Maximum absolute difference between a trial and an average.
pub fn mad_to_average(trial: &[f64], average: &[f64]) -> Result<f64> {
    check_lengths(trial, average)?;
    Ok(trial
        .iter()
        .zip(average)
        .map(|(s, r)| (s - r).abs())
        .fold(0.0, f64::max))
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

fn sorted_copy(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("non-finite value in sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    /// Coefficient of variation, `std / mean`; `None` when the mean is zero.
    pub v: Option<f64>,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
    pub min: f64,
}

pub fn summary_stats(values: &[f64]) -> Result<StatsSummary> {
    let sorted = sorted_copy(values)?;
    let n = values.len();
    let mean = accum::mean(values);
    let std = if n > 1 {
        (accum::sum(values.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(StatsSummary {
        count: n,
        mean,
        std,
        v: (mean != 0.0).then(|| std / mean),
        median: quantile_sorted(&sorted, 0.5),
        q25: quantile_sorted(&sorted, 0.25),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
        min: sorted[0],
    })
}

/// Five-number summary with 1.5 IQR whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    let sorted = sorted_copy(values)?;
    let q25 = quantile_sorted(&sorted, 0.25);
    let q75 = quantile_sorted(&sorted, 0.75);
    let iqr = q75 - q25;
    let (lo_fence, hi_fence) = (q25 - 1.5 * iqr, q75 + 1.5 * iqr);
    let inside = |v: &&f64| **v >= lo_fence && **v <= hi_fence;
    // The quartiles always lie inside the fences, so both searches succeed.
    let whisker_low = *sorted.iter().find(inside).unwrap_or(&q25);
    let whisker_high = *sorted.iter().rev().find(inside).unwrap_or(&q75);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();
    Ok(BoxplotStats {
        median: quantile_sorted(&sorted, 0.5),
        q25,
        q75,
        whisker_low,
        whisker_high,
        outliers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pos" | "positive" => Ok(Polarity::Positive),
            "neg" | "negative" => Ok(Polarity::Negative),
            other => Err(Error::Parse(format!("unknown polarity {other:?}"))),
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Polarity::Positive => "pos",
            Polarity::Negative => "neg",
        }
    }
}

/// Closed time interval in seconds relative to stimulus onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub lo_s: f64,
    pub hi_s: f64,
}

impl TimeWindow {
    pub fn from_ms(lo_ms: f64, hi_ms: f64) -> Self {
        Self {
            lo_s: lo_ms / 1000.0,
            hi_s: hi_ms / 1000.0,
        }
    }

    /// Parses `<lo_ms>:<hi_ms>`.
    pub fn parse_ms(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("window {s:?} is not <lo_ms>:<hi_ms>")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("window bound {v:?}: {e}")))
        };
        let w = Self::from_ms(parse(lo)?, parse(hi)?);
        if w.lo_s.partial_cmp(&w.hi_s).is_none_or(|o| o.is_gt()) {
            return Err(Error::Parse(format!("window {s:?} has lo > hi")));
        }
        Ok(w)
    }

    /// The adjacent window of equal width ending where this one starts,
    /// clipped at stimulus onset.
    pub fn preceding(&self) -> Self {
        let width = self.hi_s - self.lo_s;
        Self {
            lo_s: (self.lo_s - width).max(0.0),
            hi_s: self.lo_s,
        }
    }
}

/// Search interval and polarity of a named component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub name: String,
    pub window: TimeWindow,
    pub polarity: Polarity,
    /// Window searched for the opposite-polarity extremum used by the
    /// amplitude measure.
    pub reference_window: TimeWindow,
}

impl ComponentSpec {
    /// Positive deflection searched in 150-275 ms, amplitude against the
    /// N100 trough in 80-120 ms.
    pub fn p200() -> Self {
        Self {
            name: "P200".into(),
            window: TimeWindow::from_ms(150.0, 275.0),
            polarity: Polarity::Positive,
            reference_window: TimeWindow::from_ms(80.0, 120.0),
        }
    }

    /// Negative deflection searched in 80-120 ms.
    pub fn n100() -> Self {
        let window = TimeWindow::from_ms(80.0, 120.0);
        Self {
            name: "N100".into(),
            window,
            polarity: Polarity::Negative,
            reference_window: window.preceding(),
        }
    }

    pub fn custom(window: TimeWindow, polarity: Polarity) -> Self {
        Self {
            name: "component".into(),
            window,
            polarity,
            reference_window: window.preceding(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentMeasures {
    pub delay_s: f64,
    pub peak_uv: f64,
    pub amplitude_uv: f64,
    pub window: TimeWindow,
    pub polarity: Polarity,
}

/// Extremum of the requested polarity among post-stimulus samples inside
/// `window`; earliest index wins ties.
fn extremum_in(
    samples: &[f64],
    times: &[f64],
    window: TimeWindow,
    polarity: Polarity,
) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (k, (&t, &v)) in times.iter().zip(samples).enumerate() {
        if t < -TIME_EPS || t < window.lo_s - TIME_EPS || t > window.hi_s + TIME_EPS {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => match polarity {
                Polarity::Positive => v > samples[b],
                Polarity::Negative => v < samples[b],
            },
        };
        if better {
            best = Some(k);
        }
    }
    best.ok_or(Error::EmptyWindow {
        lo_s: window.lo_s,
        hi_s: window.hi_s,
    })
}

pub fn measure_component(avg: &AverageSignal, spec: &ComponentSpec) -> Result<ComponentMeasures> {
    let times = avg.time_axis();
    let peak = extremum_in(&avg.samples, &times, spec.window, spec.polarity)?;
    let opposite = extremum_in(
        &avg.samples,
        &times,
        spec.reference_window,
        spec.polarity.opposite(),
    )?;
    Ok(ComponentMeasures {
        delay_s: times[peak].max(0.0),
        peak_uv: avg.samples[peak],
        amplitude_uv: avg.samples[peak] - avg.samples[opposite],
        window: spec.window,
        polarity: spec.polarity,
    })
}

/// Per-trial distances of a held-out set to one average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeScores {
    pub scheme: Scheme,
    pub rms: Vec<f64>,
    pub mad: Vec<f64>,
    pub rms_stats: StatsSummary,
    pub mad_stats: StatsSummary,
    pub rms_box: BoxplotStats,
    pub mad_box: BoxplotStats,
}

/// RMS and MAD of every trial to each average, with summaries.
pub fn scheme_comparison(trials: &TrialSet, averages: &[AverageSignal]) -> Result<Vec<SchemeScores>> {
    if trials.is_empty() {
        return Err(Error::Empty("held-out trials"));
    }
    averages
        .iter()
        .map(|avg| {
            let rms = trials
                .rows()
                .map(|s| rms_to_average(s, &avg.samples))
                .collect::<Result<Vec<_>>>()?;
            let mad = trials
                .rows()
                .map(|s| mad_to_average(s, &avg.samples))
                .collect::<Result<Vec<_>>>()?;
            Ok(SchemeScores {
                scheme: avg.scheme,
                rms_stats: summary_stats(&rms)?,
                mad_stats: summary_stats(&mad)?,
                rms_box: boxplot_stats(&rms)?,
                mad_box: boxplot_stats(&mad)?,
                rms,
                mad,
            })
        })
        .collect()
}
