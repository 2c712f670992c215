//! Artifact rejection, preprocessing, the three averaging schemes, and the
//! data splits used for evaluation.
//!
//! Averages are reduced with compensated summation in ascending trial-id
//! order; per-trial work (alignment, filtering) runs on the rayon pool and
//! is collected in order, so results do not depend on the worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::{self, columnwise_mean};
use crate::error::{Error, Result};
use crate::filters::{apply_zero_phase, design_kaiser_lowpass, estimate_max_frequency, FirFilter};
use crate::metrics::quantile_sorted;
use crate::rng::SplitMix64;
use crate::signal::{AverageSignal, SamplewiseBand, Scheme, Trial, TrialSet};
use crate::warp::align_trial;

/// Transition width of every low-pass stage, in Hz.
pub const TRANSITION_HZ: f64 = 5.0;
/// Stopband attenuation of every low-pass stage, in dB.
pub const ATTENUATION_DB: f64 = 60.0;
/// Energy fraction used when estimating a trial's maximum frequency.
pub const MAX_FREQUENCY_ENERGY: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub kept: Vec<usize>,
    pub rejected_amplitude: Vec<usize>,
    pub rejected_variance: Vec<usize>,
    pub amp_range_uv: f64,
    pub var_factor: f64,
    /// Median within-trial variance over every input trial.
    pub median_variance: f64,
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Population variance of one trial.
pub fn trial_variance(x: &[f64]) -> f64 {
    let m = accum::mean(x);
    accum::sum(x.iter().map(|v| (v - m) * (v - m))) / x.len() as f64
}

/// Drops trials whose peak-to-peak range exceeds `amp_range_uv`, then those
/// whose variance exceeds `var_factor` times the median variance of all
/// input trials. The two screens are independent, so lowering either
/// threshold never keeps more trials. Survivors keep their order.
pub fn reject_artifacts(
    ts: &TrialSet,
    amp_range_uv: f64,
    var_factor: f64,
) -> Result<(TrialSet, RejectionReport)> {
    if !(amp_range_uv >= 0.0 && var_factor > 0.0) {
        return Err(Error::BadSpec(format!(
            "rejection thresholds {amp_range_uv} uV, factor {var_factor}"
        )));
    }
    if ts.is_empty() {
        return Err(Error::Empty("trial set"));
    }
    let variances: Vec<f64> = ts.trials.iter().map(|t| trial_variance(&t.samples)).collect();
    let mut sorted = variances.clone();
    sorted.sort_by(f64::total_cmp);
    let median_variance = quantile_sorted(&sorted, 0.5);
    let limit = var_factor * median_variance;

    let mut kept = Vec::new();
    let mut rejected_amplitude = Vec::new();
    let mut rejected_variance = Vec::new();
    for (t, v) in ts.trials.iter().zip(variances) {
        if peak_to_peak(&t.samples) > amp_range_uv {
            rejected_amplitude.push(t.id);
        } else if v > limit {
            rejected_variance.push(t.id);
        } else {
            kept.push(t.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty("all trials rejected"));
    }
    let report = RejectionReport {
        kept: kept.iter().map(|t| t.id).collect(),
        rejected_amplitude,
        rejected_variance,
        amp_range_uv,
        var_factor,
        median_variance,
    };
    Ok((ts.with_trials(kept), report))
}

/// Zero-phase low-pass of every trial at `lowpass_hz` (5 Hz transition,
/// 60 dB), optionally followed by subtraction of the pre-stimulus mean.
pub fn preprocess(ts: &TrialSet, lowpass_hz: f64, baseline: bool) -> Result<TrialSet> {
    let filter = design_kaiser_lowpass(ts.fs_hz, lowpass_hz, TRANSITION_HZ, ATTENUATION_DB)?;
    let onset = ts.onset_index();
    let trials = ts
        .trials
        .par_iter()
        .map(|t| {
            let mut samples = apply_zero_phase(&filter, &t.samples);
            if baseline && onset > 0 {
                let base = accum::mean(&samples[..onset]);
                samples.iter_mut().for_each(|v| *v -= base);
            }
            Trial {
                id: t.id,
                samples,
                label: t.label.clone(),
            }
        })
        .collect();
    Ok(ts.with_trials(trials))
}

/// Trials in ascending id order.
fn by_id(ts: &TrialSet) -> Vec<&Trial> {
    let mut refs: Vec<&Trial> = ts.trials.iter().collect();
    refs.sort_by_key(|t| t.id);
    refs
}

fn average_of(rows: &[Vec<f64>], scheme: Scheme, ts: &TrialSet) -> AverageSignal {
    AverageSignal {
        samples: columnwise_mean(rows.iter().map(Vec::as_slice), ts.epoch_len()),
        scheme,
        trial_count: rows.len(),
        fs_hz: ts.fs_hz,
        prestim_ms: ts.prestim_ms,
    }
}

pub fn conventional_average(ts: &TrialSet) -> Result<AverageSignal> {
    if ts.is_empty() {
        return Err(Error::Empty("trial set"));
    }
    let rows = by_id(ts);
    Ok(AverageSignal {
        samples: columnwise_mean(rows.iter().map(|t| t.samples.as_slice()), ts.epoch_len()),
        scheme: Scheme::Conventional,
        trial_count: rows.len(),
        fs_hz: ts.fs_hz,
        prestim_ms: ts.prestim_ms,
    })
}

fn check_reference(ts: &TrialSet, reference: &AverageSignal) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::Empty("trial set"));
    }
    if reference.len() != ts.epoch_len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: ts.epoch_len(),
        });
    }
    Ok(())
}

/// Warps every trial (ascending id order) onto `reference`.
pub fn warp_trials(ts: &TrialSet, reference: &AverageSignal) -> Result<Vec<Vec<f64>>> {
    check_reference(ts, reference)?;
    by_id(ts)
        .par_iter()
        .map(|t| align_trial(&reference.samples, &t.samples))
        .collect()
}

/// Average of the trials after alignment to `reference`. Also returns the
/// warped trials in ascending id order.
pub fn dtw_average(ts: &TrialSet, reference: &AverageSignal) -> Result<(AverageSignal, Vec<Vec<f64>>)> {
    let warped = warp_trials(ts, reference)?;
    Ok((average_of(&warped, Scheme::Dtw, ts), warped))
}

/// Cutoff of the low-pass applied to warped trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CutoffMode {
    /// Fixed passband edge in Hz.
    Fixed(f64),
    /// Per-trial maximum frequency of the original (unwarped) trial.
    Estimate,
}

impl CutoffMode {
    /// Parses `fixed:<hz>` or `estimate`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "estimate" {
            return Ok(CutoffMode::Estimate);
        }
        let hz = s
            .strip_prefix("fixed:")
            .ok_or_else(|| Error::Parse(format!("cutoff mode {s:?}")))?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("cutoff mode {s:?}: {e}")))?;
        if !(hz.is_finite() && hz > 0.0) {
            return Err(Error::Parse(format!("cutoff mode {s:?}: frequency must be positive")));
        }
        Ok(CutoffMode::Fixed(hz))
    }

    pub fn label(&self) -> String {
        match self {
            CutoffMode::Fixed(hz) => format!("fixed:{hz}"),
            CutoffMode::Estimate => "estimate".into(),
        }
    }
}

impl TryFrom<String> for CutoffMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<CutoffMode> for String {
    fn from(m: CutoffMode) -> String {
        m.label()
    }
}

/// Passband edge for one trial under `mode`, kept inside the valid design
/// range `[fs / N, fs / 2 - transition)`.
pub fn trial_cutoff(mode: CutoffMode, original: &[f64], fs_hz: f64) -> Result<f64> {
    match mode {
        CutoffMode::Fixed(hz) => Ok(hz),
        CutoffMode::Estimate => {
            let fm = estimate_max_frequency(original, fs_hz, MAX_FREQUENCY_ENERGY)?;
            let lowest = fs_hz / original.len() as f64;
            let highest = fs_hz / 2.0 - TRANSITION_HZ;
            Ok(fm.clamp(lowest, highest.max(lowest)))
        }
    }
}

/// Average of the warped trials after each is low-pass filtered. Returns
/// the filtered warped trials in ascending id order.
pub fn filtered_dtw_average(
    ts: &TrialSet,
    reference: &AverageSignal,
    mode: CutoffMode,
) -> Result<(AverageSignal, Vec<Vec<f64>>)> {
    let warped = warp_trials(ts, reference)?;
    filter_warped(ts, &warped, mode)
}

/// Low-pass stage of [`filtered_dtw_average`] for already-warped trials
/// (given in ascending id order of `ts`).
pub fn filter_warped(
    ts: &TrialSet,
    warped: &[Vec<f64>],
    mode: CutoffMode,
) -> Result<(AverageSignal, Vec<Vec<f64>>)> {
    let originals = by_id(ts);
    if originals.len() != warped.len() {
        return Err(Error::LengthMismatch {
            left: originals.len(),
            right: warped.len(),
        });
    }
    let cutoffs = originals
        .iter()
        .map(|t| trial_cutoff(mode, &t.samples, ts.fs_hz))
        .collect::<Result<Vec<f64>>>()?;
    let mut designs: BTreeMap<u64, FirFilter> = BTreeMap::new();
    for &c in &cutoffs {
        if let std::collections::btree_map::Entry::Vacant(slot) = designs.entry(c.to_bits()) {
            slot.insert(design_kaiser_lowpass(ts.fs_hz, c, TRANSITION_HZ, ATTENUATION_DB)?);
        }
    }
    let filtered: Vec<Vec<f64>> = warped
        .par_iter()
        .zip(cutoffs.par_iter())
        .map(|(w, c)| apply_zero_phase(&designs[&c.to_bits()], w))
        .collect();
    Ok((average_of(&filtered, Scheme::FilteredDtw, ts), filtered))
}

/// Per-sample mean and population standard deviation of `trials`.
pub fn samplewise_band(trials: &[Vec<f64>], avg: &AverageSignal) -> Result<SamplewiseBand> {
    if trials.is_empty() {
        return Err(Error::Empty("trials"));
    }
    let n = avg.len();
    if let Some(bad) = trials.iter().find(|t| t.len() != n) {
        return Err(Error::LengthMismatch {
            left: n,
            right: bad.len(),
        });
    }
    let mean = columnwise_mean(trials.iter().map(Vec::as_slice), n);
    let std = (0..n)
        .map(|k| {
            let ss = accum::sum(trials.iter().map(|t| (t[k] - mean[k]) * (t[k] - mean[k])));
            (ss / trials.len() as f64).sqrt()
        })
        .collect();
    Ok(SamplewiseBand {
        mean,
        std,
        scheme: avg.scheme,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SplitSpec {
    Halves,
    KFold(usize),
}

impl SplitSpec {
    /// Parses `halves` or `kfold:<k>`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "halves" {
            return Ok(SplitSpec::Halves);
        }
        let k = s
            .strip_prefix("kfold:")
            .ok_or_else(|| Error::Parse(format!("split {s:?}")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("split {s:?}: {e}")))?;
        if k < 2 {
            return Err(Error::BadK { k, count: 0 });
        }
        Ok(SplitSpec::KFold(k))
    }

    pub fn label(&self) -> String {
        match self {
            SplitSpec::Halves => "halves".into(),
            SplitSpec::KFold(k) => format!("kfold:{k}"),
        }
    }
}

impl TryFrom<String> for SplitSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<SplitSpec> for String {
    fn from(s: SplitSpec) -> String {
        s.label()
    }
}

/// Seeded random halves: `ceil(T/2)` trials to the first set. Both keep the
/// original trial order.
pub fn split_even(ts: &TrialSet, seed: u64) -> Result<(TrialSet, TrialSet)> {
    if ts.len() < 2 {
        return Err(Error::BadK { k: 2, count: ts.len() });
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let cut = ts.len().div_ceil(2);
    let mut first = order[..cut].to_vec();
    let mut second = order[cut..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((ts.select(&first), ts.select(&second)))
}

/// Held-out positions of each fold, each list ascending.
///
/// Positions are shuffled per label (labels in first-appearance order,
/// unlabelled trials as one group) and dealt round-robin over the folds,
/// continuing across groups. Fold sizes therefore differ by at most one and
/// each label is spread as evenly as possible.
pub fn kfold_indices(ts: &TrialSet, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > ts.len() {
        return Err(Error::BadK { k, count: ts.len() });
    }
    let mut groups: Vec<(Option<&str>, Vec<usize>)> = Vec::new();
    for (pos, t) in ts.trials.iter().enumerate() {
        let key = t.label.as_deref();
        match groups.iter_mut().find(|(l, _)| *l == key) {
            Some((_, members)) => members.push(pos),
            None => groups.push((key, vec![pos])),
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut dealt = 0usize;
    for (_, mut members) in groups {
        rng.shuffle(&mut members);
        for pos in members {
            folds[dealt % k].push(pos);
            dealt += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: TrialSet,
    pub held_out: TrialSet,
}

pub fn folds_from_indices(ts: &TrialSet, held_out: &[Vec<usize>]) -> Vec<Fold> {
    held_out
        .iter()
        .map(|test| {
            let train: Vec<usize> = (0..ts.len()).filter(|p| !test.contains(p)).collect();
            Fold {
                train: ts.select(&train),
                held_out: ts.select(test),
            }
        })
        .collect()
}

/// Seeded (stratified when labelled) k-fold partition.
pub fn kfold(ts: &TrialSet, k: usize, seed: u64) -> Result<Vec<Fold>> {
    Ok(folds_from_indices(ts, &kfold_indices(ts, k, seed)?))
}

/// All three averages of one trial set, with the intermediate signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeAverages {
    pub conventional: AverageSignal,
    pub dtw: AverageSignal,
    pub filtered: AverageSignal,
    pub warped: Vec<Vec<f64>>,
    pub filtered_trials: Vec<Vec<f64>>,
}

impl SchemeAverages {
    pub fn get(&self, scheme: Scheme) -> &AverageSignal {
        match scheme {
            Scheme::Conventional => &self.conventional,
            Scheme::Dtw => &self.dtw,
            Scheme::FilteredDtw => &self.filtered,
        }
    }

    pub fn all(&self) -> [AverageSignal; 3] {
        [
            self.conventional.clone(),
            self.dtw.clone(),
            self.filtered.clone(),
        ]
    }
}

/// Conventional average as the reference, then DTW and filtered-DTW
/// averages of the same trials against it.
pub fn all_averages(ts: &TrialSet, mode: CutoffMode) -> Result<SchemeAverages> {
    let conventional = conventional_average(ts)?;
    let warped = warp_trials(ts, &conventional)?;
    let dtw = average_of(&warped, Scheme::Dtw, ts);
    let (filtered, filtered_trials) = filter_warped(ts, &warped, mode)?;
    Ok(SchemeAverages {
        conventional,
        dtw,
        filtered,
        warped,
        filtered_trials,
    })
}

/// Average of `ts` under one scheme, referenced to its own conventional
/// average.
pub fn scheme_average(ts: &TrialSet, scheme: Scheme, mode: CutoffMode) -> Result<AverageSignal> {
    let conventional = conventional_average(ts)?;
    match scheme {
        Scheme::Conventional => Ok(conventional),
        Scheme::Dtw => Ok(dtw_average(ts, &conventional)?.0),
        Scheme::FilteredDtw => Ok(filtered_dtw_average(ts, &conventional, mode)?.0),
    }
}
