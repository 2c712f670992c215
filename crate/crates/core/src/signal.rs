//! Core domain types: trials, trial sets and average signals.
//!
//! Sample positions are 0-based here. Documentation elsewhere may speak of
//! samples `n = 1..N`; sample `n` of that convention is index `n - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MICROVOLT: &str = "microvolt";

/// One stimulus-locked epoch of voltage samples, in microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub samples: Vec<f64>,
    pub label: Option<String>,
}

impl Trial {
    pub fn new(id: usize, samples: Vec<f64>) -> Self {
        Self {
            id,
            samples,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A batch of equal-length epochs from one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub fs_hz: f64,
    pub prestim_ms: f64,
    pub channel: String,
    pub units: String,
}

impl TrialSet {
    /// Builds and validates a set. Trial ids are taken from the trials.
    pub fn new(trials: Vec<Trial>, fs_hz: f64, prestim_ms: f64) -> Result<Self> {
        validate_trialset(Self {
            trials,
            fs_hz,
            prestim_ms,
            channel: String::from("ch0"),
            units: MICROVOLT.to_string(),
        })
    }

    /// Builds a set from raw rows, numbering trials `0..T`.
    pub fn from_rows(rows: Vec<Vec<f64>>, fs_hz: f64, prestim_ms: f64) -> Result<Self> {
        let trials = rows
            .into_iter()
            .enumerate()
            .map(|(id, s)| Trial::new(id, s))
            .collect();
        Self::new(trials, fs_hz, prestim_ms)
    }

    pub fn with_channel(mut self, channel: impl Into<String>) -> Self {
        self.channel = channel.into();
        self
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Epoch length N (0 for an empty set).
    pub fn epoch_len(&self) -> usize {
        self.trials.first().map_or(0, Trial::len)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.trials.iter().map(|t| t.samples.as_slice())
    }

    /// Index of the first sample at or after stimulus onset.
    pub fn onset_index(&self) -> usize {
        onset_index(self.fs_hz, self.prestim_ms)
    }

    /// Same metadata, different trials. Does not re-validate.
    pub fn with_trials(&self, trials: Vec<Trial>) -> Self {
        Self {
            trials,
            fs_hz: self.fs_hz,
            prestim_ms: self.prestim_ms,
            channel: self.channel.clone(),
            units: self.units.clone(),
        }
    }

    /// Subset by position (not by id), in the given order.
    pub fn select(&self, positions: &[usize]) -> Self {
        self.with_trials(positions.iter().map(|&p| self.trials[p].clone()).collect())
    }

    /// Distinct labels in first-appearance order.
    pub fn labels(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for t in &self.trials {
            if let Some(l) = &t.label {
                if !seen.contains(l) {
                    seen.push(l.clone());
                }
            }
        }
        seen
    }

    pub fn map_samples(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        self.with_trials(
            self.trials
                .iter()
                .map(|t| Trial {
                    id: t.id,
                    samples: f(&t.samples),
                    label: t.label.clone(),
                })
                .collect(),
        )
    }
}

/// Which averaging scheme produced a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Conventional,
    Dtw,
    FilteredDtw,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Conventional, Scheme::Dtw, Scheme::FilteredDtw];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Conventional => "conventional",
            Scheme::Dtw => "dtw",
            Scheme::FilteredDtw => "filtered",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Scheme::Conventional),
            "dtw" => Ok(Scheme::Dtw),
            "filtered" | "filtered-dtw" => Ok(Scheme::FilteredDtw),
            other => Err(Error::Parse(format!("unknown scheme {other:?}"))),
        }
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.name().into()
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageSignal {
    pub samples: Vec<f64>,
    pub scheme: Scheme,
    pub trial_count: usize,
    pub fs_hz: f64,
    pub prestim_ms: f64,
}

impl AverageSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn onset_index(&self) -> usize {
        onset_index(self.fs_hz, self.prestim_ms)
    }

    pub fn time_axis(&self) -> Vec<f64> {
        axis(self.samples.len(), self.fs_hz, self.prestim_ms)
    }
}

/// Per-sample mean and population standard deviation across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplewiseBand {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub scheme: Scheme,
}

/// Checks every trial-set invariant and returns the set unchanged.
pub fn validate_trialset(ts: TrialSet) -> Result<TrialSet> {
    if !(ts.fs_hz.is_finite() && ts.fs_hz > 0.0) {
        return Err(Error::BadRate(ts.fs_hz));
    }
    if ts.units != MICROVOLT {
        return Err(Error::BadUnits(ts.units));
    }
    if !(ts.prestim_ms.is_finite() && ts.prestim_ms >= 0.0) {
        return Err(Error::BadEpoch(format!("prestim_ms {}", ts.prestim_ms)));
    }
    let Some(first) = ts.trials.first() else {
        return Err(Error::Empty("trial set"));
    };
    let n = first.len();
    for (pos, t) in ts.trials.iter().enumerate() {
        if t.len() != n {
            return Err(Error::RaggedTrials {
                trial: pos,
                expected: n,
                found: t.len(),
            });
        }
        if let Some(index) = t.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { trial: pos, index });
        }
    }
    if n < 2 {
        return Err(Error::BadEpoch(format!("epoch length {n} < 2")));
    }
    if ts.prestim_ms * ts.fs_hz / 1000.0 >= n as f64 {
        return Err(Error::BadEpoch(format!(
            "pre-stimulus {} ms does not fit in {n} samples at {} Hz",
            ts.prestim_ms, ts.fs_hz
        )));
    }
    Ok(ts)
}

/// Sample times in seconds relative to stimulus onset.
pub fn time_axis(ts: &TrialSet) -> Vec<f64> {
    axis(ts.epoch_len(), ts.fs_hz, ts.prestim_ms)
}

pub(crate) fn axis(n: usize, fs_hz: f64, prestim_ms: f64) -> Vec<f64> {
    let offset = prestim_ms / 1000.0;
    (0..n).map(|k| k as f64 / fs_hz - offset).collect()
}

pub(crate) fn onset_index(fs_hz: f64, prestim_ms: f64) -> usize {
    // Smallest k with k / fs - prestim / 1000 >= 0, computed on the same
    // expression as the axis so the two never disagree.
    let offset = prestim_ms / 1000.0;
    let mut k = (offset * fs_hz).floor().max(0.0) as usize;
    while (k as f64 / fs_hz - offset) < 0.0 {
        k += 1;
    }
    while k > 0 && ((k - 1) as f64 / fs_hz - offset) >= 0.0 {
        k -= 1;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: Vec<Vec<f64>>, fs: f64, pre: f64) -> Result<TrialSet> {
        TrialSet::from_rows(rows, fs, pre)
    }

    #[test]
    fn well_formed_set_validates() {
        let ts = set(vec![vec![0.0; 500]; 3], 500.0, 200.0).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.epoch_len(), 500);
    }

    #[test]
    fn ragged_trials_rejected() {
        let err = set(vec![vec![0.0; 500], vec![0.0; 499]], 500.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::RaggedTrials { trial: 1, .. }));
    }

    #[test]
    fn nan_rejected() {
        let mut row = vec![0.0; 10];
        row[4] = f64::NAN;
        let err = set(vec![row], 500.0, 0.0).unwrap_err();
        assert_eq!(err, Error::NonFinite { trial: 0, index: 4 });
    }

    #[test]
    fn bad_rate_rejected() {
        assert!(matches!(
            set(vec![vec![0.0; 4]], 0.0, 0.0),
            Err(Error::BadRate(_))
        ));
        assert!(matches!(
            set(vec![vec![0.0; 4]], -5.0, 0.0),
            Err(Error::BadRate(_))
        ));
    }

    #[test]
    fn prestim_must_fit() {
        assert!(matches!(
            set(vec![vec![0.0; 100]], 500.0, 200.0),
            Err(Error::BadEpoch(_))
        ));
    }

    #[test]
    fn other_units_rejected() {
        let mut ts = set(vec![vec![0.0; 4]], 10.0, 0.0).unwrap();
        ts.units = "volt".into();
        assert!(matches!(validate_trialset(ts), Err(Error::BadUnits(_))));
    }

    #[test]
    fn validation_is_idempotent() {
        let ts = set(vec![vec![1.0, 2.0, 3.0]; 2], 100.0, 10.0).unwrap();
        let again = validate_trialset(ts.clone()).unwrap();
        assert_eq!(ts, again);
    }

    #[test]
    fn axis_for_standard_epoch() {
        let ts = set(vec![vec![0.0; 500]], 500.0, 200.0).unwrap();
        let t = time_axis(&ts);
        assert_eq!(t.len(), 500);
        assert!((t[0] + 0.200).abs() < 1e-15);
        assert!((t[499] - 0.798).abs() < 1e-12);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 0.002).abs() < 1e-12);
        }
        assert_eq!(ts.onset_index(), 100);
        assert!(t[100] >= 0.0 && t[99] < 0.0);
    }

    #[test]
    fn axis_trivial_cases() {
        let ts = set(vec![vec![0.0; 3]], 1.0, 0.0).unwrap();
        assert_eq!(time_axis(&ts), vec![0.0, 1.0, 2.0]);
        let ts = set(vec![vec![0.0; 2]], 256.0, 0.0).unwrap();
        assert_eq!(time_axis(&ts), vec![0.0, 1.0 / 256.0]);
    }

    #[test]
    fn onset_index_matches_axis_for_odd_rates() {
        for &(fs, pre) in &[(175.0, 200.0), (250.0, 200.0), (333.0, 17.0), (1.0, 0.0)] {
            let ax = axis(400, fs, pre);
            let k = onset_index(fs, pre);
            assert!(ax[k] >= 0.0);
            if k > 0 {
                assert!(ax[k - 1] < 0.0);
            }
        }
    }
}
