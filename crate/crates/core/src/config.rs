//! Experiment configuration, read from TOML and overridden by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{DEFAULT_EPOCHS, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::metrics::{ComponentSpec, Polarity, TimeWindow};
use crate::pipeline::{CutoffMode, SplitSpec};
use crate::signal::Scheme;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Parse(format!("report format {other:?}"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Text => "txt",
            ReportFormat::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub lowpass_hz: f64,
    pub amp_range_uv: f64,
    pub var_factor: f64,
    pub baseline: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            lowpass_hz: 30.0,
            amp_range_uv: 150.0,
            var_factor: 3.0,
            baseline: false,
        }
    }
}

/// An extra synthetic class: the base template with its positive
/// component moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassVariant {
    pub label: String,
    pub p200_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub base: SynthConfig,
    pub base_label: String,
    pub extra_classes: Vec<ClassVariant>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            base: SynthConfig::config_a(42),
            base_label: "a".into(),
            extra_classes: Vec::new(),
        }
    }
}

impl SynthSection {
    /// Every class as (label, config), the base class first.
    pub fn classes(&self) -> Vec<(String, SynthConfig)> {
        let mut out = vec![(self.base_label.clone(), self.base.clone())];
        for v in &self.extra_classes {
            out.push((v.label.clone(), self.base.clone().with_p200_at(v.p200_ms)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub k: usize,
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            k: 5,
            lambda: DEFAULT_LAMBDA,
            epochs: DEFAULT_EPOCHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub input: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Averages file for `evaluate` and `components`.
    pub averages: Option<PathBuf>,
    pub out: PathBuf,
    pub synth: SynthSection,
    pub preprocess: PreprocessConfig,
    pub schemes: Vec<Scheme>,
    pub cutoff_mode: CutoffMode,
    pub split: SplitSpec,
    pub components: Vec<ComponentSpec>,
    pub resample: Option<(usize, usize)>,
    pub classify: ClassifyConfig,
    pub report_format: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            workers: 0,
            input: None,
            manifest: None,
            averages: None,
            out: PathBuf::from("out"),
            synth: SynthSection::default(),
            preprocess: PreprocessConfig::default(),
            schemes: Scheme::ALL.to_vec(),
            cutoff_mode: CutoffMode::Fixed(30.0),
            split: SplitSpec::Halves,
            components: vec![ComponentSpec::p200()],
            resample: None,
            classify: ClassifyConfig::default(),
            report_format: ReportFormat::Text,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// The configuration as embedded in reports: the synthetic jitter seed
    /// follows `seed`, and the worker count is left out because results do
    /// not depend on it.
    pub fn report_toml(&self) -> String {
        let mut shown = self.clone();
        shown.synth.base.jitter.seed = self.seed;
        let mut value = toml::Table::try_from(&shown).expect("config is always representable as TOML");
        value.remove("workers");
        toml::to_string(&value).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.preprocess;
        if !(p.lowpass_hz > 0.0 && p.lowpass_hz.is_finite()) {
            return Err(Error::BadSpec(format!("lowpass {} Hz", p.lowpass_hz)));
        }
        if !(p.amp_range_uv >= 0.0 && p.var_factor > 0.0) {
            return Err(Error::BadSpec("rejection thresholds must be positive".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::BadSpec("no averaging scheme selected".into()));
        }
        if self.classify.k < 2 {
            return Err(Error::BadK {
                k: self.classify.k,
                count: 0,
            });
        }
        if self.classify.lambda.is_nan() || self.classify.lambda <= 0.0 || self.classify.epochs == 0 {
            return Err(Error::BadSpec("classifier needs lambda > 0 and epochs > 0".into()));
        }
        if let Some((up, down)) = self.resample {
            if up == 0 || down == 0 {
                return Err(Error::BadFactor { up, down });
            }
        }
        if let Some(w) = self.components.iter().find(|c| c.window.lo_s.partial_cmp(&c.window.hi_s).is_none_or(|o| o.is_gt())) {
            return Err(Error::BadSpec(format!("component {} window reversed", w.name)));
        }
        self.synth.base.template.validate()?;
        self.synth.base.jitter.validate()
    }
}

/// Parses `<L>/<M>`.
pub fn parse_ratio(s: &str) -> Result<(usize, usize)> {
    let (l, m) = s
        .split_once('/')
        .ok_or_else(|| Error::Parse(format!("resample factor {s:?} is not <L>/<M>")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("resample factor {s:?}: {e}")))
    };
    let (up, down) = (parse(l)?, parse(m)?);
    if up == 0 || down == 0 {
        return Err(Error::BadFactor { up, down });
    }
    Ok((up, down))
}

/// A component spec from CLI window and polarity flags.
pub fn component_from_flags(window: &str, polarity: &str) -> Result<ComponentSpec> {
    Ok(ComponentSpec::custom(
        TimeWindow::parse_ms(window)?,
        Polarity::parse(polarity)?,
    ))
}
