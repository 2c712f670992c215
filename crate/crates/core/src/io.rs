//! Trial files, manifests and plot-data tables.
//!
//! A trial file is plain comma-separated text with one row per trial and
//! no header. Samples are written with 17 significant digits, which reads
//! back bit-exactly. Metadata lives in a JSON manifest next to it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{AverageSignal, Scheme, SamplewiseBand, Trial, TrialSet, MICROVOLT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFileManifest {
    pub fs_hz: f64,
    pub prestim_ms: f64,
    pub channel: String,
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub n_trials: usize,
    pub n_samples: usize,
}

impl TrialFileManifest {
    pub fn for_set(ts: &TrialSet) -> Self {
        let labels = ts
            .trials
            .iter()
            .map(|t| t.label.clone())
            .collect::<Option<Vec<String>>>();
        Self {
            fs_hz: ts.fs_hz,
            prestim_ms: ts.prestim_ms,
            channel: ts.channel.clone(),
            units: ts.units.clone(),
            labels,
            n_trials: ts.len(),
            n_samples: ts.epoch_len(),
        }
    }
}

/// `trials.csv` -> `trials.manifest.json`.
pub fn manifest_path_for(data: &Path) -> PathBuf {
    data.with_extension("manifest.json")
}

pub fn format_sample(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| format_sample(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            line.split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: {field:?}: {e}", n + 1))
                    })
                })
                .collect()
        })
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes the data file and its manifest (at `manifest_path_for(data)`).
pub fn write_trials(data: &Path, ts: &TrialSet) -> Result<PathBuf> {
    write_text(data, &format_rows(ts.rows()))?;
    let manifest = manifest_path_for(data);
    write_json(&manifest, &TrialFileManifest::for_set(ts))?;
    Ok(manifest)
}

/// Reads a trial file. Trial ids are row numbers.
pub fn read_trials(data: &Path, manifest: Option<&Path>) -> Result<TrialSet> {
    let manifest_path = manifest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| manifest_path_for(data));
    let m: TrialFileManifest = read_json(&manifest_path)?;
    let rows = parse_rows(&read_text(data)?)?;
    trials_from_parts(rows, &m)
}

pub fn trials_from_parts(rows: Vec<Vec<f64>>, m: &TrialFileManifest) -> Result<TrialSet> {
    if rows.len() != m.n_trials {
        return Err(Error::Parse(format!(
            "manifest lists {} trials, file has {}",
            m.n_trials,
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != m.n_samples) {
        return Err(Error::LengthMismatch {
            left: m.n_samples,
            right: r.len(),
        });
    }
    if let Some(labels) = &m.labels {
        if labels.len() != rows.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
    }
    let trials = rows
        .into_iter()
        .enumerate()
        .map(|(id, samples)| {
            let t = Trial::new(id, samples);
            match &m.labels {
                Some(l) => t.with_label(l[id].clone()),
                None => t,
            }
        })
        .collect();
    let mut ts = TrialSet {
        trials,
        fs_hz: m.fs_hz,
        prestim_ms: m.prestim_ms,
        channel: m.channel.clone(),
        units: m.units.clone(),
    };
    ts = crate::signal::validate_trialset(ts)?;
    debug_assert_eq!(ts.units, MICROVOLT);
    Ok(ts)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Averages as columns: `time_s` then one column per scheme.
pub fn format_averages(averages: &[AverageSignal]) -> Result<String> {
    let first = averages.first().ok_or(Error::Empty("averages"))?;
    if let Some(a) = averages.iter().find(|a| a.len() != first.len()) {
        return Err(Error::LengthMismatch {
            left: first.len(),
            right: a.len(),
        });
    }
    let mut out = String::from("time_s");
    for a in averages {
        out.push(',');
        out.push_str(a.scheme.name());
    }
    out.push('\n');
    for (n, t) in first.time_axis().iter().enumerate() {
        out.push_str(&format_sample(*t));
        for a in averages {
            out.push(',');
            out.push_str(&format_sample(a.samples[n]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Sidecar for an averages file: the epoch metadata and per-scheme trial
/// counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragesManifest {
    pub fs_hz: f64,
    pub prestim_ms: f64,
    pub trial_count: usize,
}

pub fn write_averages(path: &Path, averages: &[AverageSignal]) -> Result<()> {
    write_text(path, &format_averages(averages)?)?;
    let first = &averages[0];
    write_json(
        &manifest_path_for(path),
        &AveragesManifest {
            fs_hz: first.fs_hz,
            prestim_ms: first.prestim_ms,
            trial_count: first.trial_count,
        },
    )
}

pub fn read_averages(path: &Path) -> Result<Vec<AverageSignal>> {
    let m: AveragesManifest = read_json(&manifest_path_for(path))?;
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or(Error::Empty("averages file"))?
        .split(',')
        .collect();
    if header.first() != Some(&"time_s") {
        return Err(Error::Parse(format!("{}: missing time_s column", path.display())));
    }
    let schemes = header[1..]
        .iter()
        .map(|s| Scheme::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let rows = parse_rows(&lines.collect::<Vec<_>>().join("\n"))?;
    let mut columns = vec![Vec::with_capacity(rows.len()); schemes.len()];
    for row in &rows {
        if row.len() != schemes.len() + 1 {
            return Err(Error::LengthMismatch {
                left: schemes.len() + 1,
                right: row.len(),
            });
        }
        for (c, v) in columns.iter_mut().zip(&row[1..]) {
            c.push(*v);
        }
    }
    Ok(schemes
        .into_iter()
        .zip(columns)
        .map(|(scheme, samples)| AverageSignal {
            samples,
            scheme,
            trial_count: m.trial_count,
            fs_hz: m.fs_hz,
            prestim_ms: m.prestim_ms,
        })
        .collect())
}

/// Band plot data: `time_s,mean,std`.
pub fn format_band(band: &SamplewiseBand, time: &[f64]) -> String {
    let mut out = String::from("time_s,mean,std\n");
    for ((t, m), s) in time.iter().zip(&band.mean).zip(&band.std) {
        out.push_str(&format!("{},{},{}\n", format_sample(*t), format_sample(*m), format_sample(*s)));
    }
    out
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    write_text(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_text_round_trips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 5e-324, f64::MAX, 123456.789, -0.0] {
            let back: f64 = format_sample(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn rows_have_no_header() {
        let text = format_rows([&[1.0, 2.0][..], &[3.0, 4.0][..]]);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_rows(&text).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn bad_field_is_a_parse_error() {
        assert!(matches!(parse_rows("1,x\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("t.csv");
        let ts = TrialSet::new(
            vec![
                Trial::new(0, vec![0.1, 0.2, 0.3]).with_label("x"),
                Trial::new(1, vec![-1.5, 2.0 / 3.0, 7.0]).with_label("y"),
            ],
            250.0,
            4.0,
        )
        .unwrap();
        let m = write_trials(&data, &ts).unwrap();
        assert!(m.ends_with("t.manifest.json"));
        assert_eq!(read_trials(&data, None).unwrap(), ts);
    }

    #[test]
    fn manifest_shape_is_checked() {
        let m = TrialFileManifest {
            fs_hz: 100.0,
            prestim_ms: 0.0,
            channel: "c".into(),
            units: MICROVOLT.into(),
            labels: None,
            n_trials: 2,
            n_samples: 2,
        };
        assert!(trials_from_parts(vec![vec![0.0, 0.0]], &m).is_err());
        assert!(trials_from_parts(vec![vec![0.0, 0.0], vec![0.0]], &m).is_err());
    }

    #[test]
    fn averages_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("avg.csv");
        let mk = |scheme, v: f64| AverageSignal {
            samples: vec![v, v + 1.0, v / 3.0],
            scheme,
            trial_count: 5,
            fs_hz: 100.0,
            prestim_ms: 10.0,
        };
        let avgs = vec![mk(Scheme::Conventional, 1.0), mk(Scheme::FilteredDtw, 2.0)];
        write_averages(&path, &avgs).unwrap();
        assert_eq!(read_averages(&path).unwrap(), avgs);
    }
}
