//! Batch commands behind the `erpalign` binary.
//!
//! Each command reads its inputs from the resolved [`ExperimentConfig`],
//! writes data files under `cfg.out` and returns a [`Report`]. Parallel work
//! runs on a pool sized by `cfg.workers`; results never depend on it.

use std::path::{Path, PathBuf};

use crate::classify::{crossvalidate, SvmParams};
use crate::config::{ExperimentConfig, PreprocessConfig};
use crate::error::{Error, Result};
use crate::filters::resample_rational;
use crate::io;
use crate::metrics::{
    measure_component, scheme_comparison, summary_stats, boxplot_stats, ComponentMeasures, SchemeScores,
};
use crate::pipeline::{
    all_averages, kfold, preprocess, reject_artifacts, samplewise_band, split_even, RejectionReport,
    SchemeAverages, SplitSpec,
};
use crate::report::{boxplot_table, num, opt_num, stats_table, Report, Section, Table};
use crate::signal::{time_axis, AverageSignal, Scheme, TrialSet};
use crate::synth::{generate_classes, generate_trials, GroundTruth};

/// A finished command: its report and the data files it wrote.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::BadSpec(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn new_report(command: &str, cfg: &ExperimentConfig) -> Report {
    Report::new(command, cfg.report_toml(), cfg.seed)
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn load_input(cfg: &ExperimentConfig) -> Result<TrialSet> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::BadSpec("an input trial file is required (--input)".into()))?;
    io::read_trials(input, cfg.manifest.as_deref())
}

/// The synthetic set described by `cfg.synth`, seeded by `cfg.seed`. A
/// single class keeps its ground truth; several classes are labelled.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<(TrialSet, Option<GroundTruth>)> {
    let s = &cfg.synth;
    if s.extra_classes.is_empty() {
        let mut jitter = s.base.jitter.clone();
        jitter.seed = cfg.seed;
        let (ts, truth) = generate_trials(&s.base.template, s.base.trials, &jitter)?;
        Ok((ts, Some(truth)))
    } else {
        Ok((generate_classes(&s.classes(), cfg.seed)?, None))
    }
}

/// Low-pass every trial, then screen artifacts.
pub fn clean(ts: &TrialSet, p: &PreprocessConfig) -> Result<(TrialSet, RejectionReport)> {
    let filtered = preprocess(ts, p.lowpass_hz, p.baseline)?;
    reject_artifacts(&filtered, p.amp_range_uv, p.var_factor)
}

fn set_section(title: &str, ts: &TrialSet) -> Section {
    Section::new(title)
        .entry("trials", ts.len())
        .entry("samples", ts.epoch_len())
        .entry("fs_hz", ts.fs_hz)
        .entry("prestim_ms", ts.prestim_ms)
        .entry("labels", {
            let labels = ts.labels();
            if labels.is_empty() {
                "none".to_string()
            } else {
                labels.join(";")
            }
        })
}

fn rejection_section(r: &RejectionReport) -> Section {
    let ids = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
    Section::new("rejection")
        .entry("kept", r.kept.len())
        .entry("rejected_amplitude", r.rejected_amplitude.len())
        .entry("rejected_variance", r.rejected_variance.len())
        .entry("amp_range_uv", r.amp_range_uv)
        .entry("var_factor", r.var_factor)
        .entry("median_variance", num(r.median_variance))
        .entry("rejected_amplitude_ids", ids(&r.rejected_amplitude))
        .entry("rejected_variance_ids", ids(&r.rejected_variance))
}

fn selected(cfg: &ExperimentConfig, a: &SchemeAverages) -> Vec<AverageSignal> {
    cfg.schemes.iter().map(|&s| a.get(s).clone()).collect()
}

fn trials_of(a: &SchemeAverages, ts: &TrialSet, scheme: Scheme) -> Vec<Vec<f64>> {
    match scheme {
        Scheme::Conventional => ts.rows().map(<[f64]>::to_vec).collect(),
        Scheme::Dtw => a.warped.clone(),
        Scheme::FilteredDtw => a.filtered_trials.clone(),
    }
}

fn component_table(averages: &[AverageSignal], cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(&["scheme", "component", "delay_s", "peak_uv", "amplitude_uv"]);
    for avg in averages {
        for spec in &cfg.components {
            let m = measure_component(avg, spec)?;
            t.push(vec![
                avg.scheme.name().into(),
                spec.name.clone(),
                num(m.delay_s),
                num(m.peak_uv),
                num(m.amplitude_uv),
            ]);
        }
    }
    Ok(t)
}

pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (ts, truth) = synthesize(cfg)?;
    let data = out_path(cfg, "trials.csv");
    let manifest = io::write_trials(&data, &ts)?;
    let mut files = vec![data, manifest];
    let mut report = new_report("synth", cfg);
    report.push(set_section("trials", &ts));
    if let Some(truth) = truth {
        let path = out_path(cfg, "ground_truth.json");
        io::write_json(&path, &truth)?;
        files.push(path);
        let shifts = summary_stats(&truth.shifts_ms)?;
        let scales = summary_stats(&truth.scales)?;
        report.push(
            Section::new("ground truth")
                .table(stats_table(&[("shift_ms", &shifts), ("scale", &scales)])),
        );
    }
    Ok(Outcome { report, files })
}

pub fn cmd_preprocess(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ts = load_input(cfg)?;
    let (cleaned, rejection) = clean(&ts, &cfg.preprocess)?;
    let data = out_path(cfg, "clean.csv");
    let manifest = io::write_trials(&data, &cleaned)?;
    let mut report = new_report("preprocess", cfg);
    report.push(set_section("input", &ts));
    report.push(rejection_section(&rejection));
    Ok(Outcome {
        report,
        files: vec![data, manifest],
    })
}

/// Averages, warped-trial dumps and dispersion bands for `ts`.
pub fn average_outputs(cfg: &ExperimentConfig, ts: &TrialSet, report: &mut Report) -> Result<Vec<PathBuf>> {
    let all = all_averages(ts, cfg.cutoff_mode)?;
    let averages = selected(cfg, &all);
    let path = out_path(cfg, "averages.csv");
    io::write_averages(&path, &averages)?;
    let mut files = vec![path.clone(), io::manifest_path_for(&path)];
    let time = time_axis(ts);
    let mut bands = Table::new(&["scheme", "median_std", "mean_std"]);
    for &scheme in &cfg.schemes {
        let rows = trials_of(&all, ts, scheme);
        let band = samplewise_band(&rows, all.get(scheme))?;
        let mut sorted = band.std.clone();
        sorted.sort_by(f64::total_cmp);
        let s = summary_stats(&sorted)?;
        bands.push(vec![scheme.name().into(), num(s.median), num(s.mean)]);
        let path = out_path(cfg, &format!("band_{}.csv", scheme.name()));
        io::write_string(&path, &io::format_band(&band, &time))?;
        files.push(path);
        if scheme != Scheme::Conventional {
            let path = out_path(cfg, &format!("trials_{}.csv", scheme.name()));
            io::write_string(&path, &io::format_rows(rows.iter().map(Vec::as_slice)))?;
            files.push(path);
        }
    }
    report.push(set_section("input", ts));
    report.push(Section::new("components").table(component_table(&averages, cfg)?));
    report.push(Section::new("sample-wise dispersion").table(bands));
    Ok(files)
}

pub fn cmd_average(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ts = load_input(cfg)?;
    let mut report = new_report("average", cfg);
    let files = average_outputs(cfg, &ts, &mut report)?;
    Ok(Outcome { report, files })
}

fn pool_scores(parts: Vec<Vec<SchemeScores>>) -> Result<Vec<SchemeScores>> {
    let n = parts.first().map(Vec::len).unwrap_or(0);
    (0..n)
        .map(|s| {
            let rms: Vec<f64> = parts.iter().flat_map(|p| p[s].rms.iter().copied()).collect();
            let mad: Vec<f64> = parts.iter().flat_map(|p| p[s].mad.iter().copied()).collect();
            Ok(SchemeScores {
                scheme: parts[0][s].scheme,
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

/// Held-out distances under `cfg.split`: references built on the training
/// part only, scores pooled over every held-out trial.
pub fn held_out_scores(cfg: &ExperimentConfig, ts: &TrialSet) -> Result<Vec<SchemeScores>> {
    match cfg.split {
        SplitSpec::Halves => {
            let (s1, s2) = split_even(ts, cfg.seed)?;
            let refs = all_averages(&s1, cfg.cutoff_mode)?;
            scheme_comparison(&s2, &selected(cfg, &refs))
        }
        SplitSpec::KFold(k) => {
            let parts = kfold(ts, k, cfg.seed)?
                .iter()
                .map(|f| {
                    let refs = all_averages(&f.train, cfg.cutoff_mode)?;
                    scheme_comparison(&f.held_out, &selected(cfg, &refs))
                })
                .collect::<Result<Vec<_>>>()?;
            pool_scores(parts)
        }
    }
}

fn evaluation_outputs(cfg: &ExperimentConfig, scores: &[SchemeScores], report: &mut Report) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let names: Vec<String> = scores.iter().map(|s| s.scheme.name().to_string()).collect();
    for (metric, pick) in [
        ("rms", (|s: &SchemeScores| &s.rms_box) as fn(&SchemeScores) -> &_),
        ("mad", |s: &SchemeScores| &s.mad_box),
    ] {
        let rows: Vec<(&str, _)> = names.iter().map(String::as_str).zip(scores.iter().map(pick)).collect();
        let path = out_path(cfg, &format!("boxplot_{metric}.csv"));
        io::write_string(&path, &boxplot_table(&rows).to_csv())?;
        files.push(path);
    }
    let mut per_trial = Table::new(&["index", "scheme", "rms", "mad"]);
    for s in scores {
        for (i, (r, m)) in s.rms.iter().zip(&s.mad).enumerate() {
            per_trial.push(vec![i.to_string(), s.scheme.name().into(), io::format_sample(*r), io::format_sample(*m)]);
        }
    }
    let path = out_path(cfg, "scores.csv");
    io::write_string(&path, &per_trial.to_csv())?;
    files.push(path);

    let mad_ge_rms = scores
        .iter()
        .all(|s| s.rms.iter().zip(&s.mad).all(|(r, m)| m >= r));
    let rms_rows: Vec<(&str, _)> = names.iter().map(String::as_str).zip(scores.iter().map(|s| &s.rms_stats)).collect();
    let mad_rows: Vec<(&str, _)> = names.iter().map(String::as_str).zip(scores.iter().map(|s| &s.mad_stats)).collect();
    let mut medians = Table::new(&["scheme", "median_rms", "median_mad"]);
    for s in scores {
        medians.push(vec![s.scheme.name().into(), num(s.rms_stats.median), num(s.mad_stats.median)]);
    }
    report.push(
        Section::new("evaluation")
            .entry("held_out_trials", scores.first().map_or(0, |s| s.rms.len()))
            .entry("mad_ge_rms_everywhere", mad_ge_rms)
            .table(medians),
    );
    report.push(Section::new("rms").table(stats_table(&rms_rows)));
    report.push(Section::new("mad").table(stats_table(&mad_rows)));
    Ok(files)
}

/// Scores against given averages (`cfg.averages`), or against references
/// built under `cfg.split`.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ts = load_input(cfg)?;
    let scores = match &cfg.averages {
        Some(path) => {
            let avgs: Vec<AverageSignal> = io::read_averages(path)?
                .into_iter()
                .filter(|a| cfg.schemes.contains(&a.scheme))
                .collect();
            scheme_comparison(&ts, &avgs)?
        }
        None => held_out_scores(cfg, &ts)?,
    };
    let mut report = new_report("evaluate", cfg);
    report.push(set_section("input", &ts));
    let files = evaluation_outputs(cfg, &scores, &mut report)?;
    Ok(Outcome { report, files })
}

fn measures_by_fold(cfg: &ExperimentConfig, ts: &TrialSet, k: usize) -> Result<Vec<Vec<Vec<ComponentMeasures>>>> {
    kfold(ts, k, cfg.seed)?
        .iter()
        .map(|f| {
            let refs = all_averages(&f.train, cfg.cutoff_mode)?;
            cfg.schemes
                .iter()
                .map(|&s| {
                    cfg.components
                        .iter()
                        .map(|c| measure_component(refs.get(s), c))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Component measures of averages. With a k-fold split, the grid of
/// statistics over fold averages, each built from that fold's training
/// trials.
pub fn cmd_components(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut report = new_report("components", cfg);
    if let Some(path) = &cfg.averages {
        let avgs = io::read_averages(path)?;
        report.push(Section::new("components").table(component_table(&avgs, cfg)?));
        return Ok(Outcome { report, files: vec![] });
    }
    let ts = load_input(cfg)?;
    report.push(set_section("input", &ts));
    match cfg.split {
        SplitSpec::KFold(k) => {
            let grid = measures_by_fold(cfg, &ts, k)?;
            let mut summary = Table::new(&["component", "measure", "scheme", "mean", "std", "v", "median", "q25", "q75", "max", "min"]);
            let mut change = Table::new(&["component", "measure", "scheme", "mean_change_percent"]);
            for (c, spec) in cfg.components.iter().enumerate() {
                for (measure, get) in [
                    ("delay_s", (|m: &ComponentMeasures| m.delay_s) as fn(&ComponentMeasures) -> f64),
                    ("peak_uv", |m| m.peak_uv),
                    ("amplitude_uv", |m| m.amplitude_uv),
                ] {
                    let mut base_mean = None;
                    for (s, scheme) in cfg.schemes.iter().enumerate() {
                        let values: Vec<f64> = grid.iter().map(|fold| get(&fold[s][c])).collect();
                        let st = summary_stats(&values)?;
                        summary.push(vec![
                            spec.name.clone(),
                            measure.into(),
                            scheme.name().into(),
                            num(st.mean),
                            num(st.std),
                            opt_num(st.v),
                            num(st.median),
                            num(st.q25),
                            num(st.q75),
                            num(st.max),
                            num(st.min),
                        ]);
                        match base_mean {
                            None => base_mean = Some(st.mean),
                            Some(b) => change.push(vec![
                                spec.name.clone(),
                                measure.into(),
                                scheme.name().into(),
                                opt_num((b != 0.0).then(|| 100.0 * (st.mean - b) / b)),
                            ]),
                        }
                    }
                }
            }
            report.push(Section::new("fold statistics").entry("folds", k).table(summary));
            report.push(
                Section::new("change against first scheme")
                    .entry("baseline", cfg.schemes[0].name())
                    .table(change),
            );
        }
        SplitSpec::Halves => {
            let all = all_averages(&ts, cfg.cutoff_mode)?;
            report.push(Section::new("components").table(component_table(&selected(cfg, &all), cfg)?));
        }
    }
    Ok(Outcome { report, files: vec![] })
}

pub fn resample_set(ts: &TrialSet, up: usize, down: usize) -> Result<TrialSet> {
    let mut new_fs = ts.fs_hz;
    let mut rows = Vec::with_capacity(ts.len());
    for row in ts.rows() {
        let (y, fs) = resample_rational(row, ts.fs_hz, up, down)?;
        new_fs = fs;
        rows.push(y);
    }
    let trials = ts
        .trials
        .iter()
        .zip(rows)
        .map(|(t, samples)| crate::signal::Trial {
            id: t.id,
            samples,
            label: t.label.clone(),
        })
        .collect();
    crate::signal::validate_trialset(TrialSet {
        trials,
        fs_hz: new_fs,
        prestim_ms: ts.prestim_ms,
        channel: ts.channel.clone(),
        units: ts.units.clone(),
    })
}

pub fn cmd_resample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (up, down) = cfg
        .resample
        .ok_or_else(|| Error::BadSpec("a resampling factor is required (--resample L/M)".into()))?;
    let ts = load_input(cfg)?;
    let out = resample_set(&ts, up, down)?;
    let data = out_path(cfg, "resampled.csv");
    let manifest = io::write_trials(&data, &out)?;
    let mut report = new_report("resample", cfg);
    report.push(set_section("input", &ts));
    report.push(set_section("output", &out).entry("factor", format!("{up}/{down}")));
    Ok(Outcome {
        report,
        files: vec![data, manifest],
    })
}

fn classify_sections(cfg: &ExperimentConfig, ts: &TrialSet, report: &mut Report) -> Result<()> {
    let params = SvmParams {
        lambda: cfg.classify.lambda,
        epochs: cfg.classify.epochs,
        seed: cfg.seed,
    };
    let mut summary = Table::new(&["scheme", "accuracy", "fold_accuracies"]);
    let mut matrices = Vec::new();
    for &scheme in &cfg.schemes {
        let cv = crossvalidate(ts, cfg.classify.k, scheme, cfg.cutoff_mode, &params)?;
        let folds: Vec<String> = cv.fold_accuracies.iter().map(|&a| num(a)).collect();
        summary.push(vec![scheme.name().into(), num(cv.accuracy), folds.join(";")]);
        let mut header = vec!["true\\predicted"];
        header.extend(cv.confusion.labels.iter().map(String::as_str));
        let mut t = Table::new(&header);
        for (label, row) in cv.confusion.labels.iter().zip(&cv.confusion.counts) {
            let mut cells = vec![label.clone()];
            cells.extend(row.iter().map(usize::to_string));
            t.push(cells);
        }
        matrices.push((scheme, t, cv.confusion.total()));
    }
    report.push(Section::new("classification").entry("k", cfg.classify.k).table(summary));
    for (scheme, t, total) in matrices {
        report.push(
            Section::new(format!("confusion {}", scheme.name()))
                .entry("classified", total)
                .table(t),
        );
    }
    Ok(())
}

pub fn cmd_classify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let ts = load_input(cfg)?;
    let mut report = new_report("classify", cfg);
    report.push(set_section("input", &ts));
    classify_sections(cfg, &ts, &mut report)?;
    Ok(Outcome { report, files: vec![] })
}

/// Synthesis, preprocessing, averaging and evaluation of the base class,
/// and classification when the configuration defines several classes.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut report = new_report("run", cfg);
    let (ts, _) = synthesize(cfg)?;
    let mut files = vec![out_path(cfg, "trials.csv")];
    files.push(io::write_trials(&files[0], &ts)?);
    let (cleaned, rejection) = clean(&ts, &cfg.preprocess)?;
    report.push(rejection_section(&rejection));
    let base: Vec<usize> = (0..cleaned.len())
        .filter(|&p| {
            cleaned.trials[p]
                .label
                .as_deref()
                .is_none_or(|l| l == cfg.synth.base_label)
        })
        .collect();
    let base_set = cleaned.select(&base);
    files.extend(average_outputs(cfg, &base_set, &mut report)?);
    let scores = held_out_scores(cfg, &base_set)?;
    files.extend(evaluation_outputs(cfg, &scores, &mut report)?);
    if cleaned.labels().len() > 1 {
        classify_sections(cfg, &cleaned, &mut report)?;
    }
    Ok(Outcome { report, files })
}

/// Writes `<out>/<command>.report.<ext>` with the current time on its
/// timestamp line.
pub fn write_report(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(PathBuf, String)> {
    let generated = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let text = outcome.report.render(cfg.report_format, Some(generated));
    let path: PathBuf = Path::new(&cfg.out).join(format!(
        "{}.report.{}",
        outcome.report.command,
        cfg.report_format.extension()
    ));
    io::write_string(&path, &text)?;
    Ok((path, text))
}
