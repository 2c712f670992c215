use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use erpalign::commands::{self, Outcome};
use erpalign::config::{component_from_flags, parse_ratio, ExperimentConfig, ReportFormat};
use erpalign::pipeline::{CutoffMode, SplitSpec};
use erpalign::signal::Scheme;
use erpalign::{Error, Result};

#[derive(Parser)]
#[command(name = "erpalign", version, about = "Jitter-compensated trial averaging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a synthetic trial file with ground truth.
    Synth,
    /// Low-pass and artifact-screen a trial file.
    Preprocess,
    /// Conventional, DTW and filtered-DTW averages with dispersion bands.
    Average,
    /// RMS and MAD of held-out trials to each average.
    Evaluate,
    /// Component latency, peak and amplitude; per-fold grid with --split kfold:<k>.
    Components,
    /// Rational resampling of a trial file.
    Resample,
    /// Cross-validated template classification.
    Classify,
    /// Synthesis through classification in one pass.
    Run,
}

#[derive(clap::Args)]
struct Flags {
    /// TOML experiment configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Averages file to evaluate or measure instead of building references.
    #[arg(long, global = true)]
    averages: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// conventional, dtw, filtered or all (comma-separated list allowed).
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// fixed:<hz> or estimate.
    #[arg(long = "cutoff-mode", global = true)]
    cutoff_mode: Option<String>,
    #[arg(long, global = true)]
    lowpass: Option<f64>,
    #[arg(long = "amp-thresh", global = true)]
    amp_thresh: Option<f64>,
    #[arg(long = "var-factor", global = true)]
    var_factor: Option<f64>,
    #[arg(long, global = true)]
    baseline: bool,
    /// halves or kfold:<k>.
    #[arg(long, global = true)]
    split: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// <lo_ms>:<hi_ms>, post-stimulus.
    #[arg(long, global = true)]
    window: Option<String>,
    /// pos or neg.
    #[arg(long, global = true)]
    polarity: Option<String>,
    /// <L>/<M>.
    #[arg(long, global = true)]
    resample: Option<String>,
    /// Folds for classification.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// text or csv.
    #[arg(long = "report-format", global = true)]
    report_format: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    if s == "all" {
        return Ok(Scheme::ALL.to_vec());
    }
    s.split(',').map(|p| Scheme::parse(p.trim())).collect()
}

fn resolve(f: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &f.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &f.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &f.manifest {
        cfg.manifest = Some(v.clone());
    }
    if let Some(v) = &f.averages {
        cfg.averages = Some(v.clone());
    }
    if let Some(v) = &f.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &f.scheme {
        cfg.schemes = parse_schemes(v)?;
    }
    if let Some(v) = &f.cutoff_mode {
        cfg.cutoff_mode = CutoffMode::parse(v)?;
    }
    if let Some(v) = f.lowpass {
        cfg.preprocess.lowpass_hz = v;
    }
    if let Some(v) = f.amp_thresh {
        cfg.preprocess.amp_range_uv = v;
    }
    if let Some(v) = f.var_factor {
        cfg.preprocess.var_factor = v;
    }
    if f.baseline {
        cfg.preprocess.baseline = true;
    }
    if let Some(v) = &f.split {
        cfg.split = SplitSpec::parse(v)?;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    match (&f.window, &f.polarity) {
        (Some(w), p) => cfg.components = vec![component_from_flags(w, p.as_deref().unwrap_or("pos"))?],
        (None, Some(_)) => return Err(Error::BadSpec("--polarity needs --window".into())),
        (None, None) => {}
    }
    if let Some(v) = &f.resample {
        cfg.resample = Some(parse_ratio(v)?);
    }
    if let Some(v) = f.k {
        cfg.classify.k = v;
    }
    if let Some(v) = &f.report_format {
        cfg.report_format = ReportFormat::parse(v)?;
    }
    if let Some(v) = f.workers {
        cfg.workers = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    commands::with_workers(cfg.workers, || match command {
        Command::Synth => commands::cmd_synth(cfg),
        Command::Preprocess => commands::cmd_preprocess(cfg),
        Command::Average => commands::cmd_average(cfg),
        Command::Evaluate => commands::cmd_evaluate(cfg),
        Command::Components => commands::cmd_components(cfg),
        Command::Resample => commands::cmd_resample(cfg),
        Command::Classify => commands::cmd_classify(cfg),
        Command::Run => commands::cmd_run(cfg),
    })
}

fn error_record(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", error_record("Usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let result = resolve(&cli.flags).and_then(|cfg| {
        let outcome = dispatch(cli.command, &cfg)?;
        let (path, text) = commands::write_report(&cfg, &outcome)?;
        Ok((outcome, path, text))
    });
    match result {
        Ok((outcome, path, text)) => {
            print!("{text}");
            for f in outcome.files.iter().chain([&path]) {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
