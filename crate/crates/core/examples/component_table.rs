//! Measures P200 and N100 across ten folds and summarizes each scheme.

use erpalign::metrics::{measure_component, summary_stats, ComponentSpec};
use erpalign::pipeline::{all_averages, kfold, CutoffMode};
use erpalign::signal::Scheme;
use erpalign::synth::{generate_trials, SynthConfig};

fn main() -> erpalign::Result<()> {
    let cfg = SynthConfig::config_a(42);
    let (ts, _) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter)?;
    let folds = kfold(&ts, 10, 42)?;
    let per_fold = folds
        .iter()
        .map(|f| all_averages(&f.train, CutoffMode::Fixed(30.0)))
        .collect::<erpalign::Result<Vec<_>>>()?;

    for (name, spec) in [("P200", ComponentSpec::p200()), ("N100", ComponentSpec::n100())] {
        println!("{name}");
        for scheme in Scheme::ALL {
            let peaks = per_fold
                .iter()
                .map(|a| measure_component(a.get(scheme), &spec).map(|m| m.peak_uv))
                .collect::<erpalign::Result<Vec<_>>>()?;
            let s = summary_stats(&peaks)?;
            println!("  {:<12} mean {:7.3} uV  std {:.3}", scheme.name(), s.mean, s.std);
        }
    }
    Ok(())
}
