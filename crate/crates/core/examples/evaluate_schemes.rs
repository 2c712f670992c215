//! Builds averages on one half of the trials and scores the other half.

use erpalign::metrics::scheme_comparison;
use erpalign::pipeline::{all_averages, split_even, CutoffMode};
use erpalign::synth::{generate_trials, SynthConfig};

fn main() -> erpalign::Result<()> {
    let cfg = SynthConfig::config_a(42);
    let (ts, _) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter)?;
    let (reference, scored) = split_even(&ts, 42)?;
    let averages = all_averages(&reference, CutoffMode::Fixed(30.0))?;

    println!("{:<12} {:>10} {:>10}", "scheme", "median rms", "median mad");
    for s in scheme_comparison(&scored, &averages.all())? {
        println!("{:<12} {:>10.4} {:>10.4}", s.scheme.name(), s.rms_stats.median, s.mad_stats.median);
    }
    Ok(())
}
