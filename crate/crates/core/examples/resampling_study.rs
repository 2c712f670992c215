//! Repeats the averaging at lower sample rates.

use erpalign::filters::resample_rational;
use erpalign::metrics::scheme_comparison;
use erpalign::pipeline::{all_averages, CutoffMode};
use erpalign::signal::TrialSet;
use erpalign::synth::{generate_trials, SynthConfig};

fn main() -> erpalign::Result<()> {
    let cfg = SynthConfig::config_a(42);
    let (ts, _) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter)?;
    for (up, down) in [(1, 1), (1, 2), (7, 20)] {
        let mut fs = ts.fs_hz;
        let rows = ts
            .rows()
            .map(|r| {
                let (y, rate) = resample_rational(r, ts.fs_hz, up, down)?;
                fs = rate;
                Ok(y)
            })
            .collect::<erpalign::Result<Vec<_>>>()?;
        let resampled = TrialSet::from_rows(rows, fs, ts.prestim_ms)?;
        let averages = all_averages(&resampled, CutoffMode::Fixed(30.0))?;
        print!("{fs:6.1} Hz:");
        for s in scheme_comparison(&resampled, &averages.all())? {
            print!("  {} {:.3}", s.scheme.name(), s.rms_stats.median);
        }
        println!();
    }
    Ok(())
}
