//! Averages latency-jittered synthetic trials with all three schemes.

use erpalign::metrics::{measure_component, ComponentSpec};
use erpalign::pipeline::{all_averages, CutoffMode};
use erpalign::synth::{generate_trials, make_template, SynthConfig};

fn main() -> erpalign::Result<()> {
    let cfg = SynthConfig::config_a(42);
    let template = make_template(&cfg.template)?;
    let (ts, truth) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter)?;
    let spread = truth.shifts_ms.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    println!("{} trials, largest latency shift {spread:.1} ms", ts.len());

    let averages = all_averages(&ts, CutoffMode::Fixed(30.0))?;
    let p200 = ComponentSpec::p200();
    for avg in averages.all() {
        let m = measure_component(&avg, &p200)?;
        let rms = (avg.samples.iter().zip(&template).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / template.len() as f64)
            .sqrt();
        println!(
            "{:<12} P200 {:6.2} uV at {:5.1} ms, rms to template {rms:.3} uV",
            avg.scheme.name(),
            m.peak_uv,
            m.delay_s * 1000.0
        );
    }
    Ok(())
}
