//! Cross-validates a linear classifier on template distances for two
//! classes that differ only in P200 latency.

use erpalign::classify::{crossvalidate, SvmParams};
use erpalign::pipeline::CutoffMode;
use erpalign::signal::Scheme;
use erpalign::synth::{generate_classes, SynthConfig};

fn main() -> erpalign::Result<()> {
    let classes = vec![
        ("a".to_string(), SynthConfig::config_a(42)),
        ("b".to_string(), SynthConfig::config_a(42).with_p200_at(230.0)),
    ];
    let ts = generate_classes(&classes, 42)?;
    let params = SvmParams::with_seed(42);
    for scheme in Scheme::ALL {
        let cv = crossvalidate(&ts, 5, scheme, CutoffMode::Fixed(30.0), &params)?;
        println!("{:<12} accuracy {:.4}  confusion {:?}", scheme.name(), cv.accuracy, cv.confusion.counts);
    }
    Ok(())
}
