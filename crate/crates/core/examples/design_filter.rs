//! Designs a Kaiser low-pass and applies it forward and backward.

use erpalign::filters::{apply_zero_phase, design_kaiser_lowpass};

fn main() -> erpalign::Result<()> {
    let fs = 500.0;
    let filter = design_kaiser_lowpass(fs, 30.0, 5.0, 60.0)?;
    println!("taps: {}, group delay: {} samples", filter.len(), filter.delay());
    println!("stopband edge: {} Hz", filter.stopband_edge_hz());
    println!("measured stopband: {:.2} dB", filter.measured_stopband_db(4096));
    println!("passband deviation: {:.4} dB", filter.measured_passband_deviation_db(4096));
    for f in [0.0, 10.0, 30.0, 32.5, 35.0, 60.0] {
        println!("  |H({f:>5.1} Hz)| = {:.6}", filter.amplitude(f));
    }

    let x: Vec<f64> = (0..500)
        .map(|k| {
            let t = k as f64 / fs;
            (2.0 * std::f64::consts::PI * 5.0 * t).sin() + 0.5 * (2.0 * std::f64::consts::PI * 80.0 * t).sin()
        })
        .collect();
    let y = apply_zero_phase(&filter, &x);
    let residual = (100..400)
        .map(|k| (y[k] - (2.0 * std::f64::consts::PI * 5.0 * k as f64 / fs).sin()).abs())
        .fold(0.0, f64::max);
    println!("80 Hz tone removed, 5 Hz tone kept: max residual {residual:.2e}");
    Ok(())
}
