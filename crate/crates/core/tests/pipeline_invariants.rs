use erpalign::commands::with_workers;
use erpalign::metrics::{measure_component, rms_to_average, ComponentSpec};
use erpalign::pipeline::{all_averages, dtw_average, conventional_average, filtered_dtw_average, CutoffMode};
use erpalign::synth::{generate_trials, make_template, SynthConfig};
use rustfft::{num_complex::Complex, FftPlanner};

fn interior(x: &[f64]) -> &[f64] {
    let cut = x.len() / 10;
    &x[cut..x.len() - cut]
}

#[test]
fn noise_free_filtered_average_is_closer_to_template() {
    let mut cfg = SynthConfig::config_a(42);
    cfg.jitter.noise_std_uv = 0.0;
    cfg.jitter.amplitude_scale = (1.0, 1.0);
    let template = make_template(&cfg.template).unwrap();
    let (ts, _) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter).unwrap();
    let a = all_averages(&ts, CutoffMode::Fixed(30.0)).unwrap();
    let conv = rms_to_average(interior(&a.conventional.samples), interior(&template)).unwrap();
    let filt = rms_to_average(interior(&a.filtered.samples), interior(&template)).unwrap();
    assert!(filt < conv, "filtered {filt} vs conventional {conv}");
}

#[test]
fn dtw_average_peak_is_not_below_conventional() {
    let cfg = SynthConfig::config_a(42);
    let (ts, _) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter).unwrap();
    let r = conventional_average(&ts).unwrap();
    let (rw, _) = dtw_average(&ts, &r).unwrap();
    let p = ComponentSpec::p200();
    assert!(measure_component(&rw, &p).unwrap().peak_uv >= measure_component(&r, &p).unwrap().peak_uv);
}

#[test]
fn filtered_average_has_no_energy_past_the_stopband() {
    let cfg = SynthConfig::config_a(42);
    let (ts, _) = generate_trials(&cfg.template, cfg.trials, &cfg.jitter).unwrap();
    let r = conventional_average(&ts).unwrap();
    let (rf, _) = filtered_dtw_average(&ts, &r, CutoffMode::Fixed(30.0)).unwrap();
    let (rw, _) = dtw_average(&ts, &r).unwrap();
    // Hann-windowed so the record's unequal ends do not leak across bins.
    let spectrum = |x: &[f64]| -> Vec<f64> {
        let n = x.len() as f64;
        let mut buf: Vec<Complex<f64>> = x
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1.0)).cos();
                Complex::new(v * w, 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        buf[..x.len() / 2 + 1].iter().map(|c| c.norm()).collect()
    };
    let (sf, sw) = (spectrum(&rf.samples), spectrum(&rw.samples));
    let peak = sw.iter().copied().fold(0.0, f64::max);
    let df = 500.0 / rf.samples.len() as f64;
    // the Hann main lobe spans two bins either side of the stopband edge
    let stop = (35.0 / df).ceil() as usize + 2;
    let worst_ratio = (stop..sf.len()).map(|k| sf[k] / peak).fold(0.0, f64::max);
    assert!(20.0 * worst_ratio.log10() <= -60.0, "{worst_ratio}");
}

#[test]
fn averages_do_not_depend_on_worker_count() {
    let cfg = SynthConfig::config_a(7);
    let (ts, _) = generate_trials(&cfg.template, 40, &cfg.jitter).unwrap();
    let run = |w| with_workers(w, || all_averages(&ts, CutoffMode::Estimate)).unwrap();
    let (one, many) = (run(1), run(6));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&one.dtw.samples), bits(&many.dtw.samples));
    assert_eq!(bits(&one.filtered.samples), bits(&many.filtered.samples));
}

#[test]
fn synthetic_trials_do_not_depend_on_worker_count() {
    let cfg = SynthConfig::config_a(3);
    let run = |w| with_workers(w, || generate_trials(&cfg.template, 30, &cfg.jitter)).unwrap();
    assert_eq!(run(1), run(5));
}
