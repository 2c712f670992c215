//! Aligns a delayed pulse to a reference and prints the warping path.

use erpalign::warp::{align_with_path, restrict_path};

fn main() -> erpalign::Result<()> {
    let pulse = |center: f64| -> Vec<f64> {
        (0..40).map(|k| (-((k as f64 - center) / 3.0).powi(2)).exp()).collect()
    };
    let reference = pulse(15.0);
    let trial = pulse(21.0);

    let (aligned, path) = align_with_path(&reference, &trial)?;
    println!("path nodes: {}, total cost: {:.4}", path.len(), path.total_cost());
    let restricted = restrict_path(&path);
    let map: Vec<usize> = restricted.trial_indices().collect();
    println!("reference -> trial index: {map:?}");

    let err = |x: &[f64]| x.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max deviation before: {:.4}, after: {:.4}", err(&trial), err(&aligned));
    Ok(())
}
