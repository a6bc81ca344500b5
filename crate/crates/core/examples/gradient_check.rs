//! Compare analytic gradients with central finite differences on a tiny model.
//!
//! The hard top-k mask is not differentiable, so the check runs with the
//! sigmoid surrogate in both directions and thresholds frozen from one
//! straight-through pass.
//!
//!     cargo run --example gradient_check

use emtc::cluster::{kmeans, ContrastConfig};
use emtc::model::{forward, gradient_check, LossSpec, MaskMode};
use emtc::ModelParams;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> emtc::Result<()> {
    let params = ModelParams::init(2, 2, 4, 4, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Array3::from_shape_simple_fn((6, 8, 2), || rng.random_range(-1.5..1.5));
    let pass = forward(&params, &x, &MaskMode::StraightThrough { keep_ratio: 0.75, sharpness: 10.0 })?;
    let labels = kmeans(pass.fused.view(), 2, 0)?.labels;
    let thresholds = pass.thresholds().expect("evolving mode").into_iter().map(|t| t - 1e-3).collect();
    let mode = MaskMode::Soft { sharpness: 10.0, thresholds };
    let spec = LossSpec {
        alpha: 1.0,
        beta: 0.5,
        use_intra: true,
        use_inter: true,
        labels: Some(&labels),
        contrast: ContrastConfig { temperature: 0.5, positive_sampling_seed: 3 },
    };
    let errors = gradient_check(&params, &x, &mode, &spec, 1e-5)?;
    for (block, err) in &errors {
        println!("{block:<26} {err:.2e}");
    }
    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    println!("worst relative error {worst:.2e}");
    Ok(())
}
