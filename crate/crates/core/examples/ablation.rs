//! Component ablation on the synthetic benchmark. Each row switches off one
//! part of the model.
//!
//!     cargo run --release --example ablation

use emtc::data::{generate_synthetic, znormalize, SyntheticSpec};
use emtc::{run_ablation, ExperimentConfig};

fn main() -> emtc::Result<()> {
    let dataset = znormalize(&generate_synthetic(&SyntheticSpec::default())?);
    let config = ExperimentConfig {
        seeds: vec![0, 1, 2],
        ..ExperimentConfig::quick()
    };
    println!("{:<14} {:>16} {:>16} {:>16}", "variant", "ACC", "NMI", "ARI");
    for row in run_ablation(&dataset, &config, true)? {
        println!(
            "{:<14} {:>16} {:>16} {:>16}",
            row.label,
            row.summary.acc.to_string(),
            row.summary.nmi.to_string(),
            row.summary.ari.to_string()
        );
    }
    Ok(())
}
