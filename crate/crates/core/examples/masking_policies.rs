//! Show what each static masking policy keeps on one synthetic series, then
//! train once with the evolving mask and once with every static policy.
//!
//!     cargo run --release --example masking_policies

use emtc::data::{generate_synthetic, znormalize, SyntheticSpec};
use emtc::static_masks::{static_mask, StaticKind, StaticMaskPolicy};
use emtc::{train, ExperimentConfig, MaskPolicy};

fn bits(row: ndarray::ArrayView1<f64>) -> String {
    row.iter().map(|&m| if m > 0.5 { '#' } else { '.' }).collect()
}

fn main() -> emtc::Result<()> {
    let dataset = znormalize(&generate_synthetic(&SyntheticSpec::default())?);
    let keep_ratio = 0.5;
    println!("kept timestamps of sample 0 at keep_ratio {keep_ratio}:");
    for kind in StaticKind::ALL {
        let mask = static_mask(dataset.samples.view(), &StaticMaskPolicy { kind, keep_ratio, seed: 0 });
        println!("  {:<10} {}", kind.name(), bits(mask.row(0)));
    }

    let base = ExperimentConfig {
        epochs: 40,
        keep_ratio,
        ..ExperimentConfig::quick()
    };
    println!("\nACC after {} epochs (seed 0):", base.epochs);
    for policy in MaskPolicy::ALL {
        let config = ExperimentConfig { mask_policy: policy, ..base.clone() };
        let out = train(&dataset, &config, 0)?;
        let acc = out.report.map_or(f64::NAN, |r| r.acc);
        let rate: Vec<String> = out.trace.records.iter().take(6).map(|r| format!("{:.2}", r.mask_change)).collect();
        println!("  {:<10} ACC={acc:.4}  mask change over first epochs [{}]", policy.name(), rate.join(" "));
    }
    Ok(())
}
