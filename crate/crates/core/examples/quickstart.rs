//! Train on the synthetic redundancy benchmark and print per-seed metrics.
//!
//!     cargo run --release --example quickstart

use emtc::data::{generate_synthetic, znormalize, SyntheticSpec};
use emtc::{train, ExperimentConfig, MetricSummary};

fn main() -> emtc::Result<()> {
    let dataset = znormalize(&generate_synthetic(&SyntheticSpec::default())?);
    let config = ExperimentConfig::quick();
    println!(
        "{}: N={} T={} D={}",
        dataset.name,
        dataset.n_samples(),
        dataset.length(),
        dataset.n_variates()
    );

    let mut reports = Vec::new();
    for &seed in &config.seeds {
        let started = std::time::Instant::now();
        let out = train(&dataset, &config, seed)?;
        let first = out.trace.records.first().map_or(f64::NAN, |r| r.l_total);
        let last = out.trace.records.last().map_or(f64::NAN, |r| r.l_total);
        let report = out.report.expect("synthetic data is labeled");
        println!(
            "seed {seed}: epochs={} loss {first:.4} -> {last:.4}  ACC={:.4} NMI={:.4} ({:.1}s)",
            out.trace.len(),
            report.acc,
            report.nmi,
            started.elapsed().as_secs_f64()
        );
        reports.push(report);
    }
    for (name, stat) in MetricSummary::of(&reports).entries() {
        println!("{name:>4}: {stat}");
    }
    Ok(())
}
