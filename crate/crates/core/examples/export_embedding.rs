//! Print a 2-D projection of the trained embedding as CSV.
//!
//!     cargo run --release --example export_embedding -- tsne > embedding.csv

use emtc::data::{generate_synthetic, znormalize, SyntheticSpec};
use emtc::projection::{pca, tsne, TsneOptions};
use emtc::{train, ExperimentConfig};

fn main() -> emtc::Result<()> {
    let use_tsne = std::env::args().nth(1).is_some_and(|a| a == "tsne");
    let dataset = znormalize(&generate_synthetic(&SyntheticSpec::default())?);
    let out = train(&dataset, &ExperimentConfig::quick(), 0)?;
    let xy = if use_tsne {
        tsne(&out.fused, &TsneOptions::default())?
    } else {
        pca(&out.fused, 2)?
    };
    let labels = dataset.labels.as_deref().unwrap_or(&[]);
    println!("x,y,cluster,label");
    for (i, p) in xy.rows().into_iter().enumerate() {
        let label = labels.get(i).map_or(String::new(), |l| l.to_string());
        println!("{:.6},{:.6},{},{label}", p[0], p[1], out.clusters.labels[i]);
    }
    Ok(())
}
