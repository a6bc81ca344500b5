//! Parse a `.ts` file (or an inline sample), normalize it and print its shape.
//!
//!     cargo run --example load_ts -- path/to/BasicMotions_TRAIN.ts
//!     cargo run --example load_ts -- --uea BasicMotions ./data

use emtc::data::{load_uea, parse_ts_file, parse_ts_str, resample_length, znormalize, SplitMode};

const SAMPLE: &str = "\
# two variates, three timestamps
@problemName Toy
@timeStamps false
@univariate false
@dimensions 2
@equalLength true
@seriesLength 3
@classLabel true up down
@data
1.0,2.0,3.0:0.5,0.5,0.5:up
3.0,2.0,1.0:0.1,0.2,0.3:down
2.0,2.5,3.5:0.4,0.6,0.5:up
";

fn main() -> emtc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dataset = match args.as_slice() {
        [flag, name, dir] if flag == "--uea" => load_uea(dir.as_ref(), name, SplitMode::Auto)?,
        [path] => parse_ts_file(path)?,
        _ => parse_ts_str(SAMPLE, "inline sample", "Toy")?,
    };
    println!(
        "{}: N={} T={} D={} classes={:?}",
        dataset.name,
        dataset.n_samples(),
        dataset.length(),
        dataset.n_variates(),
        dataset.class_names
    );

    let normalized = znormalize(&dataset);
    let first = normalized.samples.index_axis(ndarray::Axis(0), 0);
    println!("first sample after z-normalization:\n{first:.3}");

    if dataset.length() > 2 {
        let shorter = resample_length(&dataset, dataset.length().div_ceil(2))?;
        println!("mean-pooled to T={}", shorter.length());
    }
    Ok(())
}
