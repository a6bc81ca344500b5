//! Per-epoch training time as N, T and D grow, written to timing.csv.
//!
//!     cargo run --release --example scaling -- /tmp/scaling

use emtc::experiments::{cmd_scaling, ScalingGrid};
use emtc::ExperimentConfig;

fn main() -> emtc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "scaling_out".into());
    let grid = ScalingGrid {
        epochs: 6,
        repeats: 2,
        ..ScalingGrid::default()
    };
    let rows = cmd_scaling(&ExperimentConfig::default(), &grid, out.as_ref())?;
    for axis in ["N", "T", "D"] {
        let picked: Vec<_> = rows.iter().filter(|r| r.axis == axis).collect();
        for pair in picked.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            println!(
                "{axis}: ({},{},{}) -> ({},{},{})  {:.4}s -> {:.4}s per epoch, x{:.2}",
                a.n, a.t, a.d, b.n, b.t, b.d, a.seconds_per_epoch, b.seconds_per_epoch,
                b.seconds_per_epoch / a.seconds_per_epoch
            );
        }
    }
    println!("wrote {out}/timing.csv");
    Ok(())
}
