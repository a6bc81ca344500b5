//! Score a clustering against ground truth with ACC, F1, NMI and ARI.
//!
//!     cargo run --example metrics

use emtc::metrics::{clustering_accuracy, evaluate, Stat};

fn main() -> emtc::Result<()> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2];
    let cases: [(&str, [usize; 9]); 3] = [
        ("relabeled", [2, 2, 2, 0, 0, 0, 1, 1, 1]),
        ("one mistake", [1, 1, 0, 0, 0, 0, 2, 2, 2]),
        ("single cluster", [0; 9]),
    ];
    let mut accs = Vec::new();
    for (name, pred) in cases {
        let r = evaluate(&truth, &pred)?;
        let (_, mapping) = clustering_accuracy(&truth, &pred)?;
        println!(
            "{name:<15} ACC={:.4} F1={:.4} NMI={:.4} ARI={:+.4}  cluster->class {mapping:?}",
            r.acc, r.f1, r.nmi, r.ari
        );
        accs.push(r.acc);
    }
    println!("ACC over cases: {}", Stat::of(&accs));
    Ok(())
}
