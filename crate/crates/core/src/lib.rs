//! Multivariate time-series clustering with evolving, attention-guided
//! timestamp masks.
//!
//! Several independent temporal encoders look at the same series. Each one
//! scores timestamps with self-attention and re-encodes the series with only
//! its most important timestamps kept. Training couples reconstruction
//! objectives with a contrastive loss whose positives come from k-means on the
//! fused embedding.
//!
//! ```no_run
//! use emtc::{data, ExperimentConfig};
//!
//! let ds = data::znormalize(&data::generate_synthetic(&data::SyntheticSpec::default())?);
//! let out = emtc::train(&ds, &ExperimentConfig::quick(), 0)?;
//! println!("ACC = {:.3}", out.report.unwrap().acc);
//! # Ok::<(), emtc::EmtcError>(())
//! ```

pub mod cluster;
pub mod config;
pub mod data;
pub mod encoder;
pub mod error;
pub mod experiments;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod projection;
pub mod static_masks;
pub mod trainer;

pub use config::{Ablation, ExperimentConfig, MaskPolicy};
pub use data::TimeSeriesDataset;
pub use error::{EmtcError, Result};
pub use metrics::{evaluate, EvalReport, MetricSummary};
pub use model::ModelParams;
pub use trainer::{run_ablation, train, TrainOutput, TrainTrace};
