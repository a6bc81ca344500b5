use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emtc::data::SplitMode;
use emtc::experiments::{
    cmd_ablation, cmd_compare_masks, cmd_export_embedding, cmd_run, cmd_scaling, load_config, DatasetSource,
    ExperimentKind, RunManifest, ScalingGrid,
};
use emtc::projection::Projection;
use emtc::{ExperimentConfig, MaskPolicy};

#[derive(Parser)]
#[command(name = "emtc", version, about = "Multivariate time-series clustering with evolving timestamp masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed on one dataset and write results.json.
    Run(Common),
    /// Compare the evolving mask against the four static policies.
    CompareMasks(Common),
    /// Component ablation grid.
    Ablation {
        #[command(flatten)]
        common: Common,
        /// Add one row per disabled loss term.
        #[arg(long)]
        loss_terms: bool,
    },
    /// Per-epoch wall time on synthetic data, varying N, T and D one at a time.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [30, 60, 120])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [32, 64, 128])]
        t: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 6, 12])]
        d: Vec<usize>,
        /// Timed runs per grid point; the fastest is kept.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Project the fused embedding to 2-D and write embedding.csv.
    ExportEmbedding {
        #[command(flatten)]
        common: Common,
        /// Embed with saved parameters instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// `synthetic`, a .ts file, or a UEA dataset name (comma-separated for compare-masks).
    #[arg(long, default_value = "synthetic", value_delimiter = ',')]
    dataset: Vec<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitMode::Auto)]
    split: SplitMode,
    /// JSON config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the small synthetic-benchmark configuration.
    #[arg(long)]
    quick: bool,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    mask_policy: Option<MaskPolicy>,
    #[arg(long)]
    no_ivm: bool,
    #[arg(long)]
    no_mev: bool,
    #[arg(long)]
    no_intra: bool,
    #[arg(long)]
    no_inter: bool,
    #[arg(long)]
    no_contra: bool,
    #[arg(long)]
    keep_ratio: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    /// Mean-pool longer series down to this many timestamps.
    #[arg(long)]
    max_length: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write each epoch's binary masks to masks.csv.
    #[arg(long)]
    export_masks: bool,
    #[arg(long, value_enum, default_value_t = Projection::Pca)]
    projection: Projection,
}

impl Common {
    fn config(&self) -> emtc::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => load_config(path)?,
            None if self.quick => ExperimentConfig::quick(),
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            c.seeds = s.clone();
        }
        if let Some(p) = self.mask_policy {
            c.mask_policy = p;
        }
        if let Some(k) = self.keep_ratio {
            c.keep_ratio = k;
        }
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if self.clusters.is_some() {
            c.n_clusters = self.clusters;
        }
        c.ablation.use_ivm &= !self.no_ivm;
        c.ablation.use_mev &= !self.no_mev;
        c.ablation.use_intra &= !self.no_intra;
        c.ablation.use_inter &= !self.no_inter;
        c.ablation.use_contra &= !self.no_contra;
        c.validate()?;
        Ok(c)
    }

    fn manifest(&self, kind: ExperimentKind) -> emtc::Result<RunManifest> {
        let config = self.config()?;
        let datasets = self
            .dataset
            .iter()
            .map(|d| DatasetSource::parse(d, self.data_dir.as_deref(), self.split))
            .collect();
        Ok(RunManifest {
            datasets,
            export_masks: self.export_masks,
            projection: self.projection,
            max_length: self.max_length,
            ..RunManifest::new(kind, DatasetSource::parse("synthetic", None, self.split), config, &self.out)
        })
    }
}

fn run(cli: Cli) -> emtc::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let r = cmd_run(&common.manifest(ExperimentKind::Single)?)?;
            println!("{}  ACC {}  F1 {}  NMI {}  ARI {}", r.dataset.name, r.aggregate.formatted.acc,
                r.aggregate.formatted.f1, r.aggregate.formatted.nmi, r.aggregate.formatted.ari);
        }
        Command::CompareMasks(common) => {
            let c = cmd_compare_masks(&common.manifest(ExperimentKind::CompareMasks)?)?;
            for row in &c.rows {
                println!("{:<12} {:<10} keep={} ACC {}", row.dataset, row.policy.name(), row.keep_ratio,
                    row.aggregate.formatted.acc);
            }
        }
        Command::Ablation { common, loss_terms } => {
            let mut m = common.manifest(ExperimentKind::Ablation)?;
            m.loss_ablation = loss_terms;
            for row in cmd_ablation(&m)?.rows {
                println!("{:<12} ACC {}  NMI {}", row.label, row.aggregate.formatted.acc, row.aggregate.formatted.nmi);
            }
        }
        Command::Scaling { common, n, t, d, repeats } => {
            let config = common.config()?;
            let grid = ScalingGrid {
                n_values: n,
                t_values: t,
                d_values: d,
                repeats,
                epochs: common.epochs.unwrap_or(ScalingGrid::default().epochs),
                seed: config.seeds[0],
                ..ScalingGrid::default()
            };
            for row in cmd_scaling(&config, &grid, &common.out)? {
                println!("{} N={} T={} D={}: {:.4}s/epoch", row.axis, row.n, row.t, row.d, row.seconds_per_epoch);
            }
        }
        Command::ExportEmbedding { common, checkpoint } => {
            let mut m = common.manifest(ExperimentKind::ExportEmbedding)?;
            m.checkpoint = checkpoint;
            let points = cmd_export_embedding(&m)?;
            println!("wrote {} points to {}", points.len(), m.out_dir.join("embedding.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
