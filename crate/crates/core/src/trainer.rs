//! The joint optimization loop.

use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_with, ClusterState, ContrastConfig, KMeansOptions};
use crate::config::{Ablation, ExperimentConfig};
use crate::data::TimeSeriesDataset;
use crate::error::{arg_err, EmtcError, Result};
use crate::metrics::{evaluate, EvalReport, MetricSummary};
use crate::model::{forward, ForwardPass, LossSpec, MaskMode, ModelParams};
use crate::optim::{adam_step, AdamState};
use crate::static_masks::{static_mask, StaticMaskPolicy};

pub use crate::model::total_loss;

/// One completed epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_total: f64,
    pub l_contra: f64,
    pub l_intra: f64,
    pub l_inter: f64,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    /// Fraction of mask entries that flipped since the previous epoch (0 at epoch 1).
    pub mask_change: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
    /// Set when the loss plateau ended training before the epoch cap.
    pub stopped_early: bool,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "epoch", "l_total", "l_contra", "l_intra", "l_inter", "acc", "nmi", "ari", "mask_change", "seconds",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                r.epoch.to_string(),
                r.l_total.to_string(),
                r.l_contra.to_string(),
                r.l_intra.to_string(),
                r.l_inter.to_string(),
                opt(r.acc),
                opt(r.nmi),
                opt(r.ari),
                r.mask_change.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub clusters: ClusterState,
    pub trace: TrainTrace,
    /// Final fused embedding, `N × d`.
    pub fused: Array2<f64>,
    /// Metrics of the final clustering when labels exist.
    pub report: Option<EvalReport>,
    pub seed: u64,
}

/// Saved parameters with the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub config: ExperimentConfig,
    pub epoch: usize,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Seed of the positive-pair sampler at `epoch`.
pub fn positive_seed(run_seed: u64, epoch: usize) -> u64 {
    run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64)
}

fn cluster_count(dataset: &TimeSeriesDataset, config: &ExperimentConfig) -> Result<usize> {
    let g = config
        .n_clusters
        .or_else(|| dataset.g_hint())
        .ok_or_else(|| arg_err("cluster count unknown: set n_clusters for unlabeled data"))?;
    if g == 0 || dataset.n_samples() < g {
        return Err(arg_err(format!(
            "need 1 <= g <= N, got g={g} for N={}",
            dataset.n_samples()
        )));
    }
    Ok(g)
}

/// Mask source implied by the ablation flags and the mask policy.
pub fn mask_mode(x: &Array3<f64>, config: &ExperimentConfig, seed: u64) -> MaskMode {
    if !config.ablation.use_ivm {
        return MaskMode::AllOnes;
    }
    match config.mask_policy.static_kind() {
        Some(kind) => MaskMode::Fixed(static_mask(
            x.view(),
            &StaticMaskPolicy {
                kind,
                keep_ratio: config.keep_ratio,
                seed,
            },
        )),
        None => MaskMode::StraightThrough {
            keep_ratio: config.keep_ratio,
            sharpness: config.sharpness,
        },
    }
}

fn change_rate(prev: &[Array2<u8>], now: &[Array2<u8>]) -> f64 {
    let mut changed = 0usize;
    let mut total = 0usize;
    for (a, b) in prev.iter().zip(now) {
        changed += a.iter().zip(b.iter()).filter(|(x, y)| x != y).count();
        total += a.len();
    }
    if total == 0 {
        0.0
    } else {
        changed as f64 / total as f64
    }
}

fn kmeans_opts(config: &ExperimentConfig) -> KMeansOptions {
    KMeansOptions {
        n_init: config.kmeans_restarts.max(1),
        ..KMeansOptions::default()
    }
}

/// Train with the given seed.
pub fn train(dataset: &TimeSeriesDataset, config: &ExperimentConfig, seed: u64) -> Result<TrainOutput> {
    train_observed(dataset, config, seed, |_, _| {})
}

/// [`train`], calling `observer(epoch, masks)` with every view's binary
/// mask after each epoch's forward pass.
pub fn train_observed<F>(
    dataset: &TimeSeriesDataset,
    config: &ExperimentConfig,
    seed: u64,
    mut observer: F,
) -> Result<TrainOutput>
where
    F: FnMut(usize, &[Array2<u8>]),
{
    config.validate()?;
    let g = cluster_count(dataset, config)?;
    let x = &dataset.samples;
    let mut params = ModelParams::init(
        config.effective_views(),
        dataset.n_variates(),
        config.embed_dim,
        config.key_dim,
        seed,
    );
    let mode = mask_mode(x, config, seed);
    let mut adam = AdamState::new(&params);
    let opts = kmeans_opts(config);
    let truth = dataset.labels.as_deref();

    let mut trace = TrainTrace::default();
    let mut previous_masks: Option<Vec<Array2<u8>>> = None;
    let mut previous_loss: Option<f64> = None;
    let mut flat_epochs = 0usize;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let pass = forward(&params, x, &mode)?;
        let masks = pass.binary_masks();
        observer(epoch, &masks);
        let mask_change = previous_masks.as_ref().map_or(0.0, |p| change_rate(p, &masks));

        let clusters = kmeans_with(pass.fused.view(), g, seed.wrapping_add(epoch as u64), opts)?;
        let spec = LossSpec {
            alpha: config.alpha,
            beta: config.beta,
            use_intra: config.ablation.use_intra,
            use_inter: config.ablation.use_inter,
            labels: config.ablation.use_contra.then_some(clusters.labels.as_slice()),
            contrast: ContrastConfig {
                temperature: config.temperature,
                positive_sampling_seed: positive_seed(seed, epoch),
            },
        };
        let (losses, grads) = pass.backward(&params, &spec).map_err(|e| match e {
            EmtcError::Numeric(m) => EmtcError::Numeric(format!("epoch {epoch}: {m}")),
            other => other,
        })?;
        if !losses.total.is_finite() {
            return Err(EmtcError::Numeric(format!(
                "epoch {epoch}: total={} contra={} intra={} inter={}",
                losses.total, losses.contra, losses.intra, losses.inter
            )));
        }
        adam_step(&mut params, &grads, &mut adam, config.learning_rate);

        let report = truth.map(|t| evaluate(t, &clusters.labels)).transpose()?;
        trace.records.push(EpochRecord {
            epoch,
            l_total: losses.total,
            l_contra: losses.contra,
            l_intra: losses.intra,
            l_inter: losses.inter,
            acc: report.as_ref().map(|r| r.acc),
            nmi: report.as_ref().map(|r| r.nmi),
            ari: report.as_ref().map(|r| r.ari),
            mask_change,
            seconds: started.elapsed().as_secs_f64(),
        });
        log::debug!(
            "seed {seed} epoch {epoch}: L={:.6} acc={:?}",
            losses.total,
            report.as_ref().map(|r| r.acc)
        );
        previous_masks = Some(masks);

        if let Some(prev) = previous_loss {
            if (losses.total - prev).abs() < config.plateau_tolerance {
                flat_epochs += 1;
            } else {
                flat_epochs = 0;
            }
        }
        previous_loss = Some(losses.total);
        if config.plateau_patience > 0 && flat_epochs >= config.plateau_patience {
            trace.stopped_early = epoch < config.epochs;
            break;
        }
    }

    let final_pass = forward(&params, x, &mode)?;
    let completed = trace.len();
    let mut clusters = kmeans_with(final_pass.fused.view(), g, seed.wrapping_add(completed as u64 + 1), opts)?;
    clusters.epoch = completed;
    let report = truth.map(|t| evaluate(t, &clusters.labels)).transpose()?;
    Ok(TrainOutput {
        params,
        clusters,
        trace,
        fused: final_pass.fused,
        report,
        seed,
    })
}

/// Embedding of `dataset` under trained parameters, with masks rebuilt from
/// `config` exactly as during training.
pub fn embed(params: &ModelParams, dataset: &TimeSeriesDataset, config: &ExperimentConfig, seed: u64) -> Result<ForwardPass> {
    forward(params, &dataset.samples, &mask_mode(&dataset.samples, config, seed))
}

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub ablation: Ablation,
    pub reports: Vec<EvalReport>,
    pub summary: MetricSummary,
}

fn variant(base: &ExperimentConfig, f: impl FnOnce(&mut Ablation)) -> ExperimentConfig {
    let mut c = base.clone();
    f(&mut c.ablation);
    c
}

/// The component grid: full model, without IVM, without MEV, without both,
/// then (if `loss_terms`) one row per disabled loss term. Every row uses the
/// seeds of `base`.
pub fn run_ablation(dataset: &TimeSeriesDataset, base: &ExperimentConfig, loss_terms: bool) -> Result<Vec<AblationRow>> {
    let mut grid: Vec<(&str, ExperimentConfig)> = vec![
        ("full", variant(base, |_| {})),
        ("w/o IVM", variant(base, |a| a.use_ivm = false)),
        ("w/o MEV", variant(base, |a| a.use_mev = false)),
        ("w/o IVM+MEV", variant(base, |a| {
            a.use_ivm = false;
            a.use_mev = false;
        })),
    ];
    if loss_terms {
        grid.push(("w/o intra", variant(base, |a| a.use_intra = false)));
        grid.push(("w/o inter", variant(base, |a| a.use_inter = false)));
        grid.push(("w/o contra", variant(base, |a| a.use_contra = false)));
    }
    grid.into_iter()
        .map(|(label, cfg)| {
            let reports = run_seeds(dataset, &cfg)?;
            Ok(AblationRow {
                label: label.to_string(),
                ablation: cfg.ablation,
                summary: MetricSummary::of(&reports),
                reports,
            })
        })
        .collect()
}

/// Train once per configured seed and evaluate against the dataset labels.
pub fn run_seeds(dataset: &TimeSeriesDataset, config: &ExperimentConfig) -> Result<Vec<EvalReport>> {
    if dataset.labels.is_none() {
        return Err(arg_err("evaluation needs a labeled dataset"));
    }
    config
        .seeds
        .iter()
        .map(|&s| Ok(train(dataset, config, s)?.report.expect("labeled dataset")))
        .collect()
}
