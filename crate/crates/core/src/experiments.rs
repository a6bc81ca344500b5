//! Experiment commands behind the `emtc` binary. Every command writes plain
//! JSON/CSV files into an output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MaskPolicy};
use crate::data::{
    generate_synthetic, load_uea, parse_ts_file, resample_length, znormalize, SplitMode, SyntheticSpec,
    TimeSeriesDataset,
};
use crate::error::{arg_err, EmtcError, Result};
use crate::metrics::{EvalReport, MetricSummary, Stat};
use crate::projection::{pca, tsne, Projection, TsneOptions};
use crate::trainer::{embed, run_ablation, train, train_observed, Checkpoint, TrainOutput};

/// Version of the `results.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted for the UEA data directory.
pub const DATA_DIR_ENV: &str = "EMTC_DATA_DIR";

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    File { path: PathBuf },
    Uea { name: String, data_dir: Option<PathBuf>, split: SplitMode },
}

impl DatasetSource {
    /// Interpret a `--dataset` value: `synthetic`, a path to a `.ts` file, or
    /// a UEA archive name.
    pub fn parse(value: &str, data_dir: Option<&Path>, split: SplitMode) -> DatasetSource {
        let path = Path::new(value);
        if value.eq_ignore_ascii_case("synthetic") {
            DatasetSource::Synthetic(SyntheticSpec::default())
        } else if path.is_file() || value.ends_with(".ts") {
            DatasetSource::File { path: path.to_path_buf() }
        } else {
            DatasetSource::Uea {
                name: value.to_string(),
                data_dir: data_dir.map(Path::to_path_buf),
                split,
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            DatasetSource::Synthetic(_) => "synthetic".to_string(),
            DatasetSource::File { path } => path.file_stem().map_or_else(
                || path.display().to_string(),
                |s| s.to_string_lossy().into_owned(),
            ),
            DatasetSource::Uea { name, .. } => name.clone(),
        }
    }
}

/// Candidate data directories in resolution order: explicit flag, the
/// environment variable, then `./data`.
pub fn data_dirs(explicit: Option<&Path>) -> Vec<PathBuf> {
    let mut dirs = Vec::new();
    if let Some(d) = explicit {
        dirs.push(d.to_path_buf());
    }
    if let Some(d) = std::env::var_os(DATA_DIR_ENV) {
        dirs.push(PathBuf::from(d));
    }
    dirs.push(PathBuf::from("data"));
    dirs
}

/// Load a dataset, mean-pool it down to `max_length` when set, then z-normalize.
pub fn resolve_dataset(source: &DatasetSource, max_length: Option<usize>) -> Result<TimeSeriesDataset> {
    let raw = match source {
        DatasetSource::Synthetic(spec) => generate_synthetic(spec)?,
        DatasetSource::File { path } => {
            if !path.exists() {
                return Err(EmtcError::DatasetNotFound {
                    name: path.display().to_string(),
                    searched: vec![path.clone()],
                });
            }
            parse_ts_file(path)?
        }
        DatasetSource::Uea { name, data_dir, split } => {
            let mut searched = Vec::new();
            let mut found = None;
            for dir in data_dirs(data_dir.as_deref()) {
                match load_uea(&dir, name, *split) {
                    Ok(ds) => {
                        found = Some(ds);
                        break;
                    }
                    Err(EmtcError::DatasetNotFound { searched: s, .. }) => searched.extend(s),
                    Err(e) => return Err(e),
                }
            }
            found.ok_or_else(|| EmtcError::DatasetNotFound {
                name: name.clone(),
                searched,
            })?
        }
    };
    let ds = match max_length {
        Some(m) if raw.length() > m => resample_length(&raw, m)?,
        _ => raw,
    };
    Ok(znormalize(&ds))
}

/// Shape summary stored in every result file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub g: Option<usize>,
}

impl DatasetInfo {
    pub fn of(ds: &TimeSeriesDataset) -> Self {
        Self {
            name: ds.name.clone(),
            n: ds.n_samples(),
            t: ds.length(),
            d: ds.n_variates(),
            g: ds.g_hint(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub acc: f64,
    pub f1: f64,
    pub nmi: f64,
    pub ari: f64,
    pub epochs: usize,
    pub final_loss: Option<f64>,
}

impl SeedResult {
    fn new(out: &TrainOutput, report: &EvalReport) -> Self {
        Self {
            seed: out.seed,
            acc: report.acc,
            f1: report.f1,
            nmi: report.nmi,
            ari: report.ari,
            epochs: out.trace.len(),
            final_loss: out.trace.records.last().map(|r| r.l_total),
        }
    }
}

/// Per-metric values laid out by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub acc: f64,
    pub f1: f64,
    pub nmi: f64,
    pub ari: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricStrings {
    pub acc: String,
    pub f1: String,
    pub nmi: String,
    pub ari: String,
}

/// Mean, population std and `"mean ± std"` strings of a metric summary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricValues,
    pub std: MetricValues,
    pub formatted: MetricStrings,
}

impl From<&MetricSummary> for Aggregate {
    fn from(s: &MetricSummary) -> Self {
        let pick = |f: fn(&Stat) -> f64| MetricValues {
            acc: f(&s.acc),
            f1: f(&s.f1),
            nmi: f(&s.nmi),
            ari: f(&s.ari),
        };
        Aggregate {
            mean: pick(|x| x.mean),
            std: pick(|x| x.std),
            formatted: MetricStrings {
                acc: s.acc.to_string(),
                f1: s.f1.to_string(),
                nmi: s.nmi.to_string(),
                ari: s.ari.to_string(),
            },
        }
    }
}

/// Contents of `results.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub schema_version: u32,
    pub dataset: DatasetInfo,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedResult>,
    #[serde(flatten)]
    pub aggregate: Aggregate,
    /// Wall-clock time of the whole command; the only non-deterministic field.
    pub wall_seconds: f64,
}

/// Which command a manifest describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Single,
    CompareMasks,
    Ablation,
    Scaling,
    ExportEmbedding,
}

/// Everything one command invocation needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub datasets: Vec<DatasetSource>,
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    /// Write every epoch's masks to `masks.csv`.
    pub export_masks: bool,
    pub projection: Projection,
    /// Series longer than this are mean-pooled down to it.
    pub max_length: Option<usize>,
    /// Loss-term rows in the ablation table.
    pub loss_ablation: bool,
    /// Parameters to embed with instead of training.
    pub checkpoint: Option<PathBuf>,
}

impl RunManifest {
    pub fn new(kind: ExperimentKind, dataset: DatasetSource, config: ExperimentConfig, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            datasets: vec![dataset],
            config,
            out_dir: out_dir.into(),
            export_masks: false,
            projection: Projection::Pca,
            max_length: None,
            loss_ablation: false,
            checkpoint: None,
        }
    }

    fn single_dataset(&self) -> Result<&DatasetSource> {
        match self.datasets.as_slice() {
            [one] => Ok(one),
            [] => Err(arg_err("no dataset given")),
            _ => Err(arg_err("this command takes exactly one dataset")),
        }
    }

    fn prepare(&self) -> Result<()> {
        self.config.validate()?;
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }
}

/// Read an [`ExperimentConfig`] from a JSON file; missing keys take defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    config.validate()?;
    Ok(config)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

fn masks_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "view", "sample", "mask"])?;
    Ok(w)
}

/// Train every configured seed on one dataset and write `results.json`
/// plus `seed_<s>/trace.csv`, `seed_<s>/checkpoint.json` and, on request,
/// `seed_<s>/masks.csv`.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunResults> {
    manifest.prepare()?;
    let started = Instant::now();
    let source = manifest.single_dataset()?;
    let dataset = resolve_dataset(source, manifest.max_length)?;
    if dataset.labels.is_none() {
        return Err(arg_err("cmd_run evaluates against labels; the dataset has none"));
    }
    let config = &manifest.config;
    let mut seeds = Vec::new();
    let mut reports = Vec::new();
    for &seed in &config.seeds {
        let seed_dir = manifest.out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&seed_dir)?;
        let out = if manifest.export_masks {
            let mut writer = masks_writer(&seed_dir.join("masks.csv"))?;
            let mut failure = None;
            let out = train_observed(&dataset, config, seed, |epoch, masks| {
                for (v, m) in masks.iter().enumerate() {
                    for (i, row) in m.outer_iter().enumerate() {
                        let bits: String = row.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
                        if let Err(e) = writer.write_record([epoch.to_string(), v.to_string(), i.to_string(), bits]) {
                            failure.get_or_insert(e);
                        }
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e.into());
            }
            writer.flush()?;
            out
        } else {
            train(&dataset, config, seed)?
        };
        out.trace.write_csv(seed_dir.join("trace.csv"))?;
        Checkpoint {
            params: out.params.clone(),
            config: config.clone(),
            epoch: out.trace.len(),
            seed,
        }
        .save(seed_dir.join("checkpoint.json"))?;
        let report = out.report.clone().expect("labeled dataset");
        log::info!("{} seed {seed}: ACC={:.4} NMI={:.4}", dataset.name, report.acc, report.nmi);
        seeds.push(SeedResult::new(&out, &report));
        reports.push(report);
    }
    let results = RunResults {
        schema_version: SCHEMA_VERSION,
        dataset: DatasetInfo::of(&dataset),
        config: config.clone(),
        seeds,
        aggregate: Aggregate::from(&MetricSummary::of(&reports)),
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest.out_dir.join("results.json"), &results)?;
    Ok(results)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub dataset: String,
    pub policy: MaskPolicy,
    pub keep_ratio: f64,
    pub seeds: Vec<SeedResult>,
    #[serde(flatten)]
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyAverage {
    pub policy: MaskPolicy,
    pub keep_ratio: f64,
    /// Mean over datasets of each dataset's seed-mean.
    pub mean: MetricValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskComparison {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<PolicyRow>,
    pub averages: Vec<PolicyAverage>,
    pub wall_seconds: f64,
}

fn seed_results(dataset: &TimeSeriesDataset, config: &ExperimentConfig) -> Result<(Vec<SeedResult>, Vec<EvalReport>)> {
    let mut seeds = Vec::new();
    let mut reports = Vec::new();
    for &seed in &config.seeds {
        let out = train(dataset, config, seed)?;
        let report = out
            .report
            .clone()
            .ok_or_else(|| arg_err("evaluation needs a labeled dataset"))?;
        seeds.push(SeedResult::new(&out, &report));
        reports.push(report);
    }
    Ok((seeds, reports))
}

/// Train the same configuration under each of the five mask policies and
/// write `compare_masks.json` and `compare_masks.csv`.
pub fn cmd_compare_masks(manifest: &RunManifest) -> Result<MaskComparison> {
    manifest.prepare()?;
    let started = Instant::now();
    if manifest.datasets.is_empty() {
        return Err(arg_err("no dataset given"));
    }
    let mut rows = Vec::new();
    for source in &manifest.datasets {
        let dataset = resolve_dataset(source, manifest.max_length)?;
        for policy in MaskPolicy::ALL {
            let config = ExperimentConfig {
                mask_policy: policy,
                ..manifest.config.clone()
            };
            log::info!("{}: policy {} keep_ratio {}", dataset.name, policy.name(), config.keep_ratio);
            let (seeds, reports) = seed_results(&dataset, &config)?;
            rows.push(PolicyRow {
                dataset: dataset.name.clone(),
                policy,
                keep_ratio: config.keep_ratio,
                seeds,
                aggregate: Aggregate::from(&MetricSummary::of(&reports)),
            });
        }
    }
    let averages = MaskPolicy::ALL
        .iter()
        .map(|&policy| {
            let picked: Vec<&PolicyRow> = rows.iter().filter(|r| r.policy == policy).collect();
            let k = picked.len() as f64;
            let avg = |f: fn(&MetricValues) -> f64| picked.iter().map(|r| f(&r.aggregate.mean)).sum::<f64>() / k;
            PolicyAverage {
                policy,
                keep_ratio: manifest.config.keep_ratio,
                mean: MetricValues {
                    acc: avg(|m| m.acc),
                    f1: avg(|m| m.f1),
                    nmi: avg(|m| m.nmi),
                    ari: avg(|m| m.ari),
                },
            }
        })
        .collect();
    let comparison = MaskComparison {
        schema_version: SCHEMA_VERSION,
        config: manifest.config.clone(),
        rows,
        averages,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest.out_dir.join("compare_masks.json"), &comparison)?;
    let mut w = csv::Writer::from_path(manifest.out_dir.join("compare_masks.csv"))?;
    w.write_record(["dataset", "policy", "keep_ratio", "acc", "f1", "nmi", "ari"])?;
    for r in &comparison.rows {
        let f = &r.aggregate.formatted;
        w.write_record([
            r.dataset.as_str(),
            r.policy.name(),
            &r.keep_ratio.to_string(),
            &f.acc,
            &f.f1,
            &f.nmi,
            &f.ari,
        ])?;
    }
    w.flush()?;
    Ok(comparison)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub label: String,
    pub ivm: bool,
    pub mev: bool,
    pub intra: bool,
    pub inter: bool,
    pub contra: bool,
    pub seeds: Vec<f64>,
    #[serde(flatten)]
    pub aggregate: Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub schema_version: u32,
    pub dataset: DatasetInfo,
    pub config: ExperimentConfig,
    pub rows: Vec<AblationEntry>,
    pub wall_seconds: f64,
}

/// Run the component grid and write `ablation.json` and `ablation.csv`
/// (the CSV marks enabled components with `✓`).
pub fn cmd_ablation(manifest: &RunManifest) -> Result<AblationTable> {
    manifest.prepare()?;
    let started = Instant::now();
    let dataset = resolve_dataset(manifest.single_dataset()?, manifest.max_length)?;
    let rows: Vec<AblationEntry> = run_ablation(&dataset, &manifest.config, manifest.loss_ablation)?
        .into_iter()
        .map(|r| AblationEntry {
            label: r.label,
            ivm: r.ablation.use_ivm,
            mev: r.ablation.use_mev,
            intra: r.ablation.use_intra,
            inter: r.ablation.use_inter,
            contra: r.ablation.use_contra,
            seeds: r.reports.iter().map(|x| x.acc).collect(),
            aggregate: Aggregate::from(&r.summary),
        })
        .collect();
    let table = AblationTable {
        schema_version: SCHEMA_VERSION,
        dataset: DatasetInfo::of(&dataset),
        config: manifest.config.clone(),
        rows,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&manifest.out_dir.join("ablation.json"), &table)?;
    let mut w = csv::Writer::from_path(manifest.out_dir.join("ablation.csv"))?;
    w.write_record(["variant", "IVM", "MEV", "acc", "f1", "nmi", "ari"])?;
    let tick = |b: bool| if b { "✓" } else { "" };
    for r in &table.rows {
        let f = &r.aggregate.formatted;
        w.write_record([r.label.as_str(), tick(r.ivm), tick(r.mev), &f.acc, &f.f1, &f.nmi, &f.ari])?;
    }
    w.flush()?;
    Ok(table)
}

/// Synthetic sizes swept by [`cmd_scaling`]. Each axis list is varied with
/// the other two axes held at `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingGrid {
    /// `(N, T, D)` held fixed while another axis varies.
    pub base: (usize, usize, usize),
    pub n_values: Vec<usize>,
    pub t_values: Vec<usize>,
    pub d_values: Vec<usize>,
    pub epochs: usize,
    /// Timed runs per grid point; the fastest one is reported.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ScalingGrid {
    fn default() -> Self {
        Self {
            base: (30, 64, 3),
            n_values: vec![30, 60, 120],
            t_values: vec![32, 64, 128],
            d_values: vec![3, 6, 12],
            epochs: 10,
            repeats: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub axis: String,
    pub n: usize,
    pub t: usize,
    pub d: usize,
    pub epochs: usize,
    pub total_seconds: f64,
    pub seconds_per_epoch: f64,
}

/// Median wall time of the epochs after the first, which absorbs allocator
/// and cache warm-up.
fn median_epoch_seconds(out: &TrainOutput) -> f64 {
    let records = &out.trace.records;
    let mut secs: Vec<f64> = records.iter().skip(usize::from(records.len() > 1)).map(|r| r.seconds).collect();
    if secs.is_empty() {
        return 0.0;
    }
    secs.sort_by(f64::total_cmp);
    let m = secs.len() / 2;
    if secs.len() % 2 == 1 {
        secs[m]
    } else {
        (secs[m - 1] + secs[m]) / 2.0
    }
}

/// Time `grid.epochs` training epochs per grid point and write `timing.csv`.
/// `seconds_per_epoch` is the median over epochs 2 onward, taken from the
/// fastest of `grid.repeats` runs so that allocator and scheduler noise from
/// earlier grid points does not leak into the comparison.
pub fn cmd_scaling(config: &ExperimentConfig, grid: &ScalingGrid, out_dir: &Path) -> Result<Vec<TimingRow>> {
    config.validate()?;
    if [grid.base.0, grid.base.1, grid.base.2, grid.epochs, grid.repeats].contains(&0)
        || grid.n_values.iter().chain(&grid.t_values).chain(&grid.d_values).any(|&v| v == 0)
    {
        return Err(arg_err("scaling grid values must be positive"));
    }
    fs::create_dir_all(out_dir)?;
    let mut points: Vec<(&str, usize, usize, usize)> = Vec::new();
    let (n0, t0, d0) = grid.base;
    points.extend(grid.n_values.iter().map(|&n| ("N", n, t0, d0)));
    points.extend(grid.t_values.iter().map(|&t| ("T", n0, t, d0)));
    points.extend(grid.d_values.iter().map(|&d| ("D", n0, t0, d)));
    let config = ExperimentConfig {
        epochs: grid.epochs,
        plateau_patience: 0,
        ..config.clone()
    };
    let dataset_for = |n: usize, t: usize, d: usize| -> Result<TimeSeriesDataset> {
        let g = 3.min(n).max(2);
        let spec = SyntheticSpec {
            n_per_cluster: n.div_ceil(g),
            g,
            length: t,
            variates: d,
            seed: grid.seed,
            ..SyntheticSpec::default()
        };
        Ok(znormalize(&generate_synthetic(&spec)?))
    };
    // glibc serves large blocks with fresh mmaps until a block of that size has
    // been freed once, so an untimed run at the largest point puts every grid
    // point in the same allocator state.
    let &(_, wn, wt, wd) = points.iter().max_by_key(|p| p.1 * p.2 * p.3).expect("grid is non-empty");
    let warm_config = ExperimentConfig {
        epochs: 2,
        ..config.clone()
    };
    train(&dataset_for(wn, wt, wd)?, &warm_config, grid.seed)?;
    let mut rows = Vec::new();
    for (axis, n, t, d) in points {
        let dataset = dataset_for(n, t, d)?;
        let mut best: Option<(f64, f64, usize)> = None;
        for _ in 0..grid.repeats {
            let started = Instant::now();
            let out = train(&dataset, &config, grid.seed)?;
            let total = started.elapsed().as_secs_f64();
            let per_epoch = median_epoch_seconds(&out);
            if best.is_none_or(|(p, _, _)| per_epoch < p) {
                best = Some((per_epoch, total, out.trace.len()));
            }
        }
        let (per_epoch, total, epochs) = best.expect("repeats > 0");
        rows.push(TimingRow {
            axis: axis.to_string(),
            n: dataset.n_samples(),
            t,
            d,
            epochs,
            total_seconds: total,
            seconds_per_epoch: per_epoch,
        });
    }
    let mut w = csv::Writer::from_path(out_dir.join("timing.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

/// One row of `embedding.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPoint {
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
    pub label: Option<usize>,
}

/// Train the first configured seed (or load `manifest.checkpoint`), project
/// the fused embedding to 2-D and write `embedding.csv`.
pub fn cmd_export_embedding(manifest: &RunManifest) -> Result<Vec<EmbeddingPoint>> {
    manifest.prepare()?;
    let dataset = resolve_dataset(manifest.single_dataset()?, manifest.max_length)?;
    let (fused, clusters) = match &manifest.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let pass = embed(&ck.params, &dataset, &ck.config, ck.seed)?;
            let g = ck
                .config
                .n_clusters
                .or_else(|| dataset.g_hint())
                .ok_or_else(|| arg_err("cluster count unknown"))?;
            let state = crate::cluster::kmeans(pass.fused.view(), g, ck.seed)?;
            (pass.fused, state.labels)
        }
        None => {
            let seed = *manifest.config.seeds.first().ok_or_else(|| arg_err("no seed"))?;
            let out = train(&dataset, &manifest.config, seed)?;
            if let Some(r) = &out.report {
                log::info!("export run: ACC={:.4}", r.acc);
            }
            (out.fused, out.clusters.labels)
        }
    };
    let xy = match manifest.projection {
        Projection::Pca => pca(&fused, 2)?,
        Projection::Tsne => tsne(
            &fused,
            &TsneOptions {
                seed: manifest.config.seeds.first().copied().unwrap_or(0),
                ..TsneOptions::default()
            },
        )?,
    };
    let points: Vec<EmbeddingPoint> = (0..dataset.n_samples())
        .map(|i| EmbeddingPoint {
            x: xy[[i, 0]],
            y: xy.get([i, 1]).copied().unwrap_or(0.0),
            cluster: clusters[i],
            label: dataset.labels.as_ref().map(|l| l[i]),
        })
        .collect();
    let mut w = csv::Writer::from_path(manifest.out_dir.join("embedding.csv"))?;
    for p in &points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(points)
}
