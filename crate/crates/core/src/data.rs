//! Dataset ingestion: the UEA `.ts` format, normalization helpers and the
//! synthetic redundancy generator.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, EmtcError, Result};

/// `N` multivariate series of shape `T × D`, with optional class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    pub name: String,
    /// Layout `(N, T, D)`.
    pub samples: Array3<f64>,
    /// Contiguous ids in `0..g`, one per sample.
    pub labels: Option<Vec<usize>>,
    /// Original class token for each label id.
    pub class_names: Vec<String>,
}

impl TimeSeriesDataset {
    pub fn new(
        name: impl Into<String>,
        samples: Array3<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let name = name.into();
        if samples.len_of(Axis(0)) == 0 {
            return Err(EmtcError::EmptyDataset(name));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(EmtcError::Numeric(format!("dataset `{name}` contains NaN/Inf")));
        }
        let (labels, class_names) = match labels {
            Some(raw) => {
                if raw.len() != samples.len_of(Axis(0)) {
                    return Err(arg_err(format!(
                        "{} labels for {} samples",
                        raw.len(),
                        samples.len_of(Axis(0))
                    )));
                }
                let tokens: Vec<String> = raw.iter().map(|l| l.to_string()).collect();
                let mut sorted: Vec<usize> = raw.clone();
                sorted.sort_unstable();
                sorted.dedup();
                let names = sorted.iter().map(|l| l.to_string()).collect::<Vec<_>>();
                let ids = remap_tokens(&tokens, &names);
                (Some(ids), names)
            }
            None => (None, Vec::new()),
        };
        Ok(Self {
            name,
            samples,
            labels,
            class_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len_of(Axis(0))
    }

    pub fn length(&self) -> usize {
        self.samples.len_of(Axis(1))
    }

    pub fn n_variates(&self) -> usize {
        self.samples.len_of(Axis(2))
    }

    /// Number of distinct classes, when labels are present.
    pub fn g_hint(&self) -> Option<usize> {
        self.labels.as_ref().map(|_| self.class_names.len())
    }

    /// Append `other`, merging class vocabularies by token.
    pub fn concat(&self, other: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        if self.n_variates() != other.n_variates() {
            return Err(arg_err(format!(
                "cannot concatenate D={} with D={}",
                self.n_variates(),
                other.n_variates()
            )));
        }
        let t = self.length().max(other.length());
        let a = pad_or_truncate(self, t)?;
        let b = pad_or_truncate(other, t)?;
        let samples = ndarray::concatenate(Axis(0), &[a.samples.view(), b.samples.view()])
            .map_err(|e| arg_err(e.to_string()))?;
        let (labels, class_names) = match (&a.labels, &b.labels) {
            (Some(la), Some(lb)) => {
                let mut names = a.class_names.clone();
                for n in &b.class_names {
                    if !names.contains(n) {
                        names.push(n.clone());
                    }
                }
                let tokens: Vec<String> = la
                    .iter()
                    .map(|&l| a.class_names[l].clone())
                    .chain(lb.iter().map(|&l| b.class_names[l].clone()))
                    .collect();
                (Some(remap_tokens(&tokens, &names)), names)
            }
            _ => (None, Vec::new()),
        };
        Ok(TimeSeriesDataset {
            name: self.name.clone(),
            samples,
            labels,
            class_names,
        })
    }
}

fn remap_tokens(tokens: &[String], order: &[String]) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| order.iter().position(|o| o == t).expect("token in vocabulary"))
        .collect()
}

#[derive(Default)]
struct TsHeader {
    problem_name: Option<String>,
    dimensions: Option<usize>,
    class_label: Option<bool>,
    declared_classes: Vec<String>,
}

fn format_err(path: &str, line: usize, message: impl Into<String>) -> EmtcError {
    EmtcError::Format {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_bool(path: &str, line: usize, tag: &str, value: Option<&str>) -> Result<bool> {
    match value.map(str::to_ascii_lowercase).as_deref() {
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        _ => Err(format_err(path, line, format!("@{tag} expects true or false"))),
    }
}

/// Parse a UEA `.ts` file. Labels are remapped to `0..g` in declaration order.
pub fn parse_ts_file(path: impl AsRef<Path>) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_ts_str(&text, &path.display().to_string(), &fallback)
}

/// Parse `.ts` content held in memory; `origin` is used in error messages.
pub fn parse_ts_str(text: &str, origin: &str, fallback_name: &str) -> Result<TimeSeriesDataset> {
    let mut header = TsHeader::default();
    let mut in_data = false;
    let mut rows: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data {
            let Some(body) = line.strip_prefix('@') else {
                return Err(format_err(origin, lineno, "expected a header line starting with `@`"));
            };
            let mut parts = body.split_whitespace();
            let tag = parts.next().unwrap_or("").to_ascii_lowercase();
            let value = parts.next();
            match tag.as_str() {
                "problemname" => {
                    header.problem_name = Some(
                        value
                            .ok_or_else(|| format_err(origin, lineno, "@problemName needs a value"))?
                            .to_string(),
                    )
                }
                "timestamps" => {
                    if parse_bool(origin, lineno, "timeStamps", value)? {
                        return Err(format_err(origin, lineno, "timestamped series are not supported"));
                    }
                }
                "missing" | "univariate" | "equallength" => {
                    parse_bool(origin, lineno, &tag, value)?;
                }
                "dimensions" => {
                    let d = value
                        .and_then(|v| v.parse::<usize>().ok())
                        .filter(|&d| d > 0)
                        .ok_or_else(|| format_err(origin, lineno, "@dimensions expects a positive integer"))?;
                    header.dimensions = Some(d);
                }
                "serieslength" => {
                    value
                        .and_then(|v| v.parse::<usize>().ok())
                        .ok_or_else(|| format_err(origin, lineno, "@seriesLength expects an integer"))?;
                }
                "classlabel" => {
                    let has = parse_bool(origin, lineno, "classLabel", value)?;
                    header.class_label = Some(has);
                    if has {
                        header.declared_classes = parts.map(str::to_string).collect();
                    }
                }
                "targetlabel" => {
                    if parse_bool(origin, lineno, "targetLabel", value)? {
                        return Err(format_err(origin, lineno, "regression targets are not supported"));
                    }
                }
                "data" => in_data = true,
                other => return Err(format_err(origin, lineno, format!("unknown header `@{other}`"))),
            }
            continue;
        }

        let has_label = header.class_label.unwrap_or(false);
        let mut fields: Vec<&str> = line.split(':').collect();
        if has_label {
            if fields.len() < 2 {
                return Err(format_err(origin, lineno, "missing class label after final `:`"));
            }
            let label = fields.pop().unwrap_or_default().trim().to_string();
            if !header.declared_classes.is_empty() && !header.declared_classes.contains(&label) {
                return Err(format_err(origin, lineno, format!("undeclared class label `{label}`")));
            }
            tokens.push(label);
        }
        let mut dims = Vec::with_capacity(fields.len());
        for field in fields {
            let mut values = Vec::new();
            for v in field.split(',') {
                let v = v.trim();
                let x: f64 = v
                    .parse()
                    .map_err(|_| format_err(origin, lineno, format!("invalid value `{v}`")))?;
                if !x.is_finite() {
                    return Err(format_err(origin, lineno, "missing or non-finite values are not supported"));
                }
                values.push(x);
            }
            dims.push(values);
        }
        let len = dims[0].len();
        if dims.iter().any(|d| d.len() != len) {
            return Err(format_err(origin, lineno, "ragged dimensions within one sample"));
        }
        if let Some(expected) = header.dimensions {
            if dims.len() != expected {
                return Err(format_err(
                    origin,
                    lineno,
                    format!("expected {expected} dimensions, found {}", dims.len()),
                ));
            }
        }
        if let Some(first) = rows.first() {
            if first.len() != dims.len() {
                return Err(format_err(
                    origin,
                    lineno,
                    format!("sample has {} dimensions, earlier samples have {}", dims.len(), first.len()),
                ));
            }
        }
        rows.push(dims);
    }

    let name = header.problem_name.unwrap_or_else(|| fallback_name.to_string());
    if !in_data {
        return Err(format_err(origin, text.lines().count(), "missing @data section"));
    }
    if rows.is_empty() {
        return Err(EmtcError::EmptyDataset(name));
    }
    let n = rows.len();
    let d = rows[0].len();
    let t = rows.iter().map(|r| r[0].len()).max().unwrap_or(0);
    let mut samples = Array3::<f64>::zeros((n, t, d));
    for (i, row) in rows.iter().enumerate() {
        for (c, series) in row.iter().enumerate() {
            for (step, &v) in series.iter().enumerate() {
                samples[[i, step, c]] = v;
            }
        }
    }

    let (labels, class_names) = if tokens.is_empty() {
        (None, Vec::new())
    } else {
        let order: Vec<String> = if header.declared_classes.is_empty() {
            let mut u = tokens.clone();
            u.sort();
            u.dedup();
            u
        } else {
            header
                .declared_classes
                .iter()
                .filter(|c| tokens.contains(c))
                .cloned()
                .collect()
        };
        (Some(remap_tokens(&tokens, &order)), order)
    };

    Ok(TimeSeriesDataset {
        name,
        samples,
        labels,
        class_names,
    })
}

/// Render a dataset in the UEA `.ts` format. Values use Rust's shortest
/// round-trip float formatting, so parsing the output is lossless.
pub fn to_ts_string(dataset: &TimeSeriesDataset) -> String {
    let (n, t, d) = dataset.samples.dim();
    let mut out = String::new();
    let _ = writeln!(out, "@problemName {}", dataset.name.replace(char::is_whitespace, "_"));
    out.push_str("@timeStamps false\n@missing false\n");
    let _ = writeln!(out, "@univariate {}", d == 1);
    if d > 1 {
        let _ = writeln!(out, "@dimensions {d}");
    }
    out.push_str("@equalLength true\n");
    let _ = writeln!(out, "@seriesLength {t}");
    let names = class_tokens(dataset);
    match &dataset.labels {
        Some(_) => {
            let _ = writeln!(out, "@classLabel true {}", names.join(" "));
        }
        None => out.push_str("@classLabel false\n"),
    }
    out.push_str("@data\n");
    for i in 0..n {
        for c in 0..d {
            if c > 0 {
                out.push(':');
            }
            for step in 0..t {
                if step > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", dataset.samples[[i, step, c]]);
            }
        }
        if let Some(labels) = &dataset.labels {
            let _ = write!(out, ":{}", names[labels[i]]);
        }
        out.push('\n');
    }
    out
}

fn class_tokens(dataset: &TimeSeriesDataset) -> Vec<String> {
    match &dataset.labels {
        Some(labels) if dataset.class_names.is_empty() => {
            let g = labels.iter().max().map_or(0, |m| m + 1);
            (0..g).map(|l| l.to_string()).collect()
        }
        _ => dataset.class_names.clone(),
    }
}

pub fn write_ts_file(dataset: &TimeSeriesDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_ts_string(dataset))?;
    Ok(())
}

/// Per-sample, per-channel standardization (population std). Channels with
/// zero variance become all-zero.
pub fn znormalize(dataset: &TimeSeriesDataset) -> TimeSeriesDataset {
    let mut out = dataset.clone();
    let (n, t, d) = out.samples.dim();
    for i in 0..n {
        for c in 0..d {
            let mut channel = out.samples.slice_mut(s![i, .., c]);
            let mean = channel.sum() / t as f64;
            let var = channel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t as f64;
            let std = var.sqrt();
            if std <= 1e-12 * (1.0 + mean.abs()) {
                channel.fill(0.0);
            } else {
                channel.mapv_inplace(|v| (v - mean) / std);
            }
        }
    }
    out
}

/// Zero-pad at the end or truncate at the end to exactly `target_t` steps.
pub fn pad_or_truncate(dataset: &TimeSeriesDataset, target_t: usize) -> Result<TimeSeriesDataset> {
    if target_t == 0 {
        return Err(arg_err("target length must be at least 1"));
    }
    let (n, t, d) = dataset.samples.dim();
    let keep = t.min(target_t);
    let mut samples = Array3::<f64>::zeros((n, target_t, d));
    samples
        .slice_mut(s![.., ..keep, ..])
        .assign(&dataset.samples.slice(s![.., ..keep, ..]));
    Ok(TimeSeriesDataset {
        samples,
        ..dataset.clone()
    })
}

/// Shorten every series to `target_t` steps by averaging consecutive,
/// near-equal-width windows. Series already that short are returned as is.
pub fn resample_length(dataset: &TimeSeriesDataset, target_t: usize) -> Result<TimeSeriesDataset> {
    if target_t == 0 {
        return Err(arg_err("target length must be at least 1"));
    }
    let (n, t, d) = dataset.samples.dim();
    if t <= target_t {
        return Ok(dataset.clone());
    }
    let mut samples = Array3::<f64>::zeros((n, target_t, d));
    for j in 0..target_t {
        let (lo, hi) = (j * t / target_t, (j + 1) * t / target_t);
        let window = dataset.samples.slice(s![.., lo..hi, ..]);
        let mean = window.mean_axis(ndarray::Axis(1)).expect("non-empty window");
        samples.slice_mut(s![.., j, ..]).assign(&mean);
    }
    Ok(TimeSeriesDataset {
        samples,
        ..dataset.clone()
    })
}

/// Recipe for the synthetic redundancy benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_per_cluster: usize,
    pub g: usize,
    pub length: usize,
    pub variates: usize,
    /// Fraction of timestamps that carry a cluster-independent constant level.
    pub redundancy_fraction: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_per_cluster: 10,
            g: 3,
            length: 64,
            variates: 3,
            redundancy_fraction: 0.5,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

/// Generate `g · n_per_cluster` series. Each cluster owns a sinusoidal
/// signature (its own frequency and per-variate phases) on a contiguous
/// informative segment placed at a random offset; every other timestamp
/// holds a constant level shared by all clusters. Gaussian noise is added
/// everywhere.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<TimeSeriesDataset> {
    if spec.g < 2 {
        return Err(arg_err("synthetic generator needs g >= 2"));
    }
    if spec.n_per_cluster == 0 || spec.length == 0 || spec.variates == 0 {
        return Err(arg_err("synthetic sizes must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.redundancy_fraction) {
        return Err(arg_err("redundancy_fraction must lie in [0, 1]"));
    }
    if spec.noise_std.is_nan() || spec.noise_std < 0.0 {
        return Err(arg_err("noise_std must be non-negative"));
    }
    let (g, t, d) = (spec.g, spec.length, spec.variates);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let redundant = ((spec.redundancy_fraction * t as f64).round() as usize).min(t);
    let informative = t - redundant;

    let levels: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let phases: Vec<Vec<f64>> = (0..g)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
        .collect();
    // Cluster c completes 1.5·(c+1) cycles over the informative segment.
    let omega: Vec<f64> = (0..g)
        .map(|c| std::f64::consts::TAU * 1.5 * (c + 1) as f64 / informative.max(1) as f64)
        .collect();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| arg_err(e.to_string()))?;

    let n = g * spec.n_per_cluster;
    let mut samples = Array3::<f64>::zeros((n, t, d));
    let mut labels = Vec::with_capacity(n);
    for c in 0..g {
        for k in 0..spec.n_per_cluster {
            let i = c * spec.n_per_cluster + k;
            let offset = if redundant > 0 { rng.random_range(0..=redundant) } else { 0 };
            for step in 0..t {
                for v in 0..d {
                    let base = if step >= offset && step < offset + informative {
                        let local = (step - offset) as f64;
                        (omega[c] * local + phases[c][v]).sin()
                    } else {
                        levels[v]
                    };
                    let eps = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    samples[[i, step, v]] = base + eps;
                }
            }
            labels.push(c);
        }
    }
    TimeSeriesDataset::new("synthetic", samples, Some(labels))
}

/// Reported statistics of the 15 UEA benchmark datasets: `(name, N, T, D, g)`.
pub const UEA_BENCHMARKS: [(&str, usize, usize, usize, usize); 15] = [
    ("BasicMotions", 40, 100, 6, 4),
    ("Cricket", 72, 1197, 6, 12),
    ("DuckDuckGeese", 40, 270, 1345, 5),
    ("EigenWorms", 131, 17984, 6, 5),
    ("Epilepsy", 138, 206, 3, 4),
    ("FingerMovements", 100, 50, 28, 2),
    ("HandMovementDirection", 147, 400, 10, 4),
    ("Heartbeat", 205, 405, 61, 2),
    ("MotorImagery", 100, 3000, 64, 2),
    ("NATOPS", 180, 51, 24, 6),
    ("PEMS-SF", 173, 144, 963, 7),
    ("RacketSports", 152, 30, 6, 4),
    ("SelfRegulationSCP1", 293, 896, 6, 2),
    ("SelfRegulationSCP2", 180, 1152, 7, 2),
    ("StandWalkJump", 15, 2500, 4, 3),
];

/// Which UEA split(s) to cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// The split whose size matches the benchmark table, else train+test.
    #[default]
    Auto,
    Combined,
    Train,
    Test,
}

fn split_paths(dir: &Path, name: &str) -> Vec<(PathBuf, PathBuf)> {
    vec![
        (
            dir.join(name).join(format!("{name}_TRAIN.ts")),
            dir.join(name).join(format!("{name}_TEST.ts")),
        ),
        (dir.join(format!("{name}_TRAIN.ts")), dir.join(format!("{name}_TEST.ts"))),
    ]
}

/// Load a UEA dataset by name from `data_dir` (either `<dir>/<name>/<name>_TRAIN.ts`
/// or `<dir>/<name>_TRAIN.ts`), returning the chosen split.
pub fn load_uea(data_dir: &Path, name: &str, split: SplitMode) -> Result<TimeSeriesDataset> {
    let candidates = split_paths(data_dir, name);
    let Some((train_path, test_path)) = candidates
        .iter()
        .find(|(tr, te)| tr.exists() || te.exists())
        .cloned()
    else {
        return Err(EmtcError::DatasetNotFound {
            name: name.to_string(),
            searched: candidates.into_iter().flat_map(|(a, b)| [a, b]).collect(),
        });
    };
    let load = |p: &Path| -> Result<Option<TimeSeriesDataset>> {
        if p.exists() {
            parse_ts_file(p).map(Some)
        } else {
            Ok(None)
        }
    };
    let train = load(&train_path)?;
    let test = load(&test_path)?;
    let combined = || -> Result<TimeSeriesDataset> {
        match (&train, &test) {
            (Some(a), Some(b)) => a.concat(b),
            (Some(a), None) | (None, Some(a)) => Ok(a.clone()),
            (None, None) => unreachable!(),
        }
    };
    let missing = |p: &Path| EmtcError::DatasetNotFound {
        name: name.to_string(),
        searched: vec![p.to_path_buf()],
    };
    let mut ds = match split {
        SplitMode::Train => train.clone().ok_or_else(|| missing(&train_path))?,
        SplitMode::Test => test.clone().ok_or_else(|| missing(&test_path))?,
        SplitMode::Combined => combined()?,
        SplitMode::Auto => {
            let reported = UEA_BENCHMARKS.iter().find(|b| b.0 == name).map(|b| b.1);
            match reported {
                Some(n) if test.as_ref().is_some_and(|d| d.n_samples() == n) => test.clone().unwrap(),
                Some(n) if train.as_ref().is_some_and(|d| d.n_samples() == n) => train.clone().unwrap(),
                _ => combined()?,
            }
        }
    };
    ds.name = name.to_string();
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const TINY: &str = "@problemName tiny\n@timeStamps false\n@univariate false\n@dimensions 2\n@equalLength true\n@seriesLength 3\n@classLabel true a b\n@data\n1,2,3:4,5,6:a\n7,8,9:1,2,3:b\n";

    #[test]
    fn resample_averages_windows() {
        let ds = TimeSeriesDataset::new("r", array![[[1.0], [3.0], [5.0], [7.0], [9.0]]], None).unwrap();
        let r = resample_length(&ds, 2).unwrap();
        assert_eq!(r.samples, array![[[2.0], [7.0]]]);
        assert_eq!(resample_length(&ds, 9).unwrap(), ds);
    }

    #[test]
    fn parses_tiny_body() {
        let ds = parse_ts_str(TINY, "tiny.ts", "tiny").unwrap();
        assert_eq!(ds.samples.dim(), (2, 3, 2));
        assert_eq!(ds.labels, Some(vec![0, 1]));
        assert_eq!(ds.g_hint(), Some(2));
        assert_eq!(ds.samples[[0, 2, 1]], 6.0);
        assert_eq!(ds.samples[[1, 0, 0]], 7.0);
    }

    #[test]
    fn malformed_header_names_line() {
        let text = "@problemName x\nbogus line\n@data\n1:a\n";
        match parse_ts_str(text, "x.ts", "x") {
            Err(EmtcError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected format error, got {other:?}"),
        }
        let text = "@problemName x\n@classLabel maybe\n@data\n";
        assert!(matches!(parse_ts_str(text, "x.ts", "x"), Err(EmtcError::Format { line: 2, .. })));
    }

    #[test]
    fn ragged_sample_rejected() {
        let text = "@classLabel true a\n@data\n1,2,3:4,5:a\n";
        let err = parse_ts_str(text, "r.ts", "r").unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");
    }

    #[test]
    fn empty_data_section() {
        let text = "@problemName empty\n@classLabel true a\n@data\n";
        assert!(matches!(parse_ts_str(text, "e.ts", "e"), Err(EmtcError::EmptyDataset(_))));
    }

    #[test]
    fn unequal_lengths_are_zero_padded() {
        let text = "@classLabel true x y\n@data\n1,2:3,4:x\n1,2,3,4:5,6,7,8:y\n";
        let ds = parse_ts_str(text, "u.ts", "u").unwrap();
        assert_eq!(ds.length(), 4);
        assert_eq!(ds.samples[[0, 3, 1]], 0.0);
    }

    #[test]
    fn labels_follow_declaration_order() {
        let text = "@classLabel true z a\n@data\n1:a\n2:z\n3:a\n";
        let ds = parse_ts_str(text, "o.ts", "o").unwrap();
        assert_eq!(ds.labels, Some(vec![1, 0, 1]));
        assert_eq!(ds.class_names, vec!["z", "a"]);
    }

    #[test]
    fn znormalize_examples() {
        let samples = Array3::from_shape_vec((1, 3, 2), vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]).unwrap();
        let ds = TimeSeriesDataset::new("z", samples, None).unwrap();
        let z = znormalize(&ds);
        let expect = [-1.224_744_871, 0.0, 1.224_744_871];
        for (step, e) in expect.iter().enumerate() {
            assert!((z.samples[[0, step, 0]] - e).abs() < 1e-4);
            assert_eq!(z.samples[[0, step, 1]], 0.0);
        }
        let twice = znormalize(&z);
        for (a, b) in z.samples.iter().zip(twice.samples.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn pad_and_truncate() {
        let samples = Array3::from_shape_fn((1, 3, 2), |(_, t, c)| (t * 2 + c + 1) as f64);
        let ds = TimeSeriesDataset::new("p", samples, None).unwrap();
        let padded = pad_or_truncate(&ds, 5).unwrap();
        assert_eq!(padded.length(), 5);
        assert_eq!(padded.samples.slice(s![0, 3.., ..]), array![[0.0, 0.0], [0.0, 0.0]]);
        let cut = pad_or_truncate(&padded, 3).unwrap();
        assert_eq!(cut, ds);
        assert_eq!(pad_or_truncate(&ds, 3).unwrap(), ds);
        assert!(pad_or_truncate(&ds, 0).is_err());
    }

    #[test]
    fn concat_merges_vocabularies() {
        let a = parse_ts_str("@classLabel true a b\n@data\n1:a\n2:b\n", "a", "a").unwrap();
        let b = parse_ts_str("@classLabel true b c\n@data\n3,4:c\n5,6:b\n", "b", "b").unwrap();
        let ab = a.concat(&b).unwrap();
        assert_eq!(ab.n_samples(), 4);
        assert_eq!(ab.length(), 2);
        assert_eq!(ab.labels, Some(vec![0, 1, 2, 1]));
    }

    #[test]
    fn synthetic_contracts() {
        let spec = SyntheticSpec {
            n_per_cluster: 3,
            g: 2,
            length: 40,
            variates: 2,
            redundancy_fraction: 0.0,
            noise_std: 0.0,
            seed: 7,
        };
        let ds = generate_synthetic(&spec).unwrap();
        assert_eq!(ds.n_samples(), 6);
        for step in 0..40 {
            let a = ds.samples.slice(s![0, step, ..]);
            let b = ds.samples.slice(s![3, step, ..]);
            assert_ne!(a, b, "prototypes coincide at t={step}");
        }
        assert_eq!(ds, generate_synthetic(&spec).unwrap());

        let flat = generate_synthetic(&SyntheticSpec {
            redundancy_fraction: 1.0,
            ..spec.clone()
        })
        .unwrap();
        assert_eq!(flat.samples.slice(s![0, .., ..]), flat.samples.slice(s![3, .., ..]));

        assert!(generate_synthetic(&SyntheticSpec { g: 1, ..spec }).is_err());
    }

    #[test]
    fn missing_dataset_lists_search_paths() {
        let dir = tempfile::tempdir().unwrap();
        match load_uea(dir.path(), "Nope", SplitMode::Auto) {
            Err(EmtcError::DatasetNotFound { searched, .. }) => assert_eq!(searched.len(), 4),
            other => panic!("{other:?}"),
        }
    }
}
