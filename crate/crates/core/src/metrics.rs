//! External clustering metrics: ACC (optimal one-to-one matching), matched
//! macro-F1, NMI (arithmetic normalization, natural log) and ARI.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// The four metrics on one `(truth, pred)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub f1: f64,
    pub nmi: f64,
    pub ari: f64,
    /// `mapping[p]` is the class matched to predicted cluster `p`, if any.
    pub mapping: Vec<Option<usize>>,
    pub n: usize,
}

pub fn evaluate(truth: &[usize], pred: &[usize]) -> Result<EvalReport> {
    let (acc, mapping) = clustering_accuracy(truth, pred)?;
    Ok(EvalReport {
        acc,
        f1: matched_f1(truth, pred)?,
        nmi: nmi(truth, pred)?,
        ari: ari(truth, pred)?,
        mapping,
        n: truth.len(),
    })
}

/// Mean and population standard deviation of one metric across seeds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stat { mean, std: var.sqrt() }
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.mean, self.std)
    }
}

/// Per-metric [`Stat`] over a set of runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub acc: Stat,
    pub f1: Stat,
    pub nmi: Stat,
    pub ari: Stat,
}

impl MetricSummary {
    pub fn of(reports: &[EvalReport]) -> MetricSummary {
        let pick = |f: fn(&EvalReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            acc: pick(|r| r.acc),
            f1: pick(|r| r.f1),
            nmi: pick(|r| r.nmi),
            ari: pick(|r| r.ari),
        }
    }

    /// `(name, stat)` in the order ACC, F1, NMI, ARI.
    pub fn entries(&self) -> [(&'static str, Stat); 4] {
        [("acc", self.acc), ("f1", self.f1), ("nmi", self.nmi), ("ari", self.ari)]
    }
}

fn check(truth: &[usize], pred: &[usize]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(arg_err(format!(
            "label length mismatch: truth={}, pred={}",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(arg_err("metrics need at least one label"));
    }
    Ok(())
}

/// Distinct values in ascending order and the compacted labels.
fn compact(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut values = labels.to_vec();
    values.sort_unstable();
    values.dedup();
    let ids = labels
        .iter()
        .map(|l| values.binary_search(l).expect("value present"))
        .collect();
    (values, ids)
}

struct Contingency {
    truth_values: Vec<usize>,
    pred_values: Vec<usize>,
    /// `pred × truth` counts.
    counts: Array2<f64>,
    truth_sizes: Vec<f64>,
    pred_sizes: Vec<f64>,
    n: f64,
}

fn contingency(truth: &[usize], pred: &[usize]) -> Contingency {
    let (truth_values, t) = compact(truth);
    let (pred_values, p) = compact(pred);
    let mut counts = Array2::<f64>::zeros((pred_values.len(), truth_values.len()));
    for (&a, &b) in p.iter().zip(&t) {
        counts[[a, b]] += 1.0;
    }
    let truth_sizes = counts.sum_axis(ndarray::Axis(0)).to_vec();
    let pred_sizes = counts.sum_axis(ndarray::Axis(1)).to_vec();
    Contingency {
        truth_values,
        pred_values,
        counts,
        truth_sizes,
        pred_sizes,
        n: truth.len() as f64,
    }
}

/// Minimum-cost perfect assignment on a square matrix; returns `row → col`.
pub fn hungarian_min(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "square cost matrix");
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Matching of predicted clusters to classes on the zero-padded square
/// contingency matrix. Among matchings with the most agreements, the one
/// with the largest summed per-pair F1 wins, which makes the matched F1
/// independent of how labels are numbered.
fn best_matching(c: &Contingency) -> (Vec<Option<usize>>, f64) {
    let (kp, kt) = c.counts.dim();
    let size = kp.max(kt);
    let tie_weight = 1.0 / (2.0 * (size as f64 + 1.0));
    let mut cost = Array2::<f64>::zeros((size, size));
    for a in 0..kp {
        for b in 0..kt {
            let n_ab = c.counts[[a, b]];
            let f1 = 2.0 * n_ab / (c.pred_sizes[a] + c.truth_sizes[b]);
            cost[[a, b]] = -(n_ab + tie_weight * f1);
        }
    }
    let assignment = hungarian_min(&cost);
    let mut matched = 0.0;
    let mapping = (0..kp)
        .map(|a| {
            let b = assignment[a];
            (b < kt).then(|| {
                matched += c.counts[[a, b]];
                b
            })
        })
        .collect();
    (mapping, matched)
}

fn original_mapping(c: &Contingency, compact_map: &[Option<usize>]) -> Vec<Option<usize>> {
    let len = c.pred_values.last().map_or(0, |m| m + 1);
    let mut out = vec![None; len];
    for (a, m) in compact_map.iter().enumerate() {
        out[c.pred_values[a]] = m.map(|b| c.truth_values[b]);
    }
    out
}

/// Best-case accuracy over one-to-one cluster↔class matchings, and the matching.
pub fn clustering_accuracy(truth: &[usize], pred: &[usize]) -> Result<(f64, Vec<Option<usize>>)> {
    check(truth, pred)?;
    let c = contingency(truth, pred);
    let (mapping, matched) = best_matching(&c);
    Ok((matched / c.n, original_mapping(&c, &mapping)))
}

/// Macro-F1 after relabeling predictions with the accuracy-optimal matching.
/// Averages over every class that occurs in the truth or in the relabeled
/// predictions; clusters matched to no class count as extra classes.
pub fn matched_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    check(truth, pred)?;
    let c = contingency(truth, pred);
    let (mapping, _) = best_matching(&c);
    let (kp, kt) = c.counts.dim();
    let mut total = 0.0;
    let mut classes = kt;
    for b in 0..kt {
        if let Some(a) = mapping.iter().position(|m| *m == Some(b)) {
            total += 2.0 * c.counts[[a, b]] / (c.pred_sizes[a] + c.truth_sizes[b]);
        }
    }
    classes += mapping.iter().take(kp).filter(|m| m.is_none()).count();
    Ok(total / classes as f64)
}

fn entropy(sizes: &[f64], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let p = s / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(truth; pred) / ((H(truth) + H(pred)) / 2)`; two single-cluster
/// partitions score 1.
pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    check(truth, pred)?;
    let c = contingency(truth, pred);
    let ht = entropy(&c.truth_sizes, c.n);
    let hp = entropy(&c.pred_sizes, c.n);
    if ht == 0.0 && hp == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((a, b), &n_ab) in c.counts.indexed_iter() {
        if n_ab > 0.0 {
            mi += n_ab / c.n * (c.n * n_ab / (c.pred_sizes[a] * c.truth_sizes[b])).ln();
        }
    }
    let denom = (ht + hp) / 2.0;
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Pair-counting adjusted Rand index, computed from the integer pair
/// confusion counts so that exact fractions come out exact.
pub fn ari(truth: &[usize], pred: &[usize]) -> Result<f64> {
    check(truth, pred)?;
    let c = contingency(truth, pred);
    let sq = |v: &f64| (*v as i128) * (*v as i128);
    let n = truth.len() as i128;
    let sum_cells: i128 = c.counts.iter().map(sq).sum();
    let sum_truth: i128 = c.truth_sizes.iter().map(sq).sum();
    let sum_pred: i128 = c.pred_sizes.iter().map(sq).sum();
    // Ordered-pair counts: both together, split only by one side, split by both.
    let tp = sum_cells - n;
    let fp = sum_pred - sum_cells;
    let fn_ = sum_truth - sum_cells;
    let tn = n * n - fp - fn_ - sum_cells;
    if fp == 0 && fn_ == 0 {
        return Ok(1.0);
    }
    let num = 2 * (tp * tn - fn_ * fp);
    let den = (tp + fn_) * (fn_ + tn) + (tp + fp) * (fp + tn);
    Ok(num as f64 / den as f64)
}
