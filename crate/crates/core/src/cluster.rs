//! k-means on the fused embedding and the cluster-guided contrastive loss.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// Outcome of one clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub epoch: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { n_init: 10, max_iter: 300 }
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point. Ties go to `prefer[i]` when it is among the
/// nearest, otherwise to the lowest centroid index.
fn assign(f: ArrayView2<f64>, centroids: &Array2<f64>, prefer: Option<&[usize]>) -> Vec<usize> {
    f.outer_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centroids.outer_iter().enumerate() {
                let d = sq_dist(row, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            if let Some(p) = prefer {
                if sq_dist(row, centroids.row(p[i])) <= best_d {
                    return p[i];
                }
            }
            best
        })
        .collect()
}

fn means(f: ArrayView2<f64>, labels: &[usize], previous: &Array2<f64>) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros(previous.raw_dim());
    let mut counts = vec![0usize; previous.nrows()];
    for (row, &l) in f.outer_iter().zip(labels) {
        let mut s = sums.row_mut(l);
        s += &row;
        counts[l] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        if c == 0 {
            sums.row_mut(j).assign(&previous.row(j));
        } else {
            sums.row_mut(j).mapv_inplace(|v| v / c as f64);
        }
    }
    sums
}

fn inertia_of(f: ArrayView2<f64>, labels: &[usize], centroids: &Array2<f64>) -> f64 {
    f.outer_iter()
        .zip(labels)
        .map(|(row, &l)| sq_dist(row, centroids.row(l)))
        .sum()
}

fn kmeans_pp<R: Rng>(f: ArrayView2<f64>, g: usize, rng: &mut R) -> Array2<f64> {
    let n = f.nrows();
    let mut centroids = Array2::<f64>::zeros((g, f.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&f.row(first));
    let mut closest: Vec<f64> = f.outer_iter().map(|r| sq_dist(r, f.row(first))).collect();
    for j in 1..g {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            while closest[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(j).assign(&f.row(pick));
        for (i, row) in f.outer_iter().enumerate() {
            closest[i] = closest[i].min(sq_dist(row, f.row(pick)));
        }
    }
    centroids
}

/// One Lloyd run from the given centroids. Returns the state and the
/// inertia after every assignment step.
pub(crate) fn lloyd(f: ArrayView2<f64>, init: Array2<f64>, max_iter: usize) -> (ClusterState, Vec<f64>) {
    let mut centroids = init;
    let mut labels = assign(f, &centroids, None);
    let mut history = vec![inertia_of(f, &labels, &centroids)];
    for _ in 0..max_iter {
        centroids = means(f, &labels, &centroids);
        let repaired = repair_empty_clusters(
            ClusterState {
                labels: labels.clone(),
                centroids,
                inertia: 0.0,
                epoch: 0,
            },
            f,
        );
        centroids = repaired.centroids;
        let forced = repaired.labels != labels;
        let next = assign(f, &centroids, forced.then_some(repaired.labels.as_slice()));
        history.push(inertia_of(f, &next, &centroids));
        let done = next == labels;
        labels = next;
        if done {
            break;
        }
    }
    centroids = means(f, &labels, &centroids);
    let state = repair_empty_clusters(
        ClusterState {
            inertia: 0.0,
            labels,
            centroids,
            epoch: 0,
        },
        f,
    );
    (state, history)
}

/// k-means++ seeded Lloyd with `n_init = 10` restarts and at most 300
/// iterations; the lowest-inertia restart wins (ties: earliest restart).
pub fn kmeans(f: ArrayView2<f64>, g: usize, seed: u64) -> Result<ClusterState> {
    kmeans_with(f, g, seed, KMeansOptions::default())
}

pub fn kmeans_with(f: ArrayView2<f64>, g: usize, seed: u64, opts: KMeansOptions) -> Result<ClusterState> {
    let n = f.nrows();
    if g == 0 || n < g {
        return Err(arg_err(format!("k-means needs 1 <= g <= N, got g={g}, N={n}")));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(crate::error::EmtcError::Numeric("k-means input".into()));
    }
    let mut best: Option<ClusterState> = None;
    for restart in 0..opts.n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let init = kmeans_pp(f, g, &mut rng);
        let (state, _) = lloyd(f, init, opts.max_iter);
        if best.as_ref().is_none_or(|b| state.inertia < b.inertia) {
            best = Some(state);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Reseed every empty cluster at the point farthest from its own centroid
/// (taken from clusters with at least two members), then run one
/// reassignment pass. Repeats until every id in `0..g` is populated.
pub fn repair_empty_clusters(state: ClusterState, f: ArrayView2<f64>) -> ClusterState {
    let g = state.centroids.nrows();
    let mut labels = state.labels;
    let mut centroids = state.centroids;
    let count = |labels: &[usize]| {
        let mut c = vec![0usize; g];
        for &l in labels {
            c[l] += 1;
        }
        c
    };
    let mut counts = count(&labels);
    let mut rounds = 0;
    while counts.contains(&0) && f.nrows() >= g {
        for j in 0..g {
            if counts[j] != 0 {
                continue;
            }
            let donor = f
                .outer_iter()
                .enumerate()
                .filter(|(i, _)| counts[labels[*i]] > 1)
                .map(|(i, row)| (i, sq_dist(row, centroids.row(labels[i]))))
                .fold(None::<(usize, f64)>, |acc, (i, d)| match acc {
                    Some((_, bd)) if bd >= d => acc,
                    _ => Some((i, d)),
                });
            let Some((p, _)) = donor else { break };
            counts[labels[p]] -= 1;
            labels[p] = j;
            counts[j] = 1;
            centroids.row_mut(j).assign(&f.row(p));
        }
        rounds += 1;
        if rounds > g + 1 {
            break;
        }
        let next = assign(f, &centroids, Some(&labels));
        let next_counts = count(&next);
        if next_counts.contains(&0) {
            // The pass undid the repair; keep the forced assignment.
            continue;
        }
        labels = next;
        counts = next_counts;
        centroids = means(f, &labels, &centroids);
    }
    let inertia = inertia_of(f, &labels, &centroids);
    ClusterState {
        labels,
        centroids,
        inertia,
        epoch: state.epoch,
    }
}

const COSINE_EPS: f64 = 1e-12;

/// `a·b / (‖a‖‖b‖ + 1e-12)`.
pub fn cosine_sim(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt() + COSINE_EPS)
}

/// Temperature and positive-sampling seed for [`contrastive_loss`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastConfig {
    pub temperature: f64,
    pub positive_sampling_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastOutcome {
    pub loss: f64,
    /// Anchors that contributed (members of non-singleton clusters).
    pub anchors: usize,
    pub positives: Vec<Option<usize>>,
    /// Set when every cluster is a singleton and the loss is defined as 0.
    pub degenerate: bool,
}

/// One uniformly drawn same-cluster partner per anchor; `None` for singletons.
pub fn sample_positives(labels: &[usize], seed: u64) -> Vec<Option<usize>> {
    let g = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); g];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let others: Vec<usize> = members[l].iter().copied().filter(|&j| j != i).collect();
            if others.is_empty() {
                None
            } else {
                Some(others[rng.random_range(0..others.len())])
            }
        })
        .collect()
}

fn validate(f: ArrayView2<f64>, labels: &[usize], cfg: &ContrastConfig) -> Result<()> {
    if labels.len() != f.nrows() {
        return Err(arg_err(format!("{} labels for {} embeddings", labels.len(), f.nrows())));
    }
    if cfg.temperature.is_nan() || cfg.temperature <= 0.0 {
        return Err(arg_err("temperature must be positive"));
    }
    Ok(())
}

/// Cluster-guided contrastive loss, averaged over anchors that have a positive.
///
/// For anchor `i` with sampled positive `p`:
/// `ℓ_i = −s_ip/τ + log Σ_{j≠i} exp(s_ij/τ)`, where the positive appears in
/// the denominator exactly once and the anchor itself never does.
pub fn contrastive_loss(f: ArrayView2<f64>, labels: &[usize], cfg: &ContrastConfig) -> Result<ContrastOutcome> {
    contrastive_impl(f, labels, cfg, false).map(|(o, _)| o)
}

/// [`contrastive_loss`] together with `∂loss/∂F`.
pub fn contrastive_loss_grad(
    f: ArrayView2<f64>,
    labels: &[usize],
    cfg: &ContrastConfig,
) -> Result<(ContrastOutcome, Array2<f64>)> {
    contrastive_impl(f, labels, cfg, true)
}

fn contrastive_impl(
    f: ArrayView2<f64>,
    labels: &[usize],
    cfg: &ContrastConfig,
    want_grad: bool,
) -> Result<(ContrastOutcome, Array2<f64>)> {
    validate(f, labels, cfg)?;
    let n = f.nrows();
    let tau = cfg.temperature;
    let positives = sample_positives(labels, cfg.positive_sampling_seed);
    let anchors = positives.iter().filter(|p| p.is_some()).count();
    let mut grad = Array2::<f64>::zeros(f.raw_dim());
    if anchors == 0 {
        log::warn!("contrastive loss: every cluster is a singleton; returning 0");
        return Ok((
            ContrastOutcome {
                loss: 0.0,
                anchors: 0,
                positives,
                degenerate: true,
            },
            grad,
        ));
    }

    let norms: Array1<f64> = f.outer_iter().map(|r| r.dot(&r).sqrt()).collect();
    let dots = f.dot(&f.t());
    let sim = |i: usize, j: usize| dots[[i, j]] / (norms[i] * norms[j] + COSINE_EPS);

    let mut total = 0.0;
    for i in 0..n {
        let Some(pos) = positives[i] else { continue };
        let logits: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, sim(i, j) / tau)).collect();
        let max = logits.iter().fold(f64::NEG_INFINITY, |m, &(_, v)| m.max(v));
        let z: f64 = logits.iter().map(|&(_, v)| (v - max).exp()).sum();
        let lse = max + z.ln();
        total += lse - sim(i, pos) / tau;

        if want_grad {
            for &(j, logit) in &logits {
                let weight = (logit - lse).exp() - if j == pos { 1.0 } else { 0.0 };
                let coef = weight / tau / anchors as f64;
                if coef == 0.0 {
                    continue;
                }
                let den = norms[i] * norms[j] + COSINE_EPS;
                let dot = dots[[i, j]];
                let (fi, fj) = (f.row(i), f.row(j));
                // ∂s/∂f_i = f_j/den − dot·‖f_j‖·f_i / (‖f_i‖ den²), and symmetrically.
                let ci = if norms[i] > 0.0 { dot * norms[j] / (norms[i] * den * den) } else { 0.0 };
                let cj = if norms[j] > 0.0 { dot * norms[i] / (norms[j] * den * den) } else { 0.0 };
                {
                    let mut gi = grad.row_mut(i);
                    gi.scaled_add(coef / den, &fj);
                    gi.scaled_add(-coef * ci, &fi);
                }
                let mut gj = grad.row_mut(j);
                gj.scaled_add(coef / den, &fi);
                gj.scaled_add(-coef * cj, &fj);
            }
        }
    }
    Ok((
        ContrastOutcome {
            loss: total / anchors as f64,
            anchors,
            positives,
            degenerate: false,
        },
        grad,
    ))
}

/// Cluster sizes for `g` clusters.
pub fn cluster_sizes(labels: &[usize], g: usize) -> Vec<usize> {
    let mut sizes = vec![0; g];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}
