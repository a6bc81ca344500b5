//! Two-dimensional projections of the fused embedding for plotting.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    #[default]
    Pca,
    Tsne,
}

/// Scores on the top `k` principal axes. Each axis is oriented so that its
/// largest-magnitude loading is positive, which makes the output unique.
pub fn pca(x: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    if n == 0 || k == 0 {
        return Err(arg_err("PCA needs at least one row and one component"));
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("n > 0");
    let centered = x - &mean;
    let m = DMatrix::from_row_iterator(n, d, centered.iter().copied());
    let cov = m.transpose() * &m;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut out = Array2::<f64>::zeros((n, k));
    for (c, &axis) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(axis).into_owned();
        let pivot = v.iter().copied().fold(0.0_f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
        if pivot < 0.0 {
            v = -v;
        }
        let scores = &m * &v;
        for i in 0..n {
            out[[i, c]] = scores[i];
        }
    }
    Ok(out)
}

/// Settings for exact (O(N²)) t-SNE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneOptions {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneOptions {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

fn sq_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let s: f64 = x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum();
            d[[i, j]] = s;
            d[[j, i]] = s;
        }
    }
    d
}

/// Row-conditional affinities with per-row bandwidth found by bisection.
fn affinities(dist: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = dist.nrows();
    let target = perplexity.ln();
    let mut p = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let (mut lo, mut hi, mut beta) = (0.0_f64, f64::INFINITY, 1.0_f64);
        for _ in 0..100 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                if j != i {
                    let w = (-beta * dist[[i, j]]).exp();
                    p[[i, j]] = w;
                    sum += w;
                    weighted += w * dist[[i, j]];
                }
            }
            let sum = sum.max(1e-300);
            let entropy = sum.ln() + beta * weighted / sum;
            for j in 0..n {
                p[[i, j]] /= sum;
            }
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    }
    let sym = (&p + &p.t()) / (2.0 * n as f64);
    sym.mapv(|v| v.max(1e-12))
}

/// Exact t-SNE to two dimensions, deterministic for a fixed seed.
pub fn tsne(x: &Array2<f64>, opts: &TsneOptions) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(arg_err("t-SNE needs at least two points"));
    }
    let perplexity = opts.perplexity.min((n as f64 - 1.0) / 3.0).max(1.0);
    let p = affinities(&sq_distances(x), perplexity);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid std");
    let mut y: Array2<f64> = Array2::from_shape_simple_fn((n, 2), || init.sample(&mut rng));
    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    for it in 0..opts.iterations {
        let exaggeration = if it < 250 { 12.0 } else { 1.0 };
        let momentum = if it < 250 { 0.5 } else { 0.8 };
        let mut num = Array2::<f64>::zeros((n, n));
        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (y[[i, 0]] - y[[j, 0]]).powi(2) + (y[[i, 1]] - y[[j, 1]]).powi(2);
                let q = 1.0 / (1.0 + d);
                num[[i, j]] = q;
                num[[j, i]] = q;
                z += 2.0 * q;
            }
        }
        let mut grad = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let coeff = 4.0 * (exaggeration * p[[i, j]] - num[[i, j]] / z) * num[[i, j]];
                    grad[[i, 0]] += coeff * (y[[i, 0]] - y[[j, 0]]);
                    grad[[i, 1]] += coeff * (y[[i, 1]] - y[[j, 1]]);
                }
            }
        }
        for ((g, v), gain) in grad.iter().zip(velocity.iter()).zip(gains.iter_mut()) {
            *gain = if g.signum() != v.signum() { *gain + 0.2 } else { (*gain * 0.8).max(0.01) };
        }
        velocity = momentum * &velocity - opts.learning_rate * &(&gains * &grad);
        y += &velocity;
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n > 0");
        y -= &mean;
    }
    Ok(y)
}
