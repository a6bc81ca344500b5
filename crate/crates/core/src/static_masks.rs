//! Non-evolving masking baselines. Each policy keeps exactly
//! `k = max(1, ceil(keep_ratio · T))` timestamps per sample and is computed
//! once before training.

use ndarray::{Array1, Array2, ArrayView2, ArrayView3, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::mask::{keep_count, top_k_indices};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StaticKind {
    Random,
    Uniform,
    Variance,
    Frequency,
}

impl StaticKind {
    pub const ALL: [StaticKind; 4] = [
        StaticKind::Random,
        StaticKind::Uniform,
        StaticKind::Variance,
        StaticKind::Frequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StaticKind::Random => "random",
            StaticKind::Uniform => "uniform",
            StaticKind::Variance => "variance",
            StaticKind::Frequency => "frequency",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticMaskPolicy {
    pub kind: StaticKind,
    pub keep_ratio: f64,
    pub seed: u64,
}

/// Binary `N × T` mask (as `0.0`/`1.0`) for `x` of shape `N × T × D`.
pub fn static_mask(x: ArrayView3<f64>, policy: &StaticMaskPolicy) -> Array2<f64> {
    let (n, t, _) = x.dim();
    let k = keep_count(t, policy.keep_ratio);
    let mut mask = Array2::<f64>::zeros((n, t));
    match policy.kind {
        StaticKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
            for i in 0..n {
                for s in sample(&mut rng, t, k) {
                    mask[[i, s]] = 1.0;
                }
            }
        }
        StaticKind::Uniform => {
            // Evenly spaced from index 0; equals the stride ⌈1/η⌉ rule whenever
            // that rule yields exactly k stamps.
            for j in 0..k {
                let s = j * t / k;
                mask.column_mut(s).fill(1.0);
            }
        }
        StaticKind::Variance => {
            for i in 0..n {
                let scores = timestamp_variance(x.index_axis(Axis(0), i));
                for s in top_k_indices(scores.view(), k) {
                    mask[[i, s]] = 1.0;
                }
            }
        }
        StaticKind::Frequency => {
            let components = keep_count(t, policy.keep_ratio);
            let mut planner = FftPlanner::<f64>::new();
            for i in 0..n {
                let scores = spectral_contribution(x.index_axis(Axis(0), i), components, &mut planner);
                for s in top_k_indices(scores.view(), k) {
                    mask[[i, s]] = 1.0;
                }
            }
        }
    }
    mask
}

/// Population variance of `x(t, :)` across variates, per timestamp.
pub fn timestamp_variance(sample: ArrayView2<f64>) -> Array1<f64> {
    sample
        .outer_iter()
        .map(|row| {
            let m = row.mean().unwrap_or(0.0);
            row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / row.len() as f64
        })
        .collect()
}

/// Energy of the band-limited reconstruction built from the `components`
/// strongest frequency bins (magnitudes summed over variates), per timestamp.
pub fn spectral_contribution(
    sample: ArrayView2<f64>,
    components: usize,
    planner: &mut FftPlanner<f64>,
) -> Array1<f64> {
    let (t, d) = sample.dim();
    let fft = planner.plan_fft_forward(t);
    let ifft = planner.plan_fft_inverse(t);
    let spectra: Vec<Vec<Complex<f64>>> = (0..d)
        .map(|c| {
            let mut buf: Vec<Complex<f64>> = sample.column(c).iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            buf
        })
        .collect();
    // Rank the non-redundant half of the spectrum; conjugate bins follow.
    let half = t / 2 + 1;
    let magnitude: Array1<f64> = (0..half).map(|b| spectra.iter().map(|s| s[b].norm()).sum()).collect();
    let chosen = top_k_indices(magnitude.view(), components.min(half));
    let mut keep = vec![false; t];
    for b in chosen {
        keep[b] = true;
        keep[(t - b) % t] = true;
    }
    let mut energy = Array1::<f64>::zeros(t);
    for spectrum in &spectra {
        let mut filtered: Vec<Complex<f64>> = spectrum
            .iter()
            .enumerate()
            .map(|(b, &z)| if keep[b] { z } else { Complex::new(0.0, 0.0) })
            .collect();
        ifft.process(&mut filtered);
        for (e, z) in energy.iter_mut().zip(&filtered) {
            let v = z.re / t as f64;
            *e += v * v;
        }
    }
    energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s, Array3};
    use rand::Rng;

    fn random_x(n: usize, t: usize, d: usize, seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_simple_fn((n, t, d), || rng.random_range(-1.0..1.0))
    }

    fn policy(kind: StaticKind, keep_ratio: f64, seed: u64) -> StaticMaskPolicy {
        StaticMaskPolicy { kind, keep_ratio, seed }
    }

    #[test]
    fn full_keep_is_all_ones() {
        let x = random_x(3, 7, 2, 0);
        for kind in StaticKind::ALL {
            assert!(static_mask(x.view(), &policy(kind, 1.0, 1)).iter().all(|&m| m == 1.0));
        }
    }

    #[test]
    fn uniform_stride() {
        let x = random_x(2, 4, 2, 0);
        let m = static_mask(x.view(), &policy(StaticKind::Uniform, 0.5, 0));
        assert_eq!(m, array![[1.0, 0.0, 1.0, 0.0], [1.0, 0.0, 1.0, 0.0]]);
    }

    #[test]
    fn variance_keeps_spread_timestamp() {
        let t = 6;
        let mut x = Array3::from_elem((1, t, 3), 0.5);
        x.slice_mut(s![0, 4, ..]).assign(&array![-3.0, 0.0, 3.0]);
        let m = static_mask(x.view(), &policy(StaticKind::Variance, 1.0 / t as f64, 0));
        assert_eq!(m.row(0).to_vec(), vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn exact_keep_counts() {
        let x = random_x(4, 37, 3, 5);
        for kind in StaticKind::ALL {
            for ratio in [0.01, 0.25, 0.5, 0.75, 0.9] {
                let m = static_mask(x.view(), &policy(kind, ratio, 2));
                let k = keep_count(37, ratio) as f64;
                for row in m.rows() {
                    assert_eq!(row.sum(), k, "{kind:?} {ratio}");
                }
            }
        }
    }

    #[test]
    fn random_depends_on_seed_only() {
        let x = random_x(2, 100, 2, 1);
        let a = static_mask(x.view(), &policy(StaticKind::Random, 0.5, 0));
        assert_eq!(a, static_mask(x.view(), &policy(StaticKind::Random, 0.5, 0)));
        assert_ne!(a, static_mask(x.view(), &policy(StaticKind::Random, 0.5, 1)));
    }

    #[test]
    fn data_driven_policies_follow_sample_order() {
        let x = random_x(5, 24, 3, 9);
        let order = [3usize, 0, 4, 1, 2];
        let permuted = x.select(Axis(0), &order);
        for kind in [StaticKind::Variance, StaticKind::Frequency] {
            let m = static_mask(x.view(), &policy(kind, 0.5, 0));
            let mp = static_mask(permuted.view(), &policy(kind, 0.5, 0));
            assert_eq!(m.select(Axis(0), &order), mp);
        }
    }

    #[test]
    fn frequency_prefers_dominant_oscillation() {
        // A burst of a strong tone in the second half dominates the spectrum.
        let t = 32;
        let mut x = Array3::zeros((1, t, 1));
        for s in 16..32 {
            x[[0, s, 0]] = (std::f64::consts::TAU * 4.0 * s as f64 / t as f64).sin() * 5.0;
        }
        let m = static_mask(x.view(), &policy(StaticKind::Frequency, 0.25, 0));
        let kept_late = (16..32).filter(|&s| m[[0, s]] == 1.0).count();
        assert!(kept_late >= 6, "{m}");
    }
}
