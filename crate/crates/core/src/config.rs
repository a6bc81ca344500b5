use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::static_masks::StaticKind;

/// Component switches for ablation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub use_ivm: bool,
    pub use_mev: bool,
    pub use_intra: bool,
    pub use_inter: bool,
    pub use_contra: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Self {
            use_ivm: true,
            use_mev: true,
            use_intra: true,
            use_inter: true,
            use_contra: true,
        }
    }
}

/// Where per-epoch masks come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaskPolicy {
    /// Attention-scored masks recomputed every epoch.
    #[default]
    Evolving,
    Random,
    Uniform,
    Variance,
    Frequency,
}

impl MaskPolicy {
    pub const ALL: [MaskPolicy; 5] = [
        MaskPolicy::Evolving,
        MaskPolicy::Random,
        MaskPolicy::Uniform,
        MaskPolicy::Variance,
        MaskPolicy::Frequency,
    ];

    pub fn static_kind(self) -> Option<StaticKind> {
        match self {
            MaskPolicy::Evolving => None,
            MaskPolicy::Random => Some(StaticKind::Random),
            MaskPolicy::Uniform => Some(StaticKind::Uniform),
            MaskPolicy::Variance => Some(StaticKind::Variance),
            MaskPolicy::Frequency => Some(StaticKind::Frequency),
        }
    }

    pub fn name(self) -> &'static str {
        match self.static_kind() {
            None => "evolving",
            Some(k) => k.name(),
        }
    }
}

/// Every hyperparameter of a training run. None of the defaults are
/// published values; they are conservative choices for CPU training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Number of endogenous views `V`.
    pub views: usize,
    /// Representation width `d`.
    pub embed_dim: usize,
    /// Attention key width `d_k`.
    pub key_dim: usize,
    /// Fraction of timestamps kept by every mask (η).
    pub keep_ratio: f64,
    /// Contrastive temperature τ.
    pub temperature: f64,
    /// Weight of the intra-view reconstruction loss.
    pub alpha: f64,
    /// Weight of the inter-view consistency loss.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    /// Cluster count `g`; taken from the dataset labels when absent.
    pub n_clusters: Option<usize>,
    /// Slope of the sigmoid surrogate used for mask gradients.
    pub sharpness: f64,
    pub kmeans_restarts: usize,
    /// Training stops once `|ΔL_total|` stays below this for `plateau_patience` epochs.
    pub plateau_tolerance: f64,
    pub plateau_patience: usize,
    pub ablation: Ablation,
    pub mask_policy: MaskPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            views: 3,
            embed_dim: 64,
            key_dim: 32,
            keep_ratio: 0.75,
            temperature: 0.5,
            alpha: 1.0,
            beta: 0.5,
            learning_rate: 1e-3,
            epochs: 200,
            seeds: vec![0, 1, 2],
            n_clusters: None,
            sharpness: 10.0,
            kmeans_restarts: 10,
            plateau_tolerance: 1e-6,
            plateau_patience: 10,
            ablation: Ablation::default(),
            mask_policy: MaskPolicy::Evolving,
        }
    }
}

impl ExperimentConfig {
    /// Small configuration used by the synthetic benchmarks and tests.
    pub fn quick() -> Self {
        Self {
            embed_dim: 32,
            key_dim: 16,
            learning_rate: 5e-3,
            epochs: 100,
            seeds: vec![0, 1, 2, 3, 4],
            ..Self::default()
        }
    }

    /// `V`, forced to 1 when multi-view generation is ablated.
    pub fn effective_views(&self) -> usize {
        if self.ablation.use_mev {
            self.views
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.views == 0 || self.embed_dim == 0 || self.key_dim == 0 {
            return Err(arg_err("views, embed_dim and key_dim must be positive"));
        }
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return Err(arg_err(format!("keep_ratio must lie in (0, 1], got {}", self.keep_ratio)));
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return Err(arg_err("temperature must be positive"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(arg_err("alpha and beta must be non-negative"));
        }
        if [self.learning_rate, self.sharpness].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(arg_err("learning_rate and sharpness must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(arg_err("at least one seed is required"));
        }
        Ok(())
    }

    /// Loss weights after applying the per-term switches.
    pub fn effective_weights(&self) -> (f64, f64) {
        let a = if self.ablation.use_intra { self.alpha } else { 0.0 };
        let b = if self.ablation.use_inter { self.beta } else { 0.0 };
        (a, b)
    }
}
