//! Trainable parameters and the two-pass forward/backward computation.
//!
//! Pass 1 encodes the raw input and derives the masks from attention.
//! Pass 2 re-encodes each view's masked input with the same
//! encoder; those representations feed every loss term.

use ndarray::{Array1, Array2, Array3, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{contrastive_loss, contrastive_loss_grad, ContrastConfig};
use crate::encoder::{fuse_backward, fuse_views, EncoderCache, EncoderParams, Linear};
use crate::error::{shape_err, EmtcError, Result};
use crate::losses::{inter_loss, inter_loss_backward, intra_loss, intra_loss_backward, CrossViewTransforms, DecoderParams};
use crate::mask::{
    apply_mask, attention_backward, attention_forward, mask_to_f64, soft_mask_for_backward, threshold_mask,
    AttentionCache, AttentionParams, MaskSet,
};

/// All trainable parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoders: EncoderParams,
    pub attention: AttentionParams,
    pub decoders: DecoderParams,
    pub transforms: CrossViewTransforms,
}

fn linear_blocks<'a>(out: &mut Vec<(String, ArrayViewD<'a, f64>)>, prefix: String, l: &'a Linear) {
    out.push((format!("{prefix}.weight"), l.weight.view().into_dyn()));
    out.push((format!("{prefix}.bias"), l.bias.view().into_dyn()));
}

fn linear_blocks_mut<'a>(out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>, prefix: String, l: &'a mut Linear) {
    out.push((format!("{prefix}.weight"), l.weight.view_mut().into_dyn()));
    out.push((format!("{prefix}.bias"), l.bias.view_mut().into_dyn()));
}

impl ModelParams {
    /// Fan-in scaled uniform initialization from `seed`.
    pub fn init(n_views: usize, variates: usize, embed_dim: usize, key_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            encoders: EncoderParams::init(n_views, variates, embed_dim, &mut rng),
            attention: AttentionParams::init(n_views, embed_dim, key_dim, &mut rng),
            decoders: DecoderParams::init(n_views, embed_dim, variates, &mut rng),
            transforms: CrossViewTransforms::init(n_views, embed_dim, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoders: self.encoders.zeros_like(),
            attention: self.attention.zeros_like(),
            decoders: self.decoders.zeros_like(),
            transforms: self.transforms.zeros_like(),
        }
    }

    pub fn n_views(&self) -> usize {
        self.encoders.n_views()
    }

    /// Named parameter tensors in a fixed order.
    pub fn blocks(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (v, e) in self.encoders.views.iter().enumerate() {
            out.push((format!("encoder[{v}].kernel"), e.kernel.view().into_dyn()));
            out.push((format!("encoder[{v}].conv_bias"), e.conv_bias.view().into_dyn()));
            linear_blocks(&mut out, format!("encoder[{v}].mix"), &e.mix);
        }
        for (v, h) in self.attention.heads.iter().enumerate() {
            out.push((format!("attention[{v}].query"), h.query.view().into_dyn()));
            out.push((format!("attention[{v}].key"), h.key.view().into_dyn()));
        }
        for (v, d) in self.decoders.views.iter().enumerate() {
            linear_blocks(&mut out, format!("decoder[{v}]"), d);
        }
        let pairs = self.transforms.pairs();
        let mut ordered: Vec<_> = pairs.iter().map(|&(a, b)| (self.transforms.index(a, b), a, b)).collect();
        ordered.sort_unstable();
        for (idx, a, b) in ordered {
            linear_blocks(&mut out, format!("transform[{a}->{b}]"), &self.transforms.maps[idx]);
        }
        out
    }

    /// Mutable counterpart of [`ModelParams::blocks`], same order.
    pub fn blocks_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        for (v, e) in self.encoders.views.iter_mut().enumerate() {
            out.push((format!("encoder[{v}].kernel"), e.kernel.view_mut().into_dyn()));
            out.push((format!("encoder[{v}].conv_bias"), e.conv_bias.view_mut().into_dyn()));
            linear_blocks_mut(&mut out, format!("encoder[{v}].mix"), &mut e.mix);
        }
        for (v, h) in self.attention.heads.iter_mut().enumerate() {
            out.push((format!("attention[{v}].query"), h.query.view_mut().into_dyn()));
            out.push((format!("attention[{v}].key"), h.key.view_mut().into_dyn()));
        }
        for (v, d) in self.decoders.views.iter_mut().enumerate() {
            linear_blocks_mut(&mut out, format!("decoder[{v}]"), d);
        }
        let n = self.transforms.n_views;
        let mut names = vec![String::new(); self.transforms.maps.len()];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    names[self.transforms.index(a, b)] = format!("transform[{a}->{b}]");
                }
            }
        }
        for (name, map) in names.into_iter().zip(self.transforms.maps.iter_mut()) {
            linear_blocks_mut(&mut out, name, map);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }
}

/// How masks are produced during the forward pass.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskMode {
    /// No masking.
    AllOnes,
    /// A precomputed `N × T` mask shared by every view.
    Fixed(Array2<f64>),
    /// Hard top-k masks forward, sigmoid surrogate gradient backward.
    StraightThrough { keep_ratio: f64, sharpness: f64 },
    /// The sigmoid surrogate in both directions with frozen thresholds.
    Soft {
        sharpness: f64,
        thresholds: Vec<Array1<f64>>,
    },
}

struct EvolvingState {
    raw: Vec<EncoderCache>,
    attention: Vec<AttentionCache>,
    importance: Vec<Array2<f64>>,
    thresholds: Vec<Array1<f64>>,
    hard: Vec<Array2<u8>>,
    surrogate: Vec<Array2<f64>>,
    sharpness: f64,
}

/// Activations of one forward pass.
pub struct ForwardPass {
    input: Array3<f64>,
    evolving: Option<EvolvingState>,
    masks: Vec<Array2<f64>>,
    masked: Vec<Array3<f64>>,
    encoded: Vec<EncoderCache>,
    views: Vec<Array3<f64>>,
    /// Temporal- and view-pooled embedding, `N × d`.
    pub fused: Array2<f64>,
}

/// Loss weights and the cluster assignment for one objective evaluation.
#[derive(Clone, Debug)]
pub struct LossSpec<'a> {
    pub alpha: f64,
    pub beta: f64,
    pub use_intra: bool,
    pub use_inter: bool,
    /// Cluster labels for the contrastive term; `None` disables it.
    pub labels: Option<&'a [usize]>,
    pub contrast: ContrastConfig,
}

/// Unweighted loss terms and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub contra: f64,
    pub intra: f64,
    pub inter: f64,
}

/// `L_contra + α·L_intra + β·L_inter`.
pub fn total_loss(l_contra: f64, l_intra: f64, l_inter: f64, alpha: f64, beta: f64) -> f64 {
    l_contra + alpha * l_intra + beta * l_inter
}

impl LossSpec<'_> {
    fn weights(&self) -> (f64, f64) {
        (
            if self.use_intra { self.alpha } else { 0.0 },
            if self.use_inter { self.beta } else { 0.0 },
        )
    }
}

/// Run both encoding passes under `mode`.
pub fn forward(params: &ModelParams, x: &Array3<f64>, mode: &MaskMode) -> Result<ForwardPass> {
    let (n, t, _) = x.dim();
    let v_count = params.n_views();
    let (masks, evolving) = match mode {
        MaskMode::AllOnes => (vec![Array2::ones((n, t)); v_count], None),
        MaskMode::Fixed(m) => {
            if m.dim() != (n, t) {
                return Err(shape_err("fixed mask does not match the input"));
            }
            (vec![m.clone(); v_count], None)
        }
        MaskMode::StraightThrough { .. } | MaskMode::Soft { .. } => {
            let mut raw = Vec::with_capacity(v_count);
            let mut attention = Vec::with_capacity(v_count);
            let mut importance = Vec::with_capacity(v_count);
            let mut thresholds = Vec::with_capacity(v_count);
            let mut hard = Vec::with_capacity(v_count);
            let mut surrogate = Vec::with_capacity(v_count);
            let mut masks = Vec::with_capacity(v_count);
            let sharpness = match mode {
                MaskMode::StraightThrough { sharpness, .. } | MaskMode::Soft { sharpness, .. } => *sharpness,
                _ => unreachable!(),
            };
            for (v, (enc, head)) in params.encoders.views.iter().zip(&params.attention.heads).enumerate() {
                let cache = enc.forward(x.view())?;
                let att = attention_forward(cache.out.view(), head)?;
                let imp = att.importance.clone();
                let (thr, bits, applied) = match mode {
                    MaskMode::StraightThrough { keep_ratio, .. } => {
                        let vm = threshold_mask(imp.view(), *keep_ratio);
                        let applied = mask_to_f64(&vm.mask);
                        (vm.thresholds, vm.mask, applied)
                    }
                    MaskMode::Soft { thresholds, .. } => {
                        let thr = thresholds
                            .get(v)
                            .cloned()
                            .ok_or_else(|| shape_err("missing frozen thresholds for a view"))?;
                        let soft = soft_mask_for_backward(imp.view(), thr.view(), sharpness);
                        let bits = imp
                            .indexed_iter()
                            .map(|((i, _), &s)| u8::from(s >= thr[i]))
                            .collect::<Array1<u8>>()
                            .into_shape_with_order((n, t))
                            .expect("n*t entries");
                        (thr, bits, soft)
                    }
                    _ => unreachable!(),
                };
                surrogate.push(soft_mask_for_backward(imp.view(), thr.view(), sharpness));
                raw.push(cache);
                attention.push(att);
                importance.push(imp);
                thresholds.push(thr);
                hard.push(bits);
                masks.push(applied);
            }
            (
                masks,
                Some(EvolvingState {
                    raw,
                    attention,
                    importance,
                    thresholds,
                    hard,
                    surrogate,
                    sharpness,
                }),
            )
        }
    };

    let mut masked = Vec::with_capacity(v_count);
    let mut encoded = Vec::with_capacity(v_count);
    for (enc, m) in params.encoders.views.iter().zip(&masks) {
        let xt = apply_mask(x.view(), m.view())?;
        encoded.push(enc.forward(xt.view())?);
        masked.push(xt);
    }
    let views: Vec<Array3<f64>> = encoded.iter().map(|c| c.out.clone()).collect();
    let fused = fuse_views(&views)?;
    Ok(ForwardPass {
        input: x.clone(),
        evolving,
        masks,
        masked,
        encoded,
        views,
        fused,
    })
}

impl ForwardPass {
    /// Masked-input representations `F^(v)`.
    pub fn views(&self) -> &[Array3<f64>] {
        &self.views
    }

    /// Mask values applied to each view's input.
    pub fn applied_masks(&self) -> &[Array2<f64>] {
        &self.masks
    }

    /// Importance scores and hard masks, when masks were attention-driven.
    pub fn mask_set(&self, keep_ratio: f64) -> Option<MaskSet> {
        self.evolving.as_ref().map(|e| MaskSet {
            importance: e.importance.clone(),
            masks: e.hard.clone(),
            keep_ratio,
            thresholds: e.thresholds.clone(),
        })
    }

    /// Binary masks of every view regardless of the mask source.
    pub fn binary_masks(&self) -> Vec<Array2<u8>> {
        match &self.evolving {
            Some(e) => e.hard.clone(),
            None => self.masks.iter().map(|m| m.mapv(|v| u8::from(v > 0.5))).collect(),
        }
    }

    pub fn thresholds(&self) -> Option<Vec<Array1<f64>>> {
        self.evolving.as_ref().map(|e| e.thresholds.clone())
    }

    /// Loss values only.
    pub fn losses(&self, params: &ModelParams, spec: &LossSpec<'_>) -> Result<LossBreakdown> {
        let views = self.views();
        let intra = intra_loss(self.input.view(), views, &params.decoders)?;
        let inter = inter_loss(views, &params.transforms)?;
        let contra = match spec.labels {
            Some(labels) => contrastive_loss(self.fused.view(), labels, &spec.contrast)?.loss,
            None => 0.0,
        };
        let (a, b) = spec.weights();
        Ok(LossBreakdown {
            total: total_loss(contra, intra, inter, a, b),
            contra,
            intra,
            inter,
        })
    }

    /// Loss values and `∂L_total/∂θ` for every parameter block.
    pub fn backward(&self, params: &ModelParams, spec: &LossSpec<'_>) -> Result<(LossBreakdown, ModelParams)> {
        let mut grad = params.zeros_like();
        let views = self.views();
        let (n, t, _) = self.input.dim();
        let v_count = views.len();
        let (a, b) = spec.weights();
        let mut d_views: Vec<Array3<f64>> = views.iter().map(|v| Array3::zeros(v.raw_dim())).collect();

        let intra = if a > 0.0 {
            intra_loss_backward(self.input.view(), views, &params.decoders, a, &mut grad.decoders, &mut d_views)?
        } else {
            intra_loss(self.input.view(), views, &params.decoders)?
        };
        let inter = if b > 0.0 {
            inter_loss_backward(views, &params.transforms, b, &mut grad.transforms, &mut d_views)?
        } else {
            inter_loss(views, &params.transforms)?
        };
        let contra = match spec.labels {
            Some(labels) => {
                let (outcome, d_fused) = contrastive_loss_grad(self.fused.view(), labels, &spec.contrast)?;
                let d_pool = fuse_backward(&d_fused, v_count, t);
                for d in &mut d_views {
                    *d += &d_pool;
                }
                outcome.loss
            }
            None => 0.0,
        };

        for v in 0..v_count {
            let enc = &params.encoders.views[v];
            let need_dx = self.evolving.is_some();
            let d_masked = enc.backward(
                self.masked[v].view(),
                &self.encoded[v],
                &d_views[v],
                &mut grad.encoders.views[v],
                need_dx,
            );
            if let (Some(state), Some(d_masked)) = (&self.evolving, d_masked) {
                // ∂L/∂m(i,t) = Σ_c ∂L/∂X̃(i,t,c) · X(i,t,c), then through the surrogate.
                let d_mask = (&d_masked * &self.input).sum_axis(Axis(2));
                let s = &state.surrogate[v];
                let d_importance = d_mask * &s.mapv(|p| state.sharpness * p * (1.0 - p));
                let d_raw = attention_backward(
                    state.raw[v].out.view(),
                    &params.attention.heads[v],
                    &state.attention[v],
                    d_importance.view(),
                    &mut grad.attention.heads[v],
                );
                enc.backward(self.input.view(), &state.raw[v], &d_raw, &mut grad.encoders.views[v], false);
            }
        }
        debug_assert_eq!(n, self.fused.nrows());

        let losses = LossBreakdown {
            total: total_loss(contra, intra, inter, a, b),
            contra,
            intra,
            inter,
        };
        for (name, value) in [("contra", contra), ("intra", intra), ("inter", inter)] {
            if !value.is_finite() {
                return Err(EmtcError::Numeric(format!("loss term {name} = {value}")));
            }
        }
        Ok((losses, grad))
    }
}

/// Relative error `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` per
/// parameter block, with the numeric gradient from central differences of
/// step `h`. Blocks whose gradients are both below `1e-10` report 0.
pub fn gradient_check(
    params: &ModelParams,
    x: &Array3<f64>,
    mode: &MaskMode,
    spec: &LossSpec<'_>,
    h: f64,
) -> Result<Vec<(String, f64)>> {
    let (_, analytic) = forward(params, x, mode)?.backward(params, spec)?;
    let eval = |p: &ModelParams| -> Result<f64> { Ok(forward(p, x, mode)?.losses(p, spec)?.total) };
    let mut probe = params.clone();
    let names: Vec<String> = params.blocks().into_iter().map(|(n, _)| n).collect();
    let mut out = Vec::with_capacity(names.len());
    for (b, name) in names.into_iter().enumerate() {
        let len = params.blocks()[b].1.len();
        let mut diff = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        let analytic_block: Vec<f64> = analytic.blocks()[b].1.iter().copied().collect();
        for (e, &a) in analytic_block.iter().enumerate().take(len) {
            let original = params.blocks()[b].1.iter().nth(e).copied().expect("in range");
            let set = |p: &mut ModelParams, v: f64| {
                if let Some(slot) = p.blocks_mut()[b].1.iter_mut().nth(e) {
                    *slot = v;
                }
            };
            set(&mut probe, original + h);
            let up = eval(&probe)?;
            set(&mut probe, original - h);
            let down = eval(&probe)?;
            set(&mut probe, original);
            let numeric = (up - down) / (2.0 * h);
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
        let scale = norm_a.sqrt().max(norm_n.sqrt());
        out.push((name, if scale < 1e-10 { 0.0 } else { diff.sqrt() / scale }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::kmeans;
    use rand::Rng;

    struct Micro {
        params: ModelParams,
        x: Array3<f64>,
        labels: Vec<usize>,
        thresholds: Vec<Array1<f64>>,
    }

    fn micro() -> Micro {
        let params = ModelParams::init(2, 2, 4, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array3::from_shape_simple_fn((6, 8, 2), || rng.random_range(-1.5..1.5));
        let pass = forward(
            &params,
            &x,
            &MaskMode::StraightThrough {
                keep_ratio: 0.75,
                sharpness: 10.0,
            },
        )
        .unwrap();
        let labels = kmeans(pass.fused.view(), 2, 0).unwrap().labels;
        // Offset the frozen thresholds so no importance sits exactly on one.
        let thresholds = pass.thresholds().unwrap().into_iter().map(|t| t - 1e-3).collect();
        Micro {
            params,
            x,
            labels,
            thresholds,
        }
    }

    fn spec(labels: Option<&[usize]>, alpha: f64, beta: f64) -> LossSpec<'_> {
        LossSpec {
            alpha,
            beta,
            use_intra: true,
            use_inter: true,
            labels,
            contrast: ContrastConfig {
                temperature: 0.5,
                positive_sampling_seed: 3,
            },
        }
    }

    fn assert_close(errors: &[(String, f64)]) {
        for (name, err) in errors {
            assert!(*err < 1e-4, "{name}: relative error {err:e}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = micro();
        let mode = MaskMode::Soft {
            sharpness: 10.0,
            thresholds: m.thresholds.clone(),
        };
        for s in [
            spec(None, 1.0, 0.0),
            spec(None, 0.0, 1.0),
            spec(Some(&m.labels), 0.0, 0.0),
            spec(Some(&m.labels), 1.0, 0.5),
        ] {
            assert_close(&gradient_check(&m.params, &m.x, &mode, &s, 1e-5).unwrap());
        }
    }

    #[test]
    fn mask_gradient_reaches_attention() {
        let m = micro();
        let mode = MaskMode::StraightThrough {
            keep_ratio: 0.75,
            sharpness: 10.0,
        };
        let pass = forward(&m.params, &m.x, &mode).unwrap();
        let (_, g) = pass.backward(&m.params, &spec(Some(&m.labels), 1.0, 0.5)).unwrap();
        let norm: f64 = g.attention.heads.iter().map(|h| h.query.iter().map(|v| v * v).sum::<f64>()).sum();
        assert!(norm > 0.0);
        let unmasked = forward(&m.params, &m.x, &MaskMode::AllOnes).unwrap();
        let (_, g) = unmasked.backward(&m.params, &spec(Some(&m.labels), 1.0, 0.5)).unwrap();
        assert!(g.attention.heads.iter().all(|h| h.query.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn hard_masks_keep_budget() {
        let m = micro();
        let pass = forward(
            &m.params,
            &m.x,
            &MaskMode::StraightThrough {
                keep_ratio: 0.5,
                sharpness: 10.0,
            },
        )
        .unwrap();
        for mask in pass.binary_masks() {
            for row in mask.rows() {
                assert_eq!(row.iter().filter(|&&b| b == 1).count(), 4);
            }
        }
        let set = pass.mask_set(0.5).unwrap();
        assert_eq!(set.masks.len(), 2);
    }

    #[test]
    fn block_names_are_unique_and_aligned() {
        let mut p = ModelParams::init(3, 2, 4, 2, 0);
        let names: Vec<String> = p.blocks().into_iter().map(|(n, _)| n).collect();
        let names_mut: Vec<String> = p.blocks_mut().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, names_mut);
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert!(names.contains(&"transform[2->0].weight".to_string()));
    }
}
