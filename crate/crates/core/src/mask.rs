//! Importance-aware timestamp masking.
//!
//! Scores come from scaled dot-product self-attention over one view's
//! representation; the score of timestamp `t` is the mean attention it
//! receives as a key. Each sample keeps its top `k = max(1, ceil(η·T))`
//! timestamps. The hard mask is not differentiable, so training routes
//! gradients through a sigmoid surrogate centred on the per-sample threshold.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{flat3, unflat3};
use crate::error::{shape_err, EmtcError, Result};

/// Query/key projections for one view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    /// `d × d_k`
    pub query: Array2<f64>,
    /// `d × d_k`
    pub key: Array2<f64>,
}

impl AttentionHead {
    pub fn init<R: Rng>(embed_dim: usize, key_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (embed_dim as f64).sqrt();
        let mut draw = || Array2::from_shape_simple_fn((embed_dim, key_dim), || rng.random_range(-bound..bound));
        let query = draw();
        let key = draw();
        Self { query, key }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            query: Array2::zeros(self.query.raw_dim()),
            key: Array2::zeros(self.key.raw_dim()),
        }
    }

    pub fn key_dim(&self) -> usize {
        self.query.ncols()
    }
}

/// Per-view attention projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub heads: Vec<AttentionHead>,
    pub key_dim: usize,
}

impl AttentionParams {
    pub fn init<R: Rng>(n_views: usize, embed_dim: usize, key_dim: usize, rng: &mut R) -> Self {
        Self {
            heads: (0..n_views).map(|_| AttentionHead::init(embed_dim, key_dim, rng)).collect(),
            key_dim,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            heads: self.heads.iter().map(AttentionHead::zeros_like).collect(),
            key_dim: self.key_dim,
        }
    }
}

/// Attention maps with more than this many entries (`N·T·T`) are not kept
/// between the forward and backward pass; the backward pass recomputes them
/// one sample at a time instead.
pub const MAP_CACHE_LIMIT: usize = 1 << 23;

/// Activations of one attention evaluation, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct AttentionCache {
    pub queries: Array3<f64>,
    pub keys: Array3<f64>,
    /// Column means of the attention maps, `N × T`.
    pub importance: Array2<f64>,
    /// The `N × T × T` maps, when they fit [`MAP_CACHE_LIMIT`].
    pub maps: Option<Array3<f64>>,
}

fn check_width(d: usize, head: &AttentionHead) -> Result<()> {
    if d != head.query.nrows() {
        return Err(shape_err(format!(
            "representation width {d} does not match attention input {}",
            head.query.nrows()
        )));
    }
    Ok(())
}

fn project(f_v: ArrayView3<f64>, head: &AttentionHead) -> (Array3<f64>, Array3<f64>) {
    let (n, t, d) = f_v.dim();
    let owned = f_v.as_standard_layout();
    let flat = owned.view().into_shape_with_order((n * t, d)).expect("standard layout");
    (unflat3(flat.dot(&head.query), n, t), unflat3(flat.dot(&head.key), n, t))
}

/// Row-wise softmax of `scale · q kᵀ` written into `out` (`T × T`, standard
/// layout). When `column_sums` is given the attention each column receives is
/// added to it.
fn softmax_rows(
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    scale: f64,
    mut out: ArrayViewMut2<f64>,
    mut column_sums: Option<&mut [f64]>,
    sample: usize,
) -> Result<()> {
    general_mat_mul(scale, &q, &k.t(), 0.0, &mut out);
    let t = out.ncols();
    let flat = out.as_slice_mut().expect("standard layout");
    for row in flat.chunks_exact_mut(t) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        if !max.is_finite() || !z.is_finite() {
            return Err(EmtcError::Numeric(format!("attention logits for sample {sample}")));
        }
        let inv = 1.0 / z;
        match column_sums.as_deref_mut() {
            Some(sums) => {
                for (v, c) in row.iter_mut().zip(sums.iter_mut()) {
                    *v *= inv;
                    *c += *v;
                }
            }
            None => row.iter_mut().for_each(|v| *v *= inv),
        }
    }
    Ok(())
}

fn scale_of(head: &AttentionHead) -> f64 {
    1.0 / (head.key_dim() as f64).sqrt()
}

pub fn attention_forward(f_v: ArrayView3<f64>, head: &AttentionHead) -> Result<AttentionCache> {
    let (n, t, d) = f_v.dim();
    check_width(d, head)?;
    let (queries, keys) = project(f_v, head);
    let scale = scale_of(head);
    let mut importance = Array2::<f64>::zeros((n, t));
    let mut maps = (n * t * t <= MAP_CACHE_LIMIT).then(|| Array3::<f64>::zeros((n, t, t)));
    let mut buf = Array2::<f64>::zeros(if maps.is_some() { (0, 0) } else { (t, t) });
    for i in 0..n {
        let out = match maps.as_mut() {
            Some(m) => m.index_axis_mut(Axis(0), i),
            None => buf.view_mut(),
        };
        let mut imp = importance.row_mut(i);
        softmax_rows(
            queries.index_axis(Axis(0), i),
            keys.index_axis(Axis(0), i),
            scale,
            out,
            Some(imp.as_slice_mut().expect("standard layout")),
            i,
        )?;
        imp.mapv_inplace(|v| v / t as f64);
    }
    Ok(AttentionCache {
        queries,
        keys,
        importance,
        maps,
    })
}

/// `Softmax(Q Kᵀ / √d_k)` per sample, `N × T × T`.
pub fn attention_map(f_v: ArrayView3<f64>, head: &AttentionHead) -> Result<Array3<f64>> {
    let (n, t, d) = f_v.dim();
    check_width(d, head)?;
    let (queries, keys) = project(f_v, head);
    let scale = scale_of(head);
    let mut attn = Array3::<f64>::zeros((n, t, t));
    for i in 0..n {
        softmax_rows(
            queries.index_axis(Axis(0), i),
            keys.index_axis(Axis(0), i),
            scale,
            attn.index_axis_mut(Axis(0), i),
            None,
            i,
        )?;
    }
    Ok(attn)
}

/// Column mean of each attention matrix: the attention timestamp `t` receives.
pub fn timestamp_importance(attn: &Array3<f64>) -> Array2<f64> {
    attn.mean_axis(Axis(1)).expect("T >= 1")
}

/// Backpropagate `dL/d importance` into the head and the view representation.
pub fn attention_backward(
    f_v: ArrayView3<f64>,
    head: &AttentionHead,
    cache: &AttentionCache,
    d_importance: ArrayView2<f64>,
    grad: &mut AttentionHead,
) -> Array3<f64> {
    let (n, t, _) = f_v.dim();
    let scale = scale_of(head);
    let mut d_q = Array3::<f64>::zeros(cache.queries.raw_dim());
    let mut d_k = Array3::<f64>::zeros(cache.keys.raw_dim());
    let mut buf = Array2::<f64>::zeros(if cache.maps.is_some() { (0, 0) } else { (t, t) });
    let mut d_logits = Array2::<f64>::zeros((t, t));
    let inv_t = 1.0 / t as f64;
    for i in 0..n {
        let a = match &cache.maps {
            Some(m) => m.index_axis(Axis(0), i),
            None => {
                softmax_rows(
                    cache.queries.index_axis(Axis(0), i),
                    cache.keys.index_axis(Axis(0), i),
                    scale,
                    buf.view_mut(),
                    None,
                    i,
                )
                .expect("logits were finite in the forward pass");
                buf.view()
            }
        };
        // d attn[s, u] = d_imp[u] / T for every row s.
        let g: Vec<f64> = d_importance.row(i).iter().map(|v| v * inv_t).collect();
        let a_flat = a.to_slice().expect("standard layout");
        let out_flat = d_logits.as_slice_mut().expect("standard layout");
        for (row, out) in a_flat.chunks_exact(t).zip(out_flat.chunks_exact_mut(t)) {
            let dot: f64 = row.iter().zip(&g).map(|(p, g)| p * g).sum();
            for ((o, &p), &gu) in out.iter_mut().zip(row).zip(&g) {
                *o = p * (gu - dot) * scale;
            }
        }
        let q = cache.queries.index_axis(Axis(0), i);
        let k = cache.keys.index_axis(Axis(0), i);
        general_mat_mul(1.0, &d_logits, &k, 0.0, &mut d_q.index_axis_mut(Axis(0), i));
        general_mat_mul(1.0, &d_logits.t(), &q, 0.0, &mut d_k.index_axis_mut(Axis(0), i));
    }
    let owned = f_v.as_standard_layout();
    let flat = owned.view().into_shape_with_order((n * t, f_v.dim().2)).expect("standard layout");
    grad.query += &flat.t().dot(&flat3(&d_q));
    grad.key += &flat.t().dot(&flat3(&d_k));
    let d_f = flat3(&d_q).dot(&head.query.t()) + flat3(&d_k).dot(&head.key.t());
    unflat3(d_f, n, t)
}

/// Number of timestamps kept: `max(1, ceil(keep_ratio · T))`.
///
/// A tolerance of 1e-9 absorbs products such as `0.7 · 10 = 7.000000000000001`.
pub fn keep_count(length: usize, keep_ratio: f64) -> usize {
    (((keep_ratio * length as f64) - 1e-9).ceil().max(1.0) as usize).min(length.max(1))
}

/// Hard mask and thresholds for one view.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewMask {
    /// `N × T`, entries in `{0, 1}`.
    pub mask: Array2<u8>,
    /// Importance of the least important kept timestamp, per sample.
    pub thresholds: Array1<f64>,
}

/// Indices of the `k` largest values; ties keep the earlier index.
pub fn top_k_indices(scores: ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Keep the `k` most important timestamps of every sample.
pub fn threshold_mask(importance: ArrayView2<f64>, keep_ratio: f64) -> ViewMask {
    let (n, t) = importance.dim();
    let k = keep_count(t, keep_ratio);
    let mut mask = Array2::<u8>::zeros((n, t));
    let mut thresholds = Array1::<f64>::zeros(n);
    for i in 0..n {
        let row = importance.row(i);
        let kept = top_k_indices(row, k);
        thresholds[i] = kept.iter().map(|&s| row[s]).fold(f64::INFINITY, f64::min);
        for s in kept {
            mask[[i, s]] = 1;
        }
    }
    ViewMask { mask, thresholds }
}

/// `X̃(t, :) = X(t, :) · m(t)`; `mask` may be binary or soft.
pub fn apply_mask(x: ArrayView3<f64>, mask: ArrayView2<f64>) -> Result<Array3<f64>> {
    let (n, t, _) = x.dim();
    if mask.dim() != (n, t) {
        return Err(shape_err(format!("mask {:?} does not cover input ({n}, {t})", mask.dim())));
    }
    let mut out = x.to_owned();
    for ((i, step, _), v) in out.indexed_iter_mut() {
        *v *= mask[[i, step]];
    }
    Ok(out)
}

/// `sigmoid(sharpness · (importance − threshold))`, the straight-through surrogate.
pub fn soft_mask_for_backward(
    importance: ArrayView2<f64>,
    thresholds: ArrayView1<f64>,
    sharpness: f64,
) -> Array2<f64> {
    let mut out = importance.to_owned();
    for (mut row, &thr) in out.rows_mut().into_iter().zip(thresholds.iter()) {
        row.mapv_inplace(|s| sigmoid(sharpness * (s - thr)));
    }
    out
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// All masks of one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    pub importance: Vec<Array2<f64>>,
    pub masks: Vec<Array2<u8>>,
    pub keep_ratio: f64,
    pub thresholds: Vec<Array1<f64>>,
}

impl MaskSet {
    /// Fraction of mask entries that differ from `previous`.
    pub fn change_rate(&self, previous: &MaskSet) -> f64 {
        let mut changed = 0usize;
        let mut total = 0usize;
        for (a, b) in self.masks.iter().zip(&previous.masks) {
            changed += a.iter().zip(b.iter()).filter(|(x, y)| x != y).count();
            total += a.len();
        }
        if total == 0 {
            0.0
        } else {
            changed as f64 / total as f64
        }
    }
}

pub fn mask_to_f64(mask: &Array2<u8>) -> Array2<f64> {
    mask.mapv(f64::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_representations_give_uniform_rows() {
        let f = Array3::from_elem((2, 5, 3), 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = AttentionHead::init(3, 2, &mut rng);
        let attn = attention_map(f.view(), &head).unwrap();
        assert!(attn.iter().all(|&a| (a - 0.2).abs() < 1e-12));
        let single = attention_map(Array3::from_elem((1, 1, 3), 2.0).view(), &head).unwrap();
        assert_eq!(single[[0, 0, 0]], 1.0);
    }

    #[test]
    fn matches_scalar_softmax_oracle() {
        let f = array![[[0.5, -1.0], [1.5, 0.25], [-0.75, 2.0]]];
        let head = AttentionHead {
            query: array![[0.3, -0.2], [0.8, 0.5]],
            key: array![[-0.4, 0.9], [0.1, 0.6]],
        };
        let attn = attention_map(f.view(), &head).unwrap();
        for s in 0..3 {
            let q: Vec<f64> = (0..2)
                .map(|o| (0..2).map(|c| f[[0, s, c]] * head.query[[c, o]]).sum())
                .collect();
            let logits: Vec<f64> = (0..3)
                .map(|u| {
                    let k: Vec<f64> = (0..2)
                        .map(|o| (0..2).map(|c| f[[0, u, c]] * head.key[[c, o]]).sum())
                        .collect();
                    (q[0] * k[0] + q[1] * k[1]) / 2f64.sqrt()
                })
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for u in 0..3 {
                assert!((attn[[0, s, u]] - logits[u].exp() / z).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cached_importance_matches_full_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = Array3::from_shape_simple_fn((3, 7, 4), || rng.random_range(-2.0..2.0));
        let head = AttentionHead::init(4, 3, &mut rng);
        let cache = attention_forward(f.view(), &head).unwrap();
        let full = timestamp_importance(&attention_map(f.view(), &head).unwrap());
        for (a, b) in cache.importance.iter().zip(full.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_logits_report_sample() {
        let mut f = Array3::zeros((2, 2, 1));
        f[[1, 0, 0]] = f64::NAN;
        let head = AttentionHead {
            query: array![[1.0]],
            key: array![[1.0]],
        };
        let err = attention_map(f.view(), &head).unwrap_err();
        assert!(err.to_string().contains("sample 1"), "{err}");
    }

    #[test]
    fn importance_examples() {
        let uniform = Array3::from_elem((1, 4, 4), 0.25);
        assert!(timestamp_importance(&uniform).iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let mut delta = Array3::zeros((1, 3, 3));
        for s in 0..3 {
            delta[[0, s, 0]] = 1.0;
        }
        assert_eq!(timestamp_importance(&delta), array![[1.0, 0.0, 0.0]]);

        let m = array![[[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.1, 0.1, 0.8]]];
        let imp = timestamp_importance(&m);
        for u in 0..3 {
            let col = (m[[0, 0, u]] + m[[0, 1, u]] + m[[0, 2, u]]) / 3.0;
            assert!((imp[[0, u]] - col).abs() < 1e-9);
        }
        assert!((imp.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let imp = array![[0.4, 0.1, 0.3, 0.2]];
        let m = threshold_mask(imp.view(), 0.5);
        assert_eq!(m.mask, array![[1, 0, 1, 0]]);
        assert_eq!(m.thresholds[0], 0.3);
        assert_eq!(threshold_mask(imp.view(), 1.0).mask, array![[1, 1, 1, 1]]);
        let ties = array![[0.25, 0.25, 0.25, 0.25]];
        assert_eq!(threshold_mask(ties.view(), 0.5).mask, array![[1, 1, 0, 0]]);
        assert_eq!(keep_count(10, 0.7), 7);
        assert_eq!(keep_count(10, 0.01), 1);
        assert_eq!(keep_count(3, 0.5), 2);
    }

    #[test]
    fn apply_mask_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array3::from_shape_simple_fn((2, 4, 3), || rng.random_range(-1.0..1.0));
        assert_eq!(apply_mask(x.view(), Array2::ones((2, 4)).view()).unwrap(), x);
        let mut one = Array2::zeros((2, 4));
        one[[0, 2]] = 1.0;
        one[[1, 2]] = 1.0;
        let out = apply_mask(x.view(), one.view()).unwrap();
        for ((i, t, c), v) in out.indexed_iter() {
            let expect = if t == 2 { x[[i, t, c]] } else { 0.0 };
            assert_eq!(*v, expect);
        }
        let bits = Array2::from_shape_simple_fn((2, 4), || f64::from(rng.random_range(0..2u8)));
        let out = apply_mask(x.view(), bits.view()).unwrap();
        for i in 0..2 {
            for t in 0..4 {
                for c in 0..3 {
                    assert_eq!(out[[i, t, c]], x[[i, t, c]] * bits[[i, t]]);
                }
            }
        }
        assert!(apply_mask(x.view(), Array2::ones((2, 3)).view()).is_err());
    }

    #[test]
    fn soft_mask_examples() {
        let imp = array![[0.5, 0.6, 0.9]];
        let soft = soft_mask_for_backward(imp.view(), array![0.5].view(), 10.0);
        assert_eq!(soft[[0, 0]], 0.5);
        assert!((soft[[0, 1]] - 0.731_058_6).abs() < 1e-4);
        let sharp = soft_mask_for_backward(imp.view(), array![0.5].view(), 1e4);
        assert!(sharp[[0, 2]] > 1.0 - 1e-12);
    }

    #[test]
    fn attention_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = Array3::from_shape_simple_fn((2, 4, 3), || rng.random_range(-1.0..1.0));
        let head = AttentionHead::init(3, 2, &mut rng);
        let weights = Array2::from_shape_simple_fn((2, 4), || rng.random_range(-1.0..1.0));
        let objective = |f: &Array3<f64>, h: &AttentionHead| -> f64 {
            let imp = timestamp_importance(&attention_map(f.view(), h).unwrap());
            (&imp * &weights).sum()
        };
        let cache = attention_forward(f.view(), &head).unwrap();
        let mut grad = head.zeros_like();
        let d_f = attention_backward(f.view(), &head, &cache, weights.view(), &mut grad);
        let mut uncached = cache.clone();
        uncached.maps = None;
        let mut grad2 = head.zeros_like();
        assert_eq!(d_f, attention_backward(f.view(), &head, &uncached, weights.view(), &mut grad2));
        assert_eq!(grad, grad2);
        let eps = 1e-6;
        for idx in [(0, 0), (1, 1), (2, 0)] {
            let mut plus = head.clone();
            plus.query[idx] += eps;
            let mut minus = head.clone();
            minus.query[idx] -= eps;
            let fd = (objective(&f, &plus) - objective(&f, &minus)) / (2.0 * eps);
            assert!((fd - grad.query[idx]).abs() < 1e-8, "{fd} vs {}", grad.query[idx]);
            let mut plus = head.clone();
            plus.key[idx] += eps;
            let mut minus = head.clone();
            minus.key[idx] -= eps;
            let fd = (objective(&f, &plus) - objective(&f, &minus)) / (2.0 * eps);
            assert!((fd - grad.key[idx]).abs() < 1e-8);
        }
        for idx in [(0, 0, 0), (1, 3, 2), (0, 2, 1)] {
            let mut plus = f.clone();
            plus[idx] += eps;
            let mut minus = f.clone();
            minus[idx] -= eps;
            let fd = (objective(&plus, &head) - objective(&minus, &head)) / (2.0 * eps);
            assert!((fd - d_f[idx]).abs() < 1e-8);
        }
    }
}
