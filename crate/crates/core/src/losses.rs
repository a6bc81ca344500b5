//! Intra-view reconstruction and inter-view consistency losses.
//!
//! Both are squared Frobenius norms divided by `N`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array3, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{flat3, Linear};
use crate::error::{shape_err, Result};

/// Per-view decoders `R^(v)`: per-timestamp linear maps `d → D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub views: Vec<Linear>,
}

impl DecoderParams {
    pub fn init<R: Rng>(n_views: usize, embed_dim: usize, variates: usize, rng: &mut R) -> Self {
        Self {
            views: (0..n_views).map(|_| Linear::init(embed_dim, variates, rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            views: self
                .views
                .iter()
                .map(|l| Linear::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }
}

/// `T_{i→j}` for every ordered pair of distinct views, stored row-major
/// over `(i, j)` with the diagonal skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossViewTransforms {
    pub n_views: usize,
    pub maps: Vec<Linear>,
}

impl CrossViewTransforms {
    pub fn init<R: Rng>(n_views: usize, embed_dim: usize, rng: &mut R) -> Self {
        let count = n_views * n_views.saturating_sub(1);
        Self {
            n_views,
            maps: (0..count).map(|_| Linear::init(embed_dim, embed_dim, rng)).collect(),
        }
    }

    pub fn identity(n_views: usize, embed_dim: usize) -> Self {
        let count = n_views * n_views.saturating_sub(1);
        Self {
            n_views,
            maps: (0..count).map(|_| Linear::identity(embed_dim)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            n_views: self.n_views,
            maps: self
                .maps
                .iter()
                .map(|l| Linear::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn index(&self, from: usize, to: usize) -> usize {
        assert!(from != to && from < self.n_views && to < self.n_views);
        from * (self.n_views - 1) + if to > from { to - 1 } else { to }
    }

    pub fn get(&self, from: usize, to: usize) -> &Linear {
        &self.maps[self.index(from, to)]
    }

    /// Ordered pairs in the summation order `(i, j), (j, i)` for `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_views {
            for j in i + 1..self.n_views {
                out.push((i, j));
                out.push((j, i));
            }
        }
        out
    }
}

fn check_views(x: ArrayView3<f64>, views: &[Array3<f64>], decoders: &DecoderParams) -> Result<()> {
    if views.len() != decoders.views.len() {
        return Err(shape_err(format!("{} views but {} decoders", views.len(), decoders.views.len())));
    }
    let (n, t, d) = x.dim();
    for (v, (f, dec)) in views.iter().zip(&decoders.views).enumerate() {
        let (fn_, ft, fd) = f.dim();
        if (fn_, ft) != (n, t) || fd != dec.input_dim() || dec.output_dim() != d {
            return Err(shape_err(format!("view {v} is incompatible with its decoder or the input")));
        }
    }
    Ok(())
}

fn flat3_view<'a>(a: &'a ndarray::CowArray<'_, f64, ndarray::Ix3>) -> ndarray::ArrayView2<'a, f64> {
    let (n, t, d) = a.dim();
    a.view().into_shape_with_order((n * t, d)).expect("standard layout")
}

fn squared_distance(a: ndarray::ArrayView2<f64>, b: ndarray::ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `Σ_v ‖X − R^(v)(F^(v))‖²_F / N`.
pub fn intra_loss(x: ArrayView3<f64>, views: &[Array3<f64>], decoders: &DecoderParams) -> Result<f64> {
    check_views(x, views, decoders)?;
    let n = x.dim().0 as f64;
    let owned = x.as_standard_layout();
    let target = flat3_view(&owned);
    let mut total = 0.0;
    for (f, dec) in views.iter().zip(&decoders.views) {
        let recon = dec.forward(flat3(f));
        total += squared_distance(target, recon.view());
    }
    Ok(total / n)
}

/// Value of [`intra_loss`]; accumulates `weight · ∂L/∂θ` into `grad` and
/// `weight · ∂L/∂F^(v)` into `d_views`.
pub fn intra_loss_backward(
    x: ArrayView3<f64>,
    views: &[Array3<f64>],
    decoders: &DecoderParams,
    weight: f64,
    grad: &mut DecoderParams,
    d_views: &mut [Array3<f64>],
) -> Result<f64> {
    check_views(x, views, decoders)?;
    let (n, t, _) = x.dim();
    let owned = x.as_standard_layout();
    let target = flat3_view(&owned);
    let scale = 2.0 * weight / n as f64;
    let mut total = 0.0;
    for (v, (f, dec)) in views.iter().zip(&decoders.views).enumerate() {
        let src = flat3(f);
        let g = &mut grad.views[v];
        let d = src.ncols();
        for start in (0..n * t).step_by(ROW_BLOCK) {
            let rows = s![start..(start + ROW_BLOCK).min(n * t), ..];
            let x_blk = src.slice(rows);
            // The residual is kept as recon − target, the negative of the loss residual.
            let mut resid = dec.forward(x_blk);
            resid -= &target.slice(rows);
            total += resid.iter().map(|r| r * r).sum::<f64>();
            resid *= scale;
            general_mat_mul(1.0, &x_blk.t(), &resid, 1.0, &mut g.weight);
            g.bias += &resid.sum_axis(Axis(0));
            let mut d_f = d_views[v].view_mut().into_shape_with_order((n * t, d)).expect("standard layout");
            general_mat_mul(1.0, &resid, &dec.weight.t(), 1.0, &mut d_f.slice_mut(rows));
        }
    }
    Ok(total / n as f64)
}

fn check_transforms(views: &[Array3<f64>], transforms: &CrossViewTransforms) -> Result<()> {
    if views.len() > 1 && transforms.n_views != views.len() {
        return Err(shape_err(format!(
            "{} views but transforms built for {}",
            views.len(),
            transforms.n_views
        )));
    }
    if views.iter().any(|v| v.dim() != views[0].dim()) {
        return Err(shape_err("views must share one shape"));
    }
    Ok(())
}

/// Rows of the flattened `(N·T) × d` views processed together; small enough
/// that one block of every temporary stays in cache.
const ROW_BLOCK: usize = 256;

/// `Σ_{i<j} (‖F^(j) − T_{i→j}(F^(i))‖² + ‖F^(i) − T_{j→i}(F^(j))‖²) / N`.
pub fn inter_loss(views: &[Array3<f64>], transforms: &CrossViewTransforms) -> Result<f64> {
    if views.len() < 2 {
        return Ok(0.0);
    }
    check_transforms(views, transforms)?;
    let n = views[0].dim().0 as f64;
    let mut total = 0.0;
    for (from, to) in transforms.pairs() {
        let map = transforms.get(from, to);
        let (src, dst) = (flat3(&views[from]), flat3(&views[to]));
        for start in (0..src.nrows()).step_by(ROW_BLOCK) {
            let rows = s![start..(start + ROW_BLOCK).min(src.nrows()), ..];
            let mapped = map.forward(src.slice(rows));
            total += squared_distance(dst.slice(rows), mapped.view());
        }
    }
    Ok(total / n)
}

/// Value of [`inter_loss`] with weighted gradient accumulation.
pub fn inter_loss_backward(
    views: &[Array3<f64>],
    transforms: &CrossViewTransforms,
    weight: f64,
    grad: &mut CrossViewTransforms,
    d_views: &mut [Array3<f64>],
) -> Result<f64> {
    if views.len() < 2 {
        return Ok(0.0);
    }
    check_transforms(views, transforms)?;
    let (n, t, d) = views[0].dim();
    let scale = 2.0 * weight / n as f64;
    let mut total = 0.0;
    for (from, to) in transforms.pairs() {
        let idx = transforms.index(from, to);
        let map = &transforms.maps[idx];
        let g = &mut grad.maps[idx];
        let (src, dst) = (flat3(&views[from]), flat3(&views[to]));
        for start in (0..n * t).step_by(ROW_BLOCK) {
            let rows = s![start..(start + ROW_BLOCK).min(n * t), ..];
            let x = src.slice(rows);
            // mapped − target, so the gradient w.r.t. the mapped side is +scale·resid.
            let mut resid = map.forward(x);
            resid -= &dst.slice(rows);
            total += resid.iter().map(|r| r * r).sum::<f64>();
            resid *= scale;
            {
                let mut d_to = d_views[to].view_mut().into_shape_with_order((n * t, d)).expect("standard layout");
                d_to.slice_mut(rows).scaled_add(-1.0, &resid);
            }
            general_mat_mul(1.0, &x.t(), &resid, 1.0, &mut g.weight);
            g.bias += &resid.sum_axis(Axis(0));
            let mut d_from = d_views[from].view_mut().into_shape_with_order((n * t, d)).expect("standard layout");
            general_mat_mul(1.0, &resid, &map.weight.t(), 1.0, &mut d_from.slice_mut(rows));
        }
    }
    Ok(total / n as f64)
}
