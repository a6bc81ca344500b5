mod common;

use emtc::cluster::{contrastive_loss, cosine_sim, kmeans, sample_positives, ContrastConfig};
use emtc::data::{parse_ts_str, resample_length, to_ts_string, znormalize};
use emtc::encoder::fuse_views;
use emtc::mask::{attention_forward, keep_count, threshold_mask, AttentionHead};
use emtc::metrics::{ari, evaluate, nmi};
use emtc::static_masks::{static_mask, StaticKind, StaticMaskPolicy};
use emtc::TimeSeriesDataset;
use ndarray::{Array2, Array3, Axis};
use proptest::prelude::*;

fn labels(n: std::ops::RangeInclusive<usize>, g: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..g, n)
}

fn label_pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..=12).prop_flat_map(|n| (labels(n..=n, 4), labels(n..=n, 4)))
}

fn tensor(n: usize, t: usize, d: usize) -> impl Strategy<Value = Array3<f64>> {
    prop::collection::vec(-5.0..5.0f64, n * t * d).prop_map(move |v| Array3::from_shape_vec((n, t, d), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metrics_ignore_cluster_names((truth, pred) in label_pair(), shift in 1usize..4) {
        let renamed: Vec<usize> = pred.iter().map(|p| (p + shift) % 4 + 10).collect();
        let a = evaluate(&truth, &pred).unwrap();
        let b = evaluate(&truth, &renamed).unwrap();
        prop_assert!((a.acc - b.acc).abs() < 1e-12);
        prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        prop_assert!((a.nmi - b.nmi).abs() < 1e-12);
        prop_assert!((a.ari - b.ari).abs() < 1e-12);
    }

    #[test]
    fn metrics_stay_in_range_and_match_oracles((truth, pred) in label_pair()) {
        let r = evaluate(&truth, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.acc));
        prop_assert!((0.0..=1.0).contains(&r.f1));
        prop_assert!((0.0..=1.0).contains(&r.nmi));
        prop_assert!((-0.5..=1.0).contains(&r.ari));
        prop_assert!((r.acc - common::brute_acc(&truth, &pred)).abs() < 1e-9);
        prop_assert!((r.nmi - common::oracle_nmi(&truth, &pred)).abs() < 1e-9);
        prop_assert!((r.ari - common::oracle_ari(&truth, &pred)).abs() < 1e-9);
    }

    #[test]
    fn nmi_and_ari_are_symmetric((truth, pred) in label_pair()) {
        prop_assert!((nmi(&truth, &pred).unwrap() - nmi(&pred, &truth).unwrap()).abs() < 1e-12);
        prop_assert_eq!(ari(&truth, &pred).unwrap(), ari(&pred, &truth).unwrap());
    }

    #[test]
    fn identical_partitions_score_one(truth in labels(1..=20, 5)) {
        let r = evaluate(&truth, &truth).unwrap();
        prop_assert_eq!((r.acc, r.f1, r.ari), (1.0, 1.0, 1.0));
        prop_assert!((r.nmi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_mask_keeps_the_top_budget(
        scores in prop::collection::vec(0.0..1.0f64, 1..80),
        keep_ratio in 0.001..=1.0f64,
    ) {
        let t = scores.len();
        let imp = Array2::from_shape_vec((1, t), scores.clone()).unwrap();
        let m = threshold_mask(imp.view(), keep_ratio);
        let k = keep_count(t, keep_ratio);
        prop_assert_eq!(k, ((keep_ratio * t as f64 - 1e-9).ceil() as usize).clamp(1, t));
        prop_assert_eq!(m.mask.iter().filter(|&&b| b == 1).count(), k);
        let kept_min = (0..t).filter(|&s| m.mask[[0, s]] == 1).map(|s| scores[s]).fold(f64::INFINITY, f64::min);
        let dropped_max = (0..t).filter(|&s| m.mask[[0, s]] == 0).map(|s| scores[s]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(kept_min >= dropped_max);
        prop_assert_eq!(m.thresholds[0], kept_min);
    }

    #[test]
    fn raising_a_kept_score_keeps_it(
        scores in prop::collection::vec(0.0..1.0f64, 2..40),
        keep_ratio in 0.05..=1.0f64,
        bump in 0.0..2.0f64,
    ) {
        let t = scores.len();
        let before = threshold_mask(Array2::from_shape_vec((1, t), scores.clone()).unwrap().view(), keep_ratio);
        if let Some(s) = (0..t).find(|&s| before.mask[[0, s]] == 1) {
            let mut raised = scores.clone();
            raised[s] += bump;
            let after = threshold_mask(Array2::from_shape_vec((1, t), raised).unwrap().view(), keep_ratio);
            prop_assert_eq!(after.mask[[0, s]], 1);
        }
    }

    #[test]
    fn static_policies_respect_the_budget(
        x in (1usize..4, 2usize..30, 1usize..4).prop_flat_map(|(n, t, d)| tensor(n, t, d)),
        keep_ratio in 0.01..=1.0f64,
        seed in any::<u64>(),
    ) {
        let (n, t, _) = x.dim();
        let k = keep_count(t, keep_ratio);
        for kind in StaticKind::ALL {
            let mask = static_mask(x.view(), &StaticMaskPolicy { kind, keep_ratio, seed });
            prop_assert_eq!(mask.dim(), (n, t));
            for row in mask.rows() {
                prop_assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), k);
                prop_assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
    }

    #[test]
    fn attention_rows_and_importance_sum_to_one(
        f in (1usize..3, 1usize..20).prop_flat_map(|(n, t)| tensor(n, t, 3)),
        wq in prop::collection::vec(-2.0..2.0f64, 6),
        wk in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let head = AttentionHead {
            query: Array2::from_shape_vec((3, 2), wq).unwrap(),
            key: Array2::from_shape_vec((3, 2), wk).unwrap(),
        };
        let cache = attention_forward(f.view(), &head).unwrap();
        for row in cache.importance.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        }
        for row in cache.maps.as_ref().unwrap().lanes(Axis(2)) {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn znormalized_channels_are_standard(x in (1usize..4, 2usize..30, 1usize..4).prop_flat_map(|(n, t, d)| tensor(n, t, d))) {
        let ds = znormalize(&TimeSeriesDataset::new("p", x, None).unwrap());
        for channel in ds.samples.lanes(Axis(1)) {
            let t = channel.len() as f64;
            let mean = channel.sum() / t;
            let var = channel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9 || channel.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ts_text_round_trips(
        x in (1usize..4, 1usize..12, 1usize..4).prop_flat_map(|(n, t, d)| tensor(n, t, d)),
        seed in any::<u64>(),
    ) {
        let n = x.dim().0;
        let labels: Vec<usize> = (0..n).map(|i| ((seed >> i) & 1) as usize).collect();
        let ds = TimeSeriesDataset::new("RoundTrip", x, Some(labels)).unwrap();
        let back = parse_ts_str(&to_ts_string(&ds), "memory", "RoundTrip").unwrap();
        prop_assert_eq!(back.samples, ds.samples);
        prop_assert_eq!(back.labels, ds.labels);
    }

    #[test]
    fn resampling_preserves_the_mean(x in (1usize..3, 1usize..9, 1usize..3).prop_flat_map(|(n, k, d)| tensor(n, 4 * k, d))) {
        let t = x.dim().1;
        let ds = TimeSeriesDataset::new("p", x, None).unwrap();
        let short = resample_length(&ds, t / 4).unwrap();
        prop_assert_eq!(short.length(), t / 4);
        let a = ds.samples.mean_axis(Axis(1)).unwrap();
        let b = short.samples.mean_axis(Axis(1)).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn fusion_is_the_grand_mean(views in (1usize..4).prop_flat_map(|v| prop::collection::vec(tensor(2, 5, 3), v))) {
        let fused = fuse_views(&views).unwrap();
        for i in 0..2 {
            for c in 0..3 {
                let mut s = 0.0;
                for v in &views {
                    for step in 0..5 {
                        s += v[[i, step, c]];
                    }
                }
                prop_assert!((fused[[i, c]] - s / (5.0 * views.len() as f64)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kmeans_labels_are_valid_and_deterministic(
        pts in prop::collection::vec(-10.0..10.0f64, 16..60),
        g in 1usize..4,
        seed in any::<u64>(),
    ) {
        let n = pts.len() / 2;
        let x = Array2::from_shape_vec((n, 2), pts[..2 * n].to_vec()).unwrap();
        let a = kmeans(x.view(), g, seed).unwrap();
        let b = kmeans(x.view(), g, seed).unwrap();
        prop_assert_eq!(&a.labels, &b.labels);
        prop_assert_eq!(a.labels.len(), n);
        prop_assert!(a.labels.iter().all(|&l| l < g));
        prop_assert!(a.inertia >= 0.0);
    }

    #[test]
    fn positives_share_the_anchor_cluster(l in labels(2..=30, 4), seed in any::<u64>()) {
        for (i, p) in sample_positives(&l, seed).into_iter().enumerate() {
            let mates = l.iter().filter(|&&x| x == l[i]).count();
            match p {
                Some(j) => prop_assert!(j != i && l[j] == l[i]),
                None => prop_assert_eq!(mates, 1),
            }
        }
    }

    #[test]
    fn contrastive_loss_is_finite_and_nonnegative(
        f in prop::collection::vec(-3.0..3.0f64, 8..40),
        l in labels(4..=20, 3),
        seed in any::<u64>(),
    ) {
        let n = l.len().min(f.len() / 2);
        let x = Array2::from_shape_vec((n, 2), f[..2 * n].to_vec()).unwrap();
        let out = contrastive_loss(x.view(), &l[..n], &ContrastConfig { temperature: 0.5, positive_sampling_seed: seed }).unwrap();
        prop_assert!(out.loss.is_finite() && out.loss >= -1e-12);
    }

    #[test]
    fn cosine_is_bounded(a in prop::collection::vec(-5.0..5.0f64, 3), b in prop::collection::vec(-5.0..5.0f64, 3)) {
        let s = cosine_sim(ndarray::aview1(&a), ndarray::aview1(&b));
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
    }
}
