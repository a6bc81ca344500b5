//! Reference implementations used as oracles by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

fn distinct(labels: &[usize]) -> Vec<usize> {
    labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Every injective partial map from predicted clusters to classes.
fn matchings(clusters: usize, classes: usize) -> Vec<Vec<Option<usize>>> {
    fn go(i: usize, clusters: usize, classes: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == clusters {
            out.push(cur.clone());
            return;
        }
        cur.push(None);
        go(i + 1, clusters, classes, used, cur, out);
        cur.pop();
        for c in 0..classes {
            if !used[c] {
                used[c] = true;
                cur.push(Some(c));
                go(i + 1, clusters, classes, used, cur, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, clusters, classes, &mut vec![false; classes], &mut Vec::new(), &mut out);
    out
}

fn hits(truth: &[usize], pred: &[usize], pv: &[usize], tv: &[usize], m: &[Option<usize>]) -> usize {
    truth
        .iter()
        .zip(pred)
        .filter(|(t, p)| {
            let a = pv.iter().position(|v| v == *p).unwrap();
            m[a].map(|c| tv[c]) == Some(**t)
        })
        .count()
}

/// Best accuracy over all matchings, by exhaustive search.
pub fn brute_acc(truth: &[usize], pred: &[usize]) -> f64 {
    let (tv, pv) = (distinct(truth), distinct(pred));
    let best = matchings(pv.len(), tv.len())
        .iter()
        .map(|m| hits(truth, pred, &pv, &tv, m))
        .max()
        .unwrap();
    best as f64 / truth.len() as f64
}

/// Macro-F1 for every accuracy-optimal matching. Classes are the true classes
/// plus one extra per unmatched cluster.
pub fn brute_f1_candidates(truth: &[usize], pred: &[usize]) -> Vec<f64> {
    let (tv, pv) = (distinct(truth), distinct(pred));
    let all = matchings(pv.len(), tv.len());
    let best = all.iter().map(|m| hits(truth, pred, &pv, &tv, m)).max().unwrap();
    all.iter()
        .filter(|m| hits(truth, pred, &pv, &tv, m) == best)
        .map(|m| {
            let mut sum = 0.0;
            for (c, &class) in tv.iter().enumerate() {
                let Some(a) = m.iter().position(|x| *x == Some(c)) else { continue };
                let tp = truth.iter().zip(pred).filter(|(t, p)| **t == class && **p == pv[a]).count() as f64;
                let predicted = pred.iter().filter(|p| **p == pv[a]).count() as f64;
                let actual = truth.iter().filter(|t| **t == class).count() as f64;
                let (precision, recall) = (tp / predicted, tp / actual);
                if precision + recall > 0.0 {
                    sum += 2.0 * precision * recall / (precision + recall);
                }
            }
            let extra = m.iter().filter(|x| x.is_none()).count();
            sum / (tv.len() + extra) as f64
        })
        .collect()
}

fn entropy_of(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// NMI through `I = H(T) + H(P) − H(T, P)`.
pub fn oracle_nmi(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len() as f64;
    let (tv, pv) = (distinct(truth), distinct(pred));
    let ht = entropy_of(tv.iter().map(|c| truth.iter().filter(|t| *t == c).count()), n);
    let hp = entropy_of(pv.iter().map(|c| pred.iter().filter(|p| *p == c).count()), n);
    if ht == 0.0 && hp == 0.0 {
        return 1.0;
    }
    let joint = entropy_of(
        tv.iter()
            .flat_map(|a| pv.iter().map(move |b| (a, b)))
            .map(|(a, b)| truth.iter().zip(pred).filter(|(t, p)| *t == a && *p == b).count()),
        n,
    );
    ((ht + hp - joint) / ((ht + hp) / 2.0)).clamp(0.0, 1.0)
}

fn comb2(k: usize) -> f64 {
    (k * k.saturating_sub(1)) as f64 / 2.0
}

/// ARI from the classic `comb(n, 2)` expression.
pub fn oracle_ari(truth: &[usize], pred: &[usize]) -> f64 {
    let n = truth.len();
    let (tv, pv) = (distinct(truth), distinct(pred));
    let index: f64 = tv
        .iter()
        .flat_map(|a| pv.iter().map(move |b| (a, b)))
        .map(|(a, b)| comb2(truth.iter().zip(pred).filter(|(t, p)| *t == a && *p == b).count()))
        .sum();
    let sa: f64 = tv.iter().map(|a| comb2(truth.iter().filter(|t| *t == a).count())).sum();
    let sb: f64 = pv.iter().map(|b| comb2(pred.iter().filter(|p| *p == b).count())).sum();
    if comb2(n) == 0.0 {
        return 1.0;
    }
    let expected = sa * sb / comb2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Row-softmax of `F Wq (F Wk)ᵀ / √dk` with explicit loops.
pub fn loop_attention(f: &[Vec<f64>], wq: &[Vec<f64>], wk: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dk = wq[0].len();
    let proj = |w: &[Vec<f64>]| -> Vec<Vec<f64>> {
        f.iter()
            .map(|row| (0..dk).map(|j| row.iter().zip(w).map(|(x, wr)| x * wr[j]).sum()).collect())
            .collect()
    };
    let (q, k) = (proj(wq), proj(wk));
    q.iter()
        .map(|qi| {
            let logits: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (dk as f64).sqrt())
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            e.iter().map(|v| v / z).collect()
        })
        .collect()
}
