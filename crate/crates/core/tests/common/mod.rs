#![allow(dead_code)]

pub mod fixtures;
pub mod fuzz;

use chrono::{Duration, NaiveDate};
use narrlab::features::{FeatureGroup, FeatureMatrix, RowKey};
use narrlab::gbm::TreeNode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Matrix with columns `f0..`, one row per day starting 2020-01-01.
pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    let p = rows.first().map_or(0, Vec::len);
    let day0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    FeatureMatrix {
        row_keys: (0..rows.len())
            .map(|i| RowKey {
                firm_id: "F".into(),
                call_date: day0 + Duration::days(i as i64),
                horizon: 1,
            })
            .collect(),
        feature_names: (0..p).map(|j| format!("f{j}")).collect(),
        groups: vec![FeatureGroup::Fundamentals; p],
        values: rows.iter().flatten().copied().collect(),
    }
}

pub fn uniform_rows(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn sse(r: &[f64], rows: &[usize]) -> f64 {
    let m = rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|&i| (r[i] - m).powi(2)).sum()
}

/// Regression tree grown by trying every feature and every midpoint between
/// distinct sorted values at every node; the first strictly best split wins.
#[allow(clippy::needless_range_loop)]
pub fn oracle_tree(
    x: &[Vec<f64>],
    r: &[f64],
    rows: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: usize,
) -> TreeNode {
    let leaf = || TreeNode::Leaf {
        value: rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64,
    };
    if depth == max_depth {
        return leaf();
    }
    let parent = sse(r, rows);
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..x[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|&i| x[i][j]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (l, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][j] < thr);
            if l.len() < min_leaf || rr.len() < min_leaf {
                continue;
            }
            let gain = parent - sse(r, &l) - sse(r, &rr);
            let better = match best {
                None => gain > 0.0,
                Some((g, _, _)) => gain > g,
            };
            if better {
                best = Some((gain, j, thr));
            }
        }
    }
    match best {
        None => leaf(),
        Some((_, j, thr)) => {
            let (l, rr): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][j] < thr);
            TreeNode::Split {
                feature_index: j,
                threshold: thr,
                missing_goes_left: l.len() >= rr.len(),
                left: Box::new(oracle_tree(x, r, &l, depth + 1, max_depth, min_leaf)),
                right: Box::new(oracle_tree(x, r, &rr, depth + 1, max_depth, min_leaf)),
            }
        }
    }
}

/// Same chosen splits and thresholds; leaf values within `tol`.
pub fn same_tree(a: &TreeNode, b: &TreeNode, tol: f64) -> bool {
    match (a, b) {
        (TreeNode::Leaf { value: x }, TreeNode::Leaf { value: y }) => (x - y).abs() <= tol,
        (
            TreeNode::Split {
                feature_index: f1,
                threshold: t1,
                missing_goes_left: m1,
                left: l1,
                right: r1,
            },
            TreeNode::Split {
                feature_index: f2,
                threshold: t2,
                missing_goes_left: m2,
                left: l2,
                right: r2,
            },
        ) => {
            f1 == f2
                && (t1 - t2).abs() <= 1e-12 * t1.abs().max(1.0)
                && m1 == m2
                && same_tree(l1, l2, tol)
                && same_tree(r1, r2, tol)
        }
        _ => false,
    }
}

/// Like [`same_tree`], but a split on a different feature or threshold also
/// counts as identical when it splits the rows of `x` into the same two sets,
/// in either orientation. Such
/// ties have equal gain in exact arithmetic and differ only by summation order.
pub fn same_partition_tree(a: &TreeNode, b: &TreeNode, x: &[Vec<f64>], rows: &[usize], tol: f64) -> bool {
    match (a, b) {
        (TreeNode::Leaf { value: p }, TreeNode::Leaf { value: q }) => (p - q).abs() <= tol,
        (
            TreeNode::Split {
                feature_index: f1,
                threshold: t1,
                left: l1,
                right: r1,
                ..
            },
            TreeNode::Split {
                feature_index: f2,
                threshold: t2,
                left: l2,
                right: r2,
                ..
            },
        ) => {
            let (la, ra): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][*f1] < *t1);
            let (lb, rb): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][*f2] < *t2);
            if la == lb {
                same_partition_tree(l1, l2, x, &la, tol) && same_partition_tree(r1, r2, x, &ra, tol)
            } else {
                la == rb && same_partition_tree(l1, r2, x, &la, tol) && same_partition_tree(r1, l2, x, &ra, tol)
            }
        }
        _ => false,
    }
}

/// Long-run variance as the full Bartlett-kernel double sum over all pairs.
pub fn bartlett_double_sum(d: &[f64], lags: usize) -> f64 {
    let n = d.len();
    let m = d.iter().sum::<f64>() / n as f64;
    let mut v = 0.0;
    for s in 0..n {
        for t in 0..n {
            let k = s.abs_diff(t);
            if k <= lags {
                v += (1.0 - k as f64 / (lags + 1) as f64) * (d[s] - m) * (d[t] - m);
            }
        }
    }
    v / n as f64
}

/// (mean differential, t statistic) computed term by term.
pub fn clark_west_oracle(y: &[f64], r: &[f64], u: &[f64], lags: usize) -> (f64, f64) {
    let mut d = Vec::new();
    for i in 0..y.len() {
        let er = y[i] - r[i];
        let eu = y[i] - u[i];
        let gap = r[i] - u[i];
        d.push(er * er - eu * eu + gap * gap);
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    (mean, mean / (bartlett_double_sum(&d, lags) / n).sqrt())
}
