//! Evaluation metrics. Values that are mathematically undefined for the
//! given input (a single class for ROC-AUC, zero variance for correlations,
//! empty input) come back as `None` rather than NaN.
//!
//! All functions panic if the two slices differ in length.

pub const DECISION_THRESHOLD: f64 = 0.5;

fn check(a: &[f64], b: &[f64]) {
    assert_eq!(a.len(), b.len(), "metric inputs must be aligned");
}

fn positive(v: f64) -> bool {
    v >= DECISION_THRESHOLD
}

/// Fraction of predictions on the correct side of the 0.5 threshold.
pub fn accuracy(scores: &[f64], labels: &[f64]) -> Option<f64> {
    check(scores, labels);
    if scores.is_empty() {
        return None;
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| positive(s) == positive(y))
        .count();
    Some(hits as f64 / scores.len() as f64)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(scores: &[f64], labels: &[f64]) -> Option<f64> {
    check(scores, labels);
    if scores.is_empty() {
        return None;
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (positive(s), positive(y)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fneg == 0 {
        0.0
    } else {
        tp as f64 / (tp + fneg) as f64
    };
    if precision + recall == 0.0 {
        Some(0.0)
    } else {
        Some(2.0 * precision * recall / (precision + recall))
    }
}

/// 1-based ranks, ties sharing the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share their mean.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Mann–Whitney estimate of ROC-AUC with average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    check(scores, labels);
    let ranks = average_ranks(scores);
    let mut n_pos = 0usize;
    let mut rank_sum = 0.0;
    for (r, &y) in ranks.iter().zip(labels) {
        if positive(y) {
            n_pos += 1;
            rank_sum += r;
        }
    }
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

pub fn rmse(preds: &[f64], labels: &[f64]) -> Option<f64> {
    check(preds, labels);
    if preds.is_empty() {
        return None;
    }
    let mse = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / preds.len() as f64;
    Some(mse.sqrt())
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    check(x, y);
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    check(x, y);
    pearson(&average_ranks(x), &average_ranks(y))
}
