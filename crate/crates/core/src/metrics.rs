//! Classification metrics.

use alloc::vec::Vec;

/// Rank-based ROC AUC (Mann-Whitney U with averaged tie ranks). `None` when
/// either class is absent.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; a tie group shares the mean rank
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += mean_rank;
            }
        }
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn accuracy(predicted: &[bool], labels: &[bool]) -> f64 {
    assert_eq!(predicted.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len() as f64
}

/// F1 of the positive class; 0 when there are no true positives.
pub fn f1(predicted: &[bool], labels: &[bool]) -> f64 {
    assert_eq!(predicted.len(), labels.len());
    let tp = predicted
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| p && l)
        .count() as f64;
    let fp = predicted
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| p && !l)
        .count() as f64;
    let fneg = predicted
        .iter()
        .zip(labels)
        .filter(|(&p, &l)| !p && l)
        .count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fneg)
}
