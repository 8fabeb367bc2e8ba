//! Ranking and classification metrics. Metrics that need both classes
//! return `None` when one is absent.

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::domain("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    Ok((pos, labels.len() - pos))
}

/// Area under the ROC curve from the rank statistic; tied scores share
/// their average rank, so a tie counts as half a concordant pair.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid = (i + j + 2) as f64 / 2.0;
        let hits = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += mid * hits as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok(Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n)))
}

/// Average precision: `Σ_k (R_k - R_{k-1})·P_k` over the distinct score
/// thresholds taken in decreasing order, without interpolation.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(Some(area))
}

/// Unweighted mean of per-class F1 over the classes that occur in either
/// `preds` or `labels`. `None` only for empty input.
pub fn macro_f1(preds: &[bool], labels: &[bool]) -> Result<Option<f64>> {
    if preds.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    let mut classes = 0;
    for class in [false, true] {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (&p, &y) in preds.iter().zip(labels) {
            match (p == class, y == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        if tp + fp + fneg > 0 {
            total += 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64;
            classes += 1;
        }
    }
    Ok((classes > 0).then(|| total / classes as f64))
}

/// Predictions at the 0.5 probability threshold.
pub fn threshold(probs: &[f64]) -> Vec<bool> {
    probs.iter().map(|&p| p >= 0.5).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        let s = [0.9, 0.1, 0.8, 0.3];
        let y = [true, false, true, false];
        assert_eq!(auroc(&s, &y).unwrap(), Some(1.0));
        assert_eq!(auprc(&s, &y).unwrap(), Some(1.0));
        assert_eq!(macro_f1(&threshold(&s), &y).unwrap(), Some(1.0));
        assert_eq!(auroc(&[0.9, 0.1], &[true, false]).unwrap(), Some(1.0));
    }

    #[test]
    fn constant_scores() {
        let y = [true, false, false, true, false];
        assert_eq!(auroc(&[0.3; 5], &y).unwrap(), Some(0.5));
        // One threshold: recall 1 at precision 2/5.
        assert_eq!(auprc(&[0.3; 5], &y).unwrap(), Some(0.4));
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(auroc(&[0.1, 0.2], &[true, true]).unwrap(), None);
        assert_eq!(auprc(&[0.1, 0.2], &[false, false]).unwrap(), None);
        assert_eq!(macro_f1(&[false, false], &[false, false]).unwrap(), Some(1.0));
        assert_eq!(macro_f1(&[], &[]).unwrap(), None);
    }

    #[test]
    fn all_negative_predictions() {
        let y = [true, true, false, false];
        let f1 = macro_f1(&[false; 4], &y).unwrap().unwrap();
        assert!((f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hand_computed_precision() {
        // Order: + - + -, AP = 1/2·1 + 1/2·2/3.
        let ap = auprc(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false])
            .unwrap()
            .unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(auroc(&[0.1], &[true, false]).is_err());
        assert!(auroc(&[f64::NAN, 0.2], &[true, false]).is_err());
        assert!(macro_f1(&[true], &[]).is_err());
    }
}
