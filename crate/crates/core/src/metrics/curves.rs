//! Threshold metrics with the in-distribution class as positive.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::MetricError;

fn check(in_scores: &[f64], ood_scores: &[f64]) -> Result<(), MetricError> {
    if in_scores.is_empty() {
        return Err(MetricError::Empty("in-distribution scores"));
    }
    if ood_scores.is_empty() {
        return Err(MetricError::Empty("OOD scores"));
    }
    if in_scores.iter().chain(ood_scores).any(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mann–Whitney AUROC: `P(in > ood) + P(in = ood) / 2`.
pub fn auroc(in_scores: &[f64], ood_scores: &[f64]) -> Result<f64, MetricError> {
    check(in_scores, ood_scores)?;
    let ood = sorted(ood_scores);
    // Twice the win count, so ties stay integral.
    let mut twice: u128 = 0;
    for &s in in_scores {
        let below = ood.partition_point(|&o| o < s);
        let not_above = ood.partition_point(|&o| o <= s);
        twice += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = in_scores.len() as f64 * ood_scores.len() as f64;
    Ok((twice as f64 / 2.0) / pairs)
}

/// Distinct thresholds in descending order with the positives and negatives
/// sitting exactly at each.
fn tie_groups(in_scores: &[f64], ood_scores: &[f64]) -> Vec<(f64, usize, usize)> {
    let mut all: Vec<(f64, bool)> = in_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (s, pos) in all {
        match groups.last_mut() {
            Some(g) if g.0.total_cmp(&s) == Ordering::Equal => {
                if pos {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((s, pos as usize, (!pos) as usize)),
        }
    }
    groups
}

/// Average precision; tied scores form a single threshold step.
pub fn auprc(in_scores: &[f64], ood_scores: &[f64]) -> Result<f64, MetricError> {
    check(in_scores, ood_scores)?;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut ap = 0.0;
    for (_, p, n) in tie_groups(in_scores, ood_scores) {
        tp += p;
        fp += n;
        if p > 0 {
            ap += p as f64 * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap / in_scores.len() as f64)
}

/// Smallest FPR over observed-score thresholds `t` whose TPR (fraction of
/// in-distribution scores `>= t`) reaches `target`.
pub fn fpr_at_tpr(in_scores: &[f64], ood_scores: &[f64], target: f64) -> Result<f64, MetricError> {
    check(in_scores, ood_scores)?;
    if !(0.0..=1.0).contains(&target) {
        return Err(MetricError::InvalidArgument(format!(
            "target TPR {target} outside [0, 1]"
        )));
    }
    let n = in_scores.len();
    let mut desc = in_scores.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    // Fewest in-distribution passes that satisfy the target; the highest
    // threshold achieving it is the k-th largest in-score.
    let k = (0..=n).find(|&k| k as f64 / n as f64 >= target).unwrap_or(n);
    let threshold = if k == 0 {
        desc[0].max(ood_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    } else {
        desc[k - 1]
    };
    let passed = ood_scores.iter().filter(|&&o| o >= threshold).count();
    Ok(passed as f64 / ood_scores.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() {
        return Err(MetricError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(MetricError::Empty("correlation needs at least two points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

/// ROC curve as `(fpr, tpr)` steps from `(0, 0)` to `(1, 1)`.
pub fn roc_points(in_scores: &[f64], ood_scores: &[f64]) -> Result<Vec<CurvePoint>, MetricError> {
    check(in_scores, ood_scores)?;
    let (p, n) = (in_scores.len() as f64, ood_scores.len() as f64);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut pts = vec![CurvePoint { x: 0.0, y: 0.0 }];
    for (_, dp, dn) in tie_groups(in_scores, ood_scores) {
        tp += dp;
        fp += dn;
        pts.push(CurvePoint {
            x: fp as f64 / n,
            y: tp as f64 / p,
        });
    }
    Ok(pts)
}

/// Precision-recall steps as `(recall, precision)`.
pub fn pr_points(in_scores: &[f64], ood_scores: &[f64]) -> Result<Vec<CurvePoint>, MetricError> {
    check(in_scores, ood_scores)?;
    let p = in_scores.len() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut pts = Vec::new();
    for (_, dp, dn) in tie_groups(in_scores, ood_scores) {
        tp += dp;
        fp += dn;
        pts.push(CurvePoint {
            x: tp as f64 / p,
            y: tp as f64 / (tp + fp) as f64,
        });
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(auroc(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(auroc(&[1.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(auroc(&[3.0, 1.0, 2.0], &[2.0, 0.0]).unwrap(), 0.75);
        assert!((auprc(&[3.0, 1.0], &[2.0]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(auprc(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(fpr_at_tpr(&[5.0, 6.0], &[1.0, 2.0], 0.8).unwrap(), 0.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fpr80_on_identical_multisets() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(fpr_at_tpr(&xs, &xs, 0.8).unwrap(), 0.8);
    }

    #[test]
    fn errors() {
        assert!(matches!(auroc(&[], &[1.0]), Err(MetricError::Empty(_))));
        assert!(matches!(auroc(&[f64::NAN], &[1.0]), Err(MetricError::NonFinite)));
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(MetricError::ZeroVariance)
        ));
    }

    #[test]
    fn roc_endpoints() {
        let pts = roc_points(&[0.3, 0.9, 0.1], &[0.2, 0.9]).unwrap();
        assert_eq!(pts[0], CurvePoint { x: 0.0, y: 0.0 });
        assert_eq!(*pts.last().unwrap(), CurvePoint { x: 1.0, y: 1.0 });
        assert!(pts.windows(2).all(|w| w[0].x <= w[1].x && w[0].y <= w[1].y));
    }
}
