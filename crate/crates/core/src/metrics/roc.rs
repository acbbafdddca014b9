use crate::error::{Error, Result};

/// (false-positive rate, true-positive rate) points from a descending
/// threshold sweep, anchored at (0, 0) and (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (f, t) in &self.points {
            s.push_str(&format!("{f:.6},{t:.6}\n"));
        }
        s
    }
}

/// ROC curve and trapezoidal AUC. Equal scores form a single sweep step, so
/// a tie between a positive and a negative contributes a diagonal segment
/// (half credit).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::dim(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::param("roc scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::param("roc needs at least one positive and one negative label"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of (1/neg)·(1/pos), kept integral.
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = area2 as f64 / (2 * pos * neg) as f64;
    Ok((RocCurve { points }, auc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scores() {
        let (curve, auc) = roc_auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 1.0);
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
        let (_, auc) = roc_auc(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 0.0);
    }

    #[test]
    fn all_equal_scores_is_the_diagonal() {
        let (curve, auc) = roc_auc(&[0.5; 5], &[true, false, true, false, false]).unwrap();
        assert_eq!(auc, 0.5);
        assert_eq!(curve.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn small_mixed_case() {
        // pairs (pos, neg): (0.8,0.6)=1 (0.8,0.4)=1 (0.4,0.6)=0 (0.4,0.4)=½
        let (_, auc) = roc_auc(&[0.8, 0.6, 0.4, 0.4], &[true, false, true, false]).unwrap();
        assert_eq!(auc, 2.5 / 4.0);
    }

    #[test]
    fn rejects_single_class() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::Parameter(_))));
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }
}
