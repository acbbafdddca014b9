use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Root of the mean squared difference.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::dim(format!(
            "rmse over {} targets and {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::param("rmse needs at least one value"));
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p) * (t - p)).sum();
    Ok((sse / y_true.len() as f64).sqrt())
}

/// Mean over images (leading axis) of |pred ∩ truth| / |pred ∪ truth|, after
/// binarizing both with `v > threshold`. An image where both masks are empty
/// scores 1.
pub fn mean_iou(pred: &Tensor, truth: &Tensor, threshold: f64) -> Result<f64> {
    pred.expect_same_shape(truth)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param(format!("iou threshold {threshold} outside (0, 1)")));
    }
    if pred.rank() < 2 {
        return Err(Error::dim("mean_iou expects a leading image axis"));
    }
    let n = pred.shape()[0];
    let per = pred.len() / n;
    let mut sum = 0.0;
    for i in 0..n {
        let (mut inter, mut union) = (0u64, 0u64);
        let p = &pred.data()[i * per..(i + 1) * per];
        let t = &truth.data()[i * per..(i + 1) * per];
        for (&a, &b) in p.iter().zip(t) {
            let (a, b) = (a > threshold, b > threshold);
            inter += (a && b) as u64;
            union += (a || b) as u64;
        }
        sum += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
        let mut p = Prng::new(9);
        let a: Vec<f64> = (0..50).map(|_| p.normal()).collect();
        let b: Vec<f64> = (0..50).map(|_| p.normal()).collect();
        let mse = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 50.0;
        assert!((rmse(&a, &b).unwrap().powi(2) - mse).abs() < 1e-12);
    }

    fn masks(rows: &[&[f64]]) -> Tensor {
        let w = rows[0].len();
        Tensor::new(vec![rows.len(), 1, w], rows.concat()).unwrap()
    }

    #[test]
    fn iou_cases() {
        let a = masks(&[&[1.0, 1.0, 0.0, 0.0]]);
        let b = masks(&[&[0.0, 0.0, 1.0, 1.0]]);
        let c = masks(&[&[0.0, 1.0, 1.0, 0.0]]);
        assert_eq!(mean_iou(&a, &a, 0.5).unwrap(), 1.0);
        assert_eq!(mean_iou(&a, &b, 0.5).unwrap(), 0.0);
        // |∩| = 1, |∪| = 3
        assert_eq!(mean_iou(&a, &c, 0.5).unwrap(), 1.0 / 3.0);
        let empty = masks(&[&[0.0; 4]]);
        assert_eq!(mean_iou(&empty, &empty, 0.5).unwrap(), 1.0);
        let two = masks(&[&[1.0, 1.0, 0.0, 0.0], &[0.0; 4]]);
        let two_t = masks(&[&[1.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]]);
        assert_eq!(mean_iou(&two, &two_t, 0.5).unwrap(), 0.5);
        assert!(mean_iou(&a, &two, 0.5).is_err());
        assert!(mean_iou(&a, &a, 1.0).is_err());
    }
}
