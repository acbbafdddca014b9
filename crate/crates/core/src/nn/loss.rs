use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped to `[CLAMP, 1 − CLAMP]` before taking logs.
pub const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared error over every element.
    Mse,
    /// `−Σ_k y_k log ŷ_k` over the last axis, averaged over rows.
    CategoricalCe,
    /// `−Σ y log ŷ` over all non-batch elements, averaged over the batch.
    CrossEntropy,
    /// Elementwise binary cross-entropy averaged over every element.
    BinaryCe,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CategoricalCe => "categorical_ce",
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::BinaryCe => "binary_ce",
        }
    }

    /// Whether a final activation of `act` combines with this loss into the
    /// simple `ŷ − y` form on the pre-activation values.
    pub fn fuses_with(&self, act: ActivationKind) -> bool {
        matches!(
            (self, act),
            (LossKind::CategoricalCe | LossKind::CrossEntropy, ActivationKind::Softmax)
                | (LossKind::BinaryCe, ActivationKind::Sigmoid)
        )
    }
}

fn clamp(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

fn rows(t: &Tensor) -> (usize, usize) {
    let row = *t.shape().last().expect("rank ≥ 1");
    (t.len() / row, row)
}

fn batch(t: &Tensor) -> usize {
    if t.rank() >= 2 {
        t.shape()[0]
    } else {
        1
    }
}

pub fn loss(kind: LossKind, y_true: &Tensor, y_pred: &Tensor) -> Result<f64> {
    y_pred.expect_same_shape(y_true)?;
    let pairs = y_true.data().iter().zip(y_pred.data());
    Ok(match kind {
        LossKind::Mse => pairs.map(|(y, p)| (p - y) * (p - y)).sum::<f64>() / y_true.len() as f64,
        LossKind::BinaryCe => {
            -pairs
                .map(|(y, p)| {
                    let p = clamp(*p);
                    y * p.ln() + (1.0 - y) * (1.0 - p).ln()
                })
                .sum::<f64>()
                / y_true.len() as f64
        }
        LossKind::CategoricalCe | LossKind::CrossEntropy => {
            let total: f64 = -pairs.map(|(y, p)| y * clamp(*p).ln()).sum::<f64>();
            let denom = if kind == LossKind::CategoricalCe {
                rows(y_true).0
            } else {
                batch(y_true)
            };
            total / denom as f64
        }
    })
}

/// Gradient of [`loss`] with respect to `y_pred`. Where a prediction is
/// clamped the cross-entropy gradient is zero.
pub fn loss_grad(kind: LossKind, y_true: &Tensor, y_pred: &Tensor) -> Result<Tensor> {
    y_pred.expect_same_shape(y_true)?;
    let n = y_true.len() as f64;
    let inside = |p: f64| (CLAMP..=1.0 - CLAMP).contains(&p);
    match kind {
        LossKind::Mse => y_pred.zip_map(y_true, |p, y| 2.0 * (p - y) / n),
        LossKind::BinaryCe => y_pred.zip_map(y_true, |p, y| {
            if inside(p) {
                (p - y) / (p * (1.0 - p)) / n
            } else {
                0.0
            }
        }),
        LossKind::CategoricalCe | LossKind::CrossEntropy => {
            let denom = if kind == LossKind::CategoricalCe {
                rows(y_true).0
            } else {
                batch(y_true)
            } as f64;
            y_pred.zip_map(y_true, |p, y| if inside(p) { -y / p / denom } else { 0.0 })
        }
    }
}

/// Gradient of `loss(act(z))` with respect to the pre-activation `z`, given
/// the activation output `y_pred`, for the pairs where
/// [`LossKind::fuses_with`] holds.
///
/// Softmax with (categorical) cross-entropy: `(ŷ·Σy − y) / denom` per row,
/// which reduces to `(ŷ − y) / denom` for one-hot targets. Sigmoid with binary
/// cross-entropy: `(p − y) / count`. The clamp is ignored here.
pub fn fused_loss_grad(kind: LossKind, act: ActivationKind, y_true: &Tensor, y_pred: &Tensor) -> Result<Tensor> {
    y_pred.expect_same_shape(y_true)?;
    if !kind.fuses_with(act) {
        return Err(Error::param(format!(
            "{} does not fuse with {}",
            kind.name(),
            act.name()
        )));
    }
    if kind == LossKind::BinaryCe {
        let n = y_true.len() as f64;
        return y_pred.zip_map(y_true, |p, y| (p - y) / n);
    }
    let (nrows, row) = rows(y_true);
    let denom = if kind == LossKind::CategoricalCe {
        nrows
    } else {
        batch(y_true)
    } as f64;
    let mut g = y_pred.clone();
    for (gr, yr) in g.data_mut().chunks_mut(row).zip(y_true.data().chunks(row)) {
        let s: f64 = yr.iter().sum();
        for (v, &y) in gr.iter_mut().zip(yr) {
            *v = (*v * s - y) / denom;
        }
    }
    Ok(g)
}
