use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ActivationKind {
    Sigmoid,
    Relu,
    Elu { alpha: f64 },
    /// Normalizes over the last axis.
    Softmax,
}

impl ActivationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::Elu { .. } => "elu",
            ActivationKind::Softmax => "softmax",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::Elu { alpha } if !(alpha > 0.0) => {
                Err(Error::param(format!("ELU alpha must be > 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn elu(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        alpha * x.exp_m1()
    }
}

fn softmax_rows(data: &mut [f64], row: usize) {
    for r in data.chunks_mut(row) {
        let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in r.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in r.iter_mut() {
            *v /= s;
        }
    }
}

/// Apply an activation. Softmax subtracts the row maximum before
/// exponentiating.
pub fn activation(kind: ActivationKind, x: &Tensor) -> Tensor {
    match kind {
        ActivationKind::Sigmoid => x.map(sigmoid),
        ActivationKind::Relu => x.map(|v| v.max(0.0)),
        ActivationKind::Elu { alpha } => x.map(|v| elu(v, alpha)),
        ActivationKind::Softmax => {
            let mut out = x.clone();
            let row = *x.shape().last().expect("tensors have rank ≥ 1");
            softmax_rows(out.data_mut(), row);
            out
        }
    }
}

/// Elementwise derivative at `x`. Softmax has no elementwise derivative; use
/// [`activation_backward`] or the fused loss gradient instead.
pub fn activation_grad(kind: ActivationKind, x: &Tensor) -> Result<Tensor> {
    Ok(match kind {
        ActivationKind::Sigmoid => x.map(|v| {
            let s = sigmoid(v);
            s * (1.0 - s)
        }),
        ActivationKind::Relu => x.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        // The derivative at exactly 0 is taken from the right branch.
        ActivationKind::Elu { alpha } => x.map(|v| if v >= 0.0 { 1.0 } else { alpha * v.exp() }),
        ActivationKind::Softmax => {
            return Err(Error::param(
                "softmax has no elementwise derivative; use activation_backward",
            ))
        }
    })
}

/// Vector-Jacobian product: gradient with respect to the input given the
/// input `x`, the forward output `y` and the upstream gradient `g`.
pub fn activation_backward(kind: ActivationKind, x: &Tensor, y: &Tensor, g: &Tensor) -> Result<Tensor> {
    g.expect_same_shape(y)?;
    match kind {
        ActivationKind::Softmax => {
            let row = *y.shape().last().expect("tensors have rank ≥ 1");
            let mut out = g.clone();
            for (o, yr) in out.data_mut().chunks_mut(row).zip(y.data().chunks(row)) {
                let dot: f64 = o.iter().zip(yr).map(|(a, b)| a * b).sum();
                for (v, &p) in o.iter_mut().zip(yr) {
                    *v = p * (*v - dot);
                }
            }
            Ok(out)
        }
        ActivationKind::Sigmoid => y.zip_map(g, |s, gv| gv * s * (1.0 - s)),
        _ => activation_grad(kind, x)?.zip_map(g, |d, gv| d * gv),
    }
}

/// [`activation_backward`] using only the forward output. Every supported
/// activation is monotone, so the output determines the branch: for ELU,
/// `y ≥ 0 ⇔ x ≥ 0` and `α·eˣ = y + α` on the negative side.
pub(crate) fn backward_from_output(kind: ActivationKind, y: &Tensor, g: &Tensor) -> Result<Tensor> {
    match kind {
        ActivationKind::Relu => y.zip_map(g, |v, gv| if v > 0.0 { gv } else { 0.0 }),
        ActivationKind::Elu { alpha } => y.zip_map(g, |v, gv| if v >= 0.0 { gv } else { gv * (v + alpha) }),
        // Neither reads `x`.
        _ => activation_backward(kind, y, y, g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec()).unwrap()
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(activation(ActivationKind::Sigmoid, &t(&[0.0])).data(), &[0.5]);
        assert_eq!(activation(ActivationKind::Relu, &t(&[-2.0, 3.0])).data(), &[0.0, 3.0]);
        let e = activation(ActivationKind::Elu { alpha: 1.0 }, &t(&[0.0, -1.0]));
        assert_eq!(e.data()[0], 0.0);
        // e^-1 - 1 to 20 digits: -0.63212055882855767840
        assert!((e.data()[1] + 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn softmax_uniform_and_stable() {
        for c in [-700.0, 0.0, 3.5, 500.0] {
            let s = activation(ActivationKind::Softmax, &t(&[c; 4]));
            assert!(s.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
        let mut p = Prng::new(3);
        let x = Tensor::new(vec![50, 7], (0..350).map(|_| p.uniform(-500.0, 500.0)).collect()).unwrap();
        let s = activation(ActivationKind::Softmax, &x);
        for row in s.data().chunks(7) {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        let cases = [
            (ActivationKind::Sigmoid, 0.0, 0.25),
            (ActivationKind::Elu { alpha: 1.0 }, -1.0, (-1.0f64).exp()),
        ];
        for (kind, x, expect) in cases {
            let f = |v: f64| activation(kind, &t(&[v])).data()[0];
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            let an = activation_grad(kind, &t(&[x])).unwrap().data()[0];
            assert!((fd - expect).abs() < 1e-9);
            assert!((an - expect).abs() < 1e-15);
        }
        let r = activation_grad(ActivationKind::Relu, &t(&[-1.0, 2.0])).unwrap();
        assert_eq!(r.data(), &[0.0, 1.0]);
        assert_eq!(activation_grad(ActivationKind::Elu { alpha: 2.0 }, &t(&[0.0])).unwrap().data(), &[1.0]);
        assert!(activation_grad(ActivationKind::Softmax, &t(&[0.0])).is_err());
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let mut p = Prng::new(9);
        let x = Tensor::new(vec![2, 4], (0..8).map(|_| p.uniform(-2.0, 2.0)).collect()).unwrap();
        let g = Tensor::new(vec![2, 4], (0..8).map(|_| p.uniform(-1.0, 1.0)).collect()).unwrap();
        let y = activation(ActivationKind::Softmax, &x);
        let an = activation_backward(ActivationKind::Softmax, &x, &y, &g).unwrap();
        let f = |x: &Tensor| {
            activation(ActivationKind::Softmax, x)
                .data()
                .iter()
                .zip(g.data())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        for i in 0..8 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a.data_mut()[i] += 1e-5;
            b.data_mut()[i] -= 1e-5;
            let fd = (f(&a) - f(&b)) / 2e-5;
            assert!((fd - an.data()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn elu_alpha_validated() {
        assert!(ActivationKind::Elu { alpha: 0.0 }.validate().is_err());
        assert!(ActivationKind::Elu { alpha: 1.0 }.validate().is_ok());
    }
}
