use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adam,
}

/// Optimizer hyperparameters plus the per-parameter moment buffers.
///
/// * SGD: `θ ← θ − α·g`
/// * RMSprop: `v ← βv + (1−β)g²`, `θ ← θ − η·g/√(v+ε)`
/// * Adam: `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`, bias-corrected
///   `m̂, v̂` with the step counter incremented first, `θ ← θ − η·m̂/√(v̂+ε)`
///
/// ε sits inside the square root for both adaptive methods.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn rmsprop(lr: f64) -> Self {
        Self::new(OptimizerKind::Rmsprop, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    fn ensure_buffers(&mut self, lens: &[usize]) -> Result<()> {
        let want_m = self.kind == OptimizerKind::Adam;
        let want_v = self.kind != OptimizerKind::Sgd;
        if self.v.is_empty() && self.m.is_empty() {
            if want_m {
                self.m = lens.iter().map(|&n| vec![0.0; n]).collect();
            }
            if want_v {
                self.v = lens.iter().map(|&n| vec![0.0; n]).collect();
            }
            return Ok(());
        }
        let have: Vec<usize> = if want_v { &self.v } else { &self.m }.iter().map(Vec::len).collect();
        if have != lens {
            return Err(Error::dim("optimizer state does not match the parameter set"));
        }
        Ok(())
    }

    /// One update over every parameter tensor. `params` and `grads` are
    /// paired by position and must agree in shape.
    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Tensor>,
        grads: impl IntoIterator<Item = &'a Tensor>,
    ) -> Result<()> {
        let params: Vec<&mut Tensor> = params.into_iter().collect();
        let grads: Vec<&Tensor> = grads.into_iter().collect();
        if params.len() != grads.len() {
            return Err(Error::dim(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(&grads) {
            p.expect_same_shape(g)?;
        }
        let lens: Vec<usize> = params.iter().map(|p| p.len()).collect();
        self.ensure_buffers(&lens)?;
        self.t += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * gv;
                    }
                }
            }
            OptimizerKind::Rmsprop => {
                let (beta, eps) = (self.beta, self.eps);
                for ((p, g), v) in params.into_iter().zip(grads).zip(&mut self.v) {
                    for ((w, &gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.iter_mut()) {
                        *vv = beta * *vv + (1.0 - beta) * gv * gv;
                        *w -= lr * gv / (*vv + eps).sqrt();
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.t as i32);
                let c2 = 1.0 - b2.powi(self.t as i32);
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    let it = p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut());
                    for (((w, &gv), mm), vv) in it {
                        *mm = b1 * *mm + (1.0 - b1) * gv;
                        *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                        let mh = *mm / c1;
                        let vh = *vv / c2;
                        *w -= lr * mh / (vh + eps).sqrt();
                    }
                }
            }
        }
        Ok(())
    }
}

fn checked_step(kind: OptimizerKind, state: &mut OptimizerState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    if state.kind != kind {
        return Err(Error::param(format!("optimizer state is {:?}, not {kind:?}", state.kind)));
    }
    state.step(params.iter_mut(), grads.iter())
}

pub fn sgd_step(state: &mut OptimizerState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    checked_step(OptimizerKind::Sgd, state, params, grads)
}

pub fn rmsprop_step(state: &mut OptimizerState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    checked_step(OptimizerKind::Rmsprop, state, params, grads)
}

pub fn adam_step(state: &mut OptimizerState, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
    checked_step(OptimizerKind::Adam, state, params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    fn s(v: f64) -> Vec<Tensor> {
        vec![Tensor::scalar(v)]
    }

    #[test]
    fn sgd_direct() {
        let mut st = OptimizerState::sgd(0.1);
        let mut p = s(1.0);
        sgd_step(&mut st, &mut p, &s(0.5)).unwrap();
        assert_eq!(p[0].data()[0], 0.95);
        sgd_step(&mut st, &mut p, &s(0.0)).unwrap();
        assert_eq!(p[0].data()[0], 0.95);
    }

    #[test]
    fn zero_gradient_never_moves() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Rmsprop, OptimizerKind::Adam] {
            let mut st = OptimizerState::new(kind, 0.01);
            let mut p = vec![Tensor::full(&[3], 0.7)];
            for _ in 0..5 {
                st.step(p.iter_mut(), [Tensor::zeros(&[3])].iter()).unwrap();
            }
            assert!(p[0].data().iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn rmsprop_first_step_hand_evaluated() {
        let mut st = OptimizerState::rmsprop(0.01);
        let mut p = s(0.0);
        rmsprop_step(&mut st, &mut p, &s(1.0)).unwrap();
        // v = (1 − β)·g² with β = 0.9; 1 − 0.9 is not exactly 0.1 in binary.
        let v = st.second_moments()[0][0];
        assert!((v - 0.1).abs() < 1e-16);
        assert!((p[0].data()[0] + 0.01 / (0.1f64 + 1e-8).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn adam_first_step_is_sign_times_lr() {
        let mut prng = Prng::new(4);
        let g: Vec<f64> = (0..100).map(|_| prng.uniform(-5.0, 5.0)).collect();
        let mut st = OptimizerState::adam(0.001);
        let mut p = vec![Tensor::zeros(&[100])];
        adam_step(&mut st, &mut p, &[Tensor::from_vec(g.clone()).unwrap()]).unwrap();
        for (w, gv) in p[0].data().iter().zip(&g) {
            assert!(w.abs() <= 0.001 * (1.0 + 1e-6));
            // 1 − |g|/√(g²+ε) ≤ ε/(2g²)
            let bound = 0.001 * (1e-8 / (2.0 * gv * gv) + 1e-15);
            assert!((w + 0.001 * gv.signum()).abs() <= bound);
        }
    }

    #[test]
    fn mismatched_state_rejected() {
        let mut st = OptimizerState::adam(0.1);
        assert!(sgd_step(&mut st, &mut s(1.0), &s(1.0)).is_err());
        adam_step(&mut st, &mut s(1.0), &s(1.0)).unwrap();
        assert!(adam_step(&mut st, &mut [Tensor::zeros(&[2])], &[Tensor::zeros(&[2])]).is_err());
    }
}
