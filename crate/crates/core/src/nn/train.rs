use super::graph::{Mode, ModelGraph};
use super::loss::{loss, LossKind};
use super::optim::OptimizerState;
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::Tensor;

/// Inputs and targets with a shared leading sample axis.
#[derive(Debug, Clone)]
pub struct Samples {
    pub x: Tensor,
    pub y: Tensor,
}

impl Samples {
    pub fn new(x: Tensor, y: Tensor) -> Result<Self> {
        if x.rank() < 2 || y.rank() < 2 || x.shape()[0] != y.shape()[0] {
            return Err(Error::dim(format!(
                "inputs {:?} and targets {:?} need a shared leading sample axis",
                x.shape(),
                y.shape()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gather samples by index into a new batch.
    pub fn gather(&self, idx: &[usize]) -> Result<Samples> {
        Ok(Samples {
            x: gather_rows(&self.x, idx)?,
            y: gather_rows(&self.y, idx)?,
        })
    }
}

pub fn gather_rows(t: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let n = t.shape()[0];
    let row = t.len() / n;
    let mut data = Vec::with_capacity(idx.len() * row);
    for &i in idx {
        if i >= n {
            return Err(Error::Bounds(format!("sample {i} of {n}")));
        }
        data.extend_from_slice(&t.data()[i * row..(i + 1) * row]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(shape, data)
}

/// Split `order` into consecutive batches. A trailing single-sample batch is
/// folded into the previous one so batch normalization always sees ≥ 2.
pub fn batch_indices(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("checked non-empty");
        out.last_mut().expect("len > 1").extend(last);
    }
    out
}

/// One pass over `data` in an order shuffled by `prng`. Returns the mean
/// training loss per sample.
pub fn train_epoch(
    model: &mut ModelGraph,
    data: &Samples,
    batch_size: usize,
    kind: LossKind,
    opt: &mut OptimizerState,
    prng: &mut Prng,
) -> Result<f64> {
    if data.is_empty() || batch_size == 0 {
        return Err(Error::param("training needs at least one sample and a positive batch size"));
    }
    model.set_mode(Mode::Train);
    let mut order: Vec<usize> = (0..data.len()).collect();
    prng.shuffle(&mut order);
    let mut total = 0.0;
    for idx in batch_indices(&order, batch_size) {
        let batch = data.gather(&idx)?;
        let (l, _, grads) = model.loss_and_gradients(batch.x, &batch.y, kind, prng, false)?;
        model.apply_gradients(opt, &grads)?;
        total += l * idx.len() as f64;
    }
    model.set_mode(Mode::Infer);
    Ok(total / data.len() as f64)
}

/// Inference-mode predictions in batches, concatenated along the sample axis.
pub fn predict_batched(model: &ModelGraph, x: &Tensor, batch_size: usize) -> Result<Tensor> {
    let n = x.shape()[0];
    let all: Vec<usize> = (0..n).collect();
    let mut data = Vec::new();
    let mut shape = vec![n];
    shape.extend_from_slice(model.output_shape());
    for idx in all.chunks(batch_size.max(1)) {
        data.extend(model.predict(&gather_rows(x, idx)?)?.into_data());
    }
    Tensor::new(shape, data)
}

/// A named metric over the full prediction set.
pub type MetricHook<'a> = (&'a str, &'a dyn Fn(&Tensor, &Tensor) -> Result<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub metrics: Vec<(String, f64)>,
    pub predictions: Tensor,
}

/// Inference-mode loss over all samples plus each metric hook applied to
/// `(predictions, targets)`. Holds no state between calls.
pub fn evaluate(
    model: &ModelGraph,
    data: &Samples,
    batch_size: usize,
    kind: LossKind,
    hooks: &[MetricHook<'_>],
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::param("evaluation needs at least one sample"));
    }
    let predictions = predict_batched(model, &data.x, batch_size)?;
    let l = loss(kind, &data.y, &predictions)?;
    let metrics = hooks
        .iter()
        .map(|(name, f)| Ok((name.to_string(), f(&predictions, &data.y)?)))
        .collect::<Result<_>>()?;
    Ok(Evaluation {
        loss: l,
        metrics,
        predictions,
    })
}

/// Fraction of rows whose argmax matches the target's argmax.
pub fn argmax_accuracy(pred: &Tensor, target: &Tensor) -> Result<f64> {
    pred.expect_same_shape(target)?;
    let (p, t) = (pred.argmax_rows(), target.argmax_rows());
    Ok(p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / p.len() as f64)
}
