use std::collections::HashMap;

use super::activation::{activation, backward_from_output};
use super::layer::{init_params, output_shape, param_shapes, LayerKind, LayerSpec};
use super::loss::{fused_loss_grad, loss, loss_grad, LossKind};
use super::optim::OptimizerState;
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{
    bilinear_upsample, bilinear_upsample_backward, col2im, gemm, im2col, maxpool2d, ConvGeometry, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-layer values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
enum Cache {
    Empty,
    Input(Tensor),
    Pool { in_shape: Vec<usize>, arg: Vec<usize> },
    Mask(Option<Vec<f64>>),
    Norm { xhat: Vec<f64>, inv_std: Vec<f64>, batch_stats: bool },
    Output(Tensor),
    Shape(Vec<usize>),
    Split { c_cur: usize },
}

/// Record of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
    mode: Mode,
    batch: usize,
}

impl Trace {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Dropout scale masks recorded per layer (`None` where a layer is not a
    /// training-mode dropout).
    pub fn dropout_masks(&self) -> Vec<Option<&[f64]>> {
        self.caches
            .iter()
            .map(|c| match c {
                Cache::Mask(Some(m)) => Some(m.as_slice()),
                _ => None,
            })
            .collect()
    }
}

/// Gradients shaped like the model's parameter list, plus optionally the
/// gradient with respect to the input batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<Vec<Tensor>>,
    pub input: Option<Tensor>,
}

impl Gradients {
    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.params.iter().flatten()
    }
}

struct BnUpdate {
    layer: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// A feed-forward stack of layers with optional named taps for skip
/// connections. Tensors carry a leading batch axis; shapes stored here are
/// per sample.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    sources: Vec<Option<usize>>,
    params: Vec<Vec<Tensor>>,
    state: Vec<Vec<Tensor>>,
    mode: Mode,
}

fn layer_err(index: usize, kind: &LayerKind, message: impl Into<String>) -> Error {
    Error::Layer {
        index,
        kind: kind.name(),
        message: message.into(),
    }
}

/// Shape trace and merge sources for a layer list.
fn propagate(input_shape: &[usize], layers: &[LayerSpec]) -> Result<(Vec<Vec<usize>>, Vec<Option<usize>>)> {
    if input_shape.is_empty() || input_shape.contains(&0) {
        return Err(Error::dim(format!("invalid input shape {input_shape:?}")));
    }
    let mut shapes = vec![input_shape.to_vec()];
    let mut taps: HashMap<&str, usize> = HashMap::new();
    let mut sources = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        layer.validate().map_err(|e| layer_err(i, &layer.kind, e.to_string()))?;
        let source = match &layer.kind {
            LayerKind::ConcatMerge { source } => Some(
                *taps
                    .get(source.as_str())
                    .ok_or_else(|| layer_err(i, &layer.kind, format!("no earlier tap named `{source}`")))?,
            ),
            _ => None,
        };
        let tap_shape = source.map(|j| shapes[j + 1].as_slice());
        let out = output_shape(&layer.kind, &shapes[i], tap_shape).map_err(|m| layer_err(i, &layer.kind, m))?;
        if out.contains(&0) {
            return Err(layer_err(i, &layer.kind, format!("output shape {out:?} is empty")));
        }
        if let Some(name) = &layer.tap {
            if taps.insert(name, i).is_some() {
                return Err(Error::param(format!("duplicate tap name `{name}`")));
            }
        }
        sources.push(source);
        shapes.push(out);
    }
    Ok((shapes, sources))
}

fn channels_spatial(shape: &[usize]) -> (usize, usize, usize) {
    let n = shape[0];
    let c = shape[1];
    (n, c, shape[2..].iter().product())
}

impl ModelGraph {
    /// Validate the layer list, propagate shapes and initialize parameters.
    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>, prng: &mut Prng) -> Result<Self> {
        let (shapes, sources) = propagate(input_shape, &layers)?;
        let mut params = Vec::with_capacity(layers.len());
        let mut state = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let next = layers.get(i + 1).map(|l| &l.kind);
            let (p, s) = init_params(&layer.kind, &shapes[i], next, prng);
            params.push(p);
            state.push(s);
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            sources,
            params,
            state,
            mode: Mode::Infer,
        })
    }

    /// Assemble a model from stored parameters, checking every shape.
    pub fn from_parts(
        input_shape: &[usize],
        layers: Vec<LayerSpec>,
        params: Vec<Vec<Tensor>>,
        state: Vec<Vec<Tensor>>,
    ) -> Result<Self> {
        let (shapes, sources) = propagate(input_shape, &layers)?;
        if params.len() != layers.len() || state.len() != layers.len() {
            return Err(Error::dim("parameter list length differs from layer count"));
        }
        for (i, layer) in layers.iter().enumerate() {
            let (ps, ss) = param_shapes(&layer.kind, &shapes[i]);
            let got_p: Vec<&[usize]> = params[i].iter().map(|t| t.shape()).collect();
            let got_s: Vec<&[usize]> = state[i].iter().map(|t| t.shape()).collect();
            let want_p: Vec<&[usize]> = ps.iter().map(Vec::as_slice).collect();
            let want_s: Vec<&[usize]> = ss.iter().map(Vec::as_slice).collect();
            if got_p != want_p || got_s != want_s {
                return Err(layer_err(
                    i,
                    &layer.kind,
                    format!("parameters {got_p:?}/{got_s:?}, expected {want_p:?}/{want_s:?}"),
                ));
            }
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            sources,
            params,
            state,
            mode: Mode::Infer,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("shape trace is never empty")
    }

    /// Per-sample shapes: the input, then the output of each layer.
    pub fn shape_trace(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Vec<Tensor>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.params
    }

    /// Non-trainable buffers (batch-norm running mean and variance).
    pub fn state(&self) -> &[Vec<Tensor>] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [Vec<Tensor>] {
        &mut self.state
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().flatten().map(Tensor::len).sum()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Inference-mode forward pass. Pure: repeated calls are bit-identical.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.run(x.clone(), Mode::Infer, None, false)?.0)
    }

    /// Forward pass in the model's current mode, keeping what the backward
    /// pass needs. In training mode batch-norm running statistics are
    /// updated and dropout masks are drawn from `prng`.
    pub fn forward(&mut self, x: Tensor, prng: &mut Prng) -> Result<(Tensor, Trace)> {
        let (y, trace, updates) = self.run(x, self.mode, Some(prng), true)?;
        for u in updates {
            let LayerKind::BatchNorm { momentum, .. } = self.layers[u.layer].kind else {
                unreachable!("updates come from batchnorm layers")
            };
            let [rm, rv] = &mut self.state[u.layer][..] else {
                unreachable!("batchnorm state has two buffers")
            };
            for (r, m) in rm.data_mut().iter_mut().zip(&u.mean) {
                *r = momentum * *r + (1.0 - momentum) * m;
            }
            for (r, v) in rv.data_mut().iter_mut().zip(&u.var) {
                *r = momentum * *r + (1.0 - momentum) * v;
            }
        }
        Ok((y, trace))
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let s = x.shape();
        if s.len() != self.input_shape.len() + 1 || s[1..] != self.input_shape[..] {
            return Err(Error::dim(format!(
                "input batch shape {s:?} does not match N×{:?}",
                self.input_shape
            )));
        }
        Ok(s[0])
    }

    fn run(&self, mut x: Tensor, mode: Mode, mut prng: Option<&mut Prng>, keep: bool) -> Result<(Tensor, Trace, Vec<BnUpdate>)> {
        let n = self.check_input(&x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut taps: HashMap<usize, Tensor> = HashMap::new();
        let mut updates = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let p = &self.params[i];
            let err = |m: String| layer_err(i, &layer.kind, m);
            let (y, cache) = match &layer.kind {
                LayerKind::Conv2D {
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let g = ConvGeometry::new(
                        super::layer::spatial(&self.shapes[i]).map_err(err)?,
                        *kernel,
                        *stride,
                        *padding,
                    )?;
                    let y = conv_forward(&x, &p[0], &p[1], &g, n)?;
                    (y, Cache::Input(x))
                }
                LayerKind::Dense { units } => {
                    let y = dense_forward(&x, &p[0], &p[1], n, *units)?;
                    (y, Cache::Input(x))
                }
                LayerKind::MaxPool { window, stride } => {
                    let in_shape = x.shape().to_vec();
                    let (_, c, _) = channels_spatial(&in_shape);
                    let planes = x.into_reshaped(&[n * c, in_shape[2], in_shape[3]])?;
                    let (y, arg) = maxpool2d(&planes, *window, *stride)?;
                    let (oh, ow) = (y.shape()[1], y.shape()[2]);
                    (y.into_reshaped(&[n, c, oh, ow])?, Cache::Pool { in_shape, arg })
                }
                LayerKind::Dropout { rate } => {
                    if mode == Mode::Train && *rate > 0.0 {
                        let prng = prng
                            .as_deref_mut()
                            .ok_or_else(|| Error::param("training-mode dropout needs a random stream"))?;
                        let scale = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| if prng.bernoulli(*rate) { 0.0 } else { scale })
                            .collect();
                        for (v, m) in x.data_mut().iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        (x, Cache::Mask(Some(mask)))
                    } else {
                        (x, Cache::Mask(None))
                    }
                }
                LayerKind::BatchNorm { epsilon, .. } => {
                    let (y, xhat, inv_std, stats) = batchnorm_forward(&x, p, &self.state[i], *epsilon, mode)
                        .map_err(|e| err(e.to_string()))?;
                    if let Some((mean, var)) = stats {
                        updates.push(BnUpdate { layer: i, mean, var });
                    }
                    let batch_stats = mode == Mode::Train;
                    (y, Cache::Norm { xhat, inv_std, batch_stats })
                }
                LayerKind::Flatten => {
                    let shape = x.shape().to_vec();
                    let f = self.shapes[i + 1][0];
                    (x.into_reshaped(&[n, f])?, Cache::Shape(shape))
                }
                LayerKind::GlobalAvgPool => {
                    let shape = x.shape().to_vec();
                    let (_, c, s) = channels_spatial(&shape);
                    let data = x.data().chunks(s).map(|pl| pl.iter().sum::<f64>() / s as f64).collect();
                    (Tensor::new(vec![n, c], data)?, Cache::Shape(shape))
                }
                LayerKind::Activation(kind) => {
                    let y = activation(*kind, &x);
                    let cache = if keep { Cache::Output(y.clone()) } else { Cache::Empty };
                    (y, cache)
                }
                LayerKind::Upsample { factor } => {
                    let shape = x.shape().to_vec();
                    let (c, h, w) = (shape[1], shape[2], shape[3]);
                    let y = bilinear_upsample(&x.into_reshaped(&[n * c, h, w])?, *factor)?;
                    (y.into_reshaped(&[n, c, h * factor, w * factor])?, Cache::Shape(shape))
                }
                LayerKind::ConcatMerge { .. } => {
                    let src = self.sources[i].expect("validated at construction");
                    let tap = taps.get(&src).expect("tap recorded during this pass");
                    let c_cur = x.shape()[1];
                    let (a, b) = (x.len() / n, tap.len() / n);
                    let mut data = Vec::with_capacity(x.len() + tap.len());
                    for s in 0..n {
                        data.extend_from_slice(&x.data()[s * a..(s + 1) * a]);
                        data.extend_from_slice(&tap.data()[s * b..(s + 1) * b]);
                    }
                    let mut shape = vec![n];
                    shape.extend_from_slice(&self.shapes[i + 1]);
                    (Tensor::new(shape, data)?, Cache::Split { c_cur })
                }
            };
            if layer.tap.is_some() {
                taps.insert(i, y.clone());
            }
            caches.push(if keep { cache } else { Cache::Empty });
            x = y;
        }
        Ok((x, Trace { caches, mode, batch: n }, updates))
    }

    /// Backpropagate `grad` (with respect to the model output) through every
    /// layer.
    pub fn backward(&self, trace: &Trace, grad: Tensor) -> Result<Gradients> {
        self.backward_from(trace, grad, self.layers.len(), true)
    }

    /// Backpropagate a gradient with respect to the input of layer `end`
    /// (the output of layer `end − 1`) down to the model input. The input
    /// gradient is only formed when `need_input` is set.
    pub fn backward_from(&self, trace: &Trace, grad: Tensor, end: usize, need_input: bool) -> Result<Gradients> {
        if end > self.layers.len() || trace.caches.len() != self.layers.len() {
            return Err(Error::param("trace does not belong to this model"));
        }
        let n = trace.batch;
        let mut want = vec![n];
        want.extend_from_slice(&self.shapes[end]);
        if grad.shape() != want.as_slice() {
            return Err(Error::dim(format!("gradient shape {:?}, expected {want:?}", grad.shape())));
        }
        let mut grads: Vec<Vec<Tensor>> = self
            .params
            .iter()
            .map(|ps| ps.iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        let mut tap_grads: HashMap<usize, Tensor> = HashMap::new();
        let mut g = grad;
        let missing = || Error::param("trace was recorded without backward caches");
        for i in (0..end).rev() {
            let layer = &self.layers[i];
            if layer.tap.is_some() {
                if let Some(t) = tap_grads.remove(&i) {
                    g.add_assign(&t)?;
                }
            }
            let want_dx = i > 0 || need_input;
            let p = &self.params[i];
            g = match (&layer.kind, &trace.caches[i]) {
                (LayerKind::Conv2D { kernel, stride, padding, .. }, Cache::Input(x)) => {
                    let geo = ConvGeometry::new(
                        super::layer::spatial(&self.shapes[i]).expect("validated"),
                        *kernel,
                        *stride,
                        *padding,
                    )?;
                    let (dw, db, dx) = conv_backward(x, &p[0], &geo, &g, n, want_dx)?;
                    grads[i] = vec![dw, db];
                    dx.unwrap_or(g)
                }
                (LayerKind::Dense { units }, Cache::Input(x)) => {
                    let (dw, db, dx) = dense_backward(x, &p[0], &g, n, *units, want_dx)?;
                    grads[i] = vec![dw, db];
                    dx.unwrap_or(g)
                }
                (LayerKind::MaxPool { .. }, Cache::Pool { in_shape, arg }) => {
                    let mut dx = Tensor::zeros(in_shape);
                    let d = dx.data_mut();
                    for (&a, &gv) in arg.iter().zip(g.data()) {
                        d[a] += gv;
                    }
                    dx
                }
                (LayerKind::Dropout { .. }, Cache::Mask(mask)) => {
                    if let Some(mask) = mask {
                        for (v, m) in g.data_mut().iter_mut().zip(mask) {
                            *v *= m;
                        }
                    }
                    g
                }
                (LayerKind::BatchNorm { .. }, Cache::Norm { xhat, inv_std, batch_stats }) => {
                    let (dx, dgamma, dbeta) = batchnorm_backward(&g, xhat, inv_std, &p[0], *batch_stats)?;
                    grads[i] = vec![dgamma, dbeta];
                    dx
                }
                (LayerKind::Flatten | LayerKind::Upsample { .. } | LayerKind::GlobalAvgPool, Cache::Shape(shape)) => {
                    match &layer.kind {
                        LayerKind::Flatten => g.into_reshaped(shape)?,
                        LayerKind::Upsample { factor } => {
                            let (c, h, w) = (shape[1], shape[2], shape[3]);
                            let planes = g.into_reshaped(&[n * c, h * factor, w * factor])?;
                            bilinear_upsample_backward(&planes, h, w, *factor)?.into_reshaped(shape)?
                        }
                        _ => {
                            let (_, _, s) = channels_spatial(shape);
                            let data = g.data().iter().flat_map(|&v| std::iter::repeat_n(v / s as f64, s)).collect();
                            Tensor::new(shape.clone(), data)?
                        }
                    }
                }
                (LayerKind::Activation(kind), Cache::Output(y)) => backward_from_output(*kind, y, &g)?,
                (LayerKind::ConcatMerge { .. }, Cache::Split { c_cur }) => {
                    let src = self.sources[i].expect("validated");
                    let (_, c_all, s) = channels_spatial(g.shape());
                    let (a, b) = (c_cur * s, (c_all - c_cur) * s);
                    let mut cur = Vec::with_capacity(n * a);
                    let mut tap = Vec::with_capacity(n * b);
                    for chunk in g.data().chunks(a + b) {
                        cur.extend_from_slice(&chunk[..a]);
                        tap.extend_from_slice(&chunk[a..]);
                    }
                    let mut tshape = vec![n];
                    tshape.extend_from_slice(&self.shapes[src + 1]);
                    let tg = Tensor::new(tshape, tap)?;
                    match tap_grads.get_mut(&src) {
                        Some(acc) => acc.add_assign(&tg)?,
                        None => {
                            tap_grads.insert(src, tg);
                        }
                    }
                    let mut cshape = vec![n];
                    cshape.extend_from_slice(&self.shapes[i]);
                    Tensor::new(cshape, cur)?
                }
                _ => return Err(missing()),
            };
        }
        Ok(Gradients {
            params: grads,
            input: need_input.then_some(g),
        })
    }

    /// Loss on a batch and its gradients. A final softmax (with categorical
    /// or generalized cross-entropy) or sigmoid (with binary cross-entropy)
    /// is differentiated jointly with the loss.
    pub fn loss_and_gradients(
        &mut self,
        x: Tensor,
        y: &Tensor,
        kind: LossKind,
        prng: &mut Prng,
        need_input: bool,
    ) -> Result<(f64, Tensor, Gradients)> {
        let (out, trace) = self.forward(x, prng)?;
        let value = loss(kind, y, &out)?;
        let fused = match self.layers.last().map(|l| &l.kind) {
            Some(LayerKind::Activation(act)) if kind.fuses_with(*act) => Some(*act),
            _ => None,
        };
        let grads = match fused {
            Some(act) => {
                let g = fused_loss_grad(kind, act, y, &out)?;
                self.backward_from(&trace, g, self.layers.len() - 1, need_input)?
            }
            None => self.backward_from(&trace, loss_grad(kind, y, &out)?, self.layers.len(), need_input)?,
        };
        Ok((value, out, grads))
    }

    pub fn apply_gradients(&mut self, opt: &mut OptimizerState, grads: &Gradients) -> Result<()> {
        opt.step(self.params.iter_mut().flatten(), grads.iter())
    }
}

fn conv_forward(x: &Tensor, w: &Tensor, b: &Tensor, g: &ConvGeometry, n: usize) -> Result<Tensor> {
    let co = w.shape()[0];
    let (pl, ol, il) = (g.patch_len(), g.out_len(), g.in_len());
    let mut out = vec![0.0; n * co * ol];
    let mut cols = vec![0.0; pl * ol];
    for s in 0..n {
        im2col(g, &x.data()[s * il..(s + 1) * il], &mut cols);
        let dst = &mut out[s * co * ol..(s + 1) * co * ol];
        gemm(co, pl, ol, w.data(), false, &cols, false, dst, 0.0);
        for (row, &bias) in dst.chunks_mut(ol).zip(b.data()) {
            row.iter_mut().for_each(|v| *v += bias);
        }
    }
    Tensor::new(vec![n, co, g.out_h, g.out_w], out)
}

fn conv_backward(
    x: &Tensor,
    w: &Tensor,
    g: &ConvGeometry,
    dy: &Tensor,
    n: usize,
    want_dx: bool,
) -> Result<(Tensor, Tensor, Option<Tensor>)> {
    let co = w.shape()[0];
    let (pl, ol, il) = (g.patch_len(), g.out_len(), g.in_len());
    let mut dw = vec![0.0; co * pl];
    let mut db = vec![0.0; co];
    let mut dx = if want_dx { vec![0.0; n * il] } else { Vec::new() };
    let mut cols = vec![0.0; pl * ol];
    let mut dcols = vec![0.0; pl * ol];
    for s in 0..n {
        let dys = &dy.data()[s * co * ol..(s + 1) * co * ol];
        im2col(g, &x.data()[s * il..(s + 1) * il], &mut cols);
        gemm(co, ol, pl, dys, false, &cols, true, &mut dw, 1.0);
        for (acc, row) in db.iter_mut().zip(dys.chunks(ol)) {
            *acc += row.iter().sum::<f64>();
        }
        if want_dx {
            gemm(pl, co, ol, w.data(), true, dys, false, &mut dcols, 0.0);
            col2im(g, &dcols, &mut dx[s * il..(s + 1) * il]);
        }
    }
    Ok((
        Tensor::new(w.shape().to_vec(), dw)?,
        Tensor::new(vec![co], db)?,
        if want_dx {
            Some(Tensor::new(x.shape().to_vec(), dx)?)
        } else {
            None
        },
    ))
}

fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor, n: usize, units: usize) -> Result<Tensor> {
    let fin = w.shape()[0];
    let mut out = vec![0.0; n * units];
    gemm(n, fin, units, x.data(), false, w.data(), false, &mut out, 0.0);
    for row in out.chunks_mut(units) {
        for (v, bias) in row.iter_mut().zip(b.data()) {
            *v += bias;
        }
    }
    Tensor::new(vec![n, units], out)
}

fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    n: usize,
    units: usize,
    want_dx: bool,
) -> Result<(Tensor, Tensor, Option<Tensor>)> {
    let fin = w.shape()[0];
    let mut dw = vec![0.0; fin * units];
    gemm(fin, n, units, x.data(), true, dy.data(), false, &mut dw, 0.0);
    let mut db = vec![0.0; units];
    for row in dy.data().chunks(units) {
        for (acc, v) in db.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let dx = if want_dx {
        let mut dx = vec![0.0; n * fin];
        gemm(n, units, fin, dy.data(), false, w.data(), true, &mut dx, 0.0);
        Some(Tensor::new(x.shape().to_vec(), dx)?)
    } else {
        None
    };
    Ok((Tensor::new(w.shape().to_vec(), dw)?, Tensor::new(vec![units], db)?, dx))
}

type NormOut = (Tensor, Vec<f64>, Vec<f64>, Option<(Vec<f64>, Vec<f64>)>);

/// Returns the output, `x̂`, per-channel `1/√(σ²+ε)` and, in training mode,
/// the batch mean and (biased) variance.
fn batchnorm_forward(x: &Tensor, p: &[Tensor], state: &[Tensor], eps: f64, mode: Mode) -> Result<NormOut> {
    let (n, c, s) = channels_spatial(x.shape());
    let (gamma, beta) = (p[0].data(), p[1].data());
    let (mean, var, stats) = if mode == Mode::Train {
        if n < 2 {
            return Err(Error::param("batch normalization in training mode needs a batch of at least 2"));
        }
        let m = (n * s) as f64;
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for (k, plane) in x.data().chunks(s).enumerate() {
            mean[k % c] += plane.iter().sum::<f64>();
        }
        mean.iter_mut().for_each(|v| *v /= m);
        for (k, plane) in x.data().chunks(s).enumerate() {
            let mu = mean[k % c];
            var[k % c] += plane.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
        }
        var.iter_mut().for_each(|v| *v /= m);
        (mean.clone(), var.clone(), Some((mean, var)))
    } else {
        (state[0].data().to_vec(), state[1].data().to_vec(), None)
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for (k, (plane, (xh, yy))) in x
        .data()
        .chunks(s)
        .zip(xhat.chunks_mut(s).zip(y.chunks_mut(s)))
        .enumerate()
    {
        let ch = k % c;
        for ((v, h), o) in plane.iter().zip(xh.iter_mut()).zip(yy.iter_mut()) {
            *h = (v - mean[ch]) * inv_std[ch];
            *o = gamma[ch] * *h + beta[ch];
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), y)?, xhat, inv_std, stats))
}

fn batchnorm_backward(
    dy: &Tensor,
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &Tensor,
    batch_stats: bool,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (n, c, s) = channels_spatial(dy.shape());
    let mut sum_dy = vec![0.0; c];
    let mut sum_dy_xhat = vec![0.0; c];
    for (k, (g, h)) in dy.data().chunks(s).zip(xhat.chunks(s)).enumerate() {
        sum_dy[k % c] += g.iter().sum::<f64>();
        sum_dy_xhat[k % c] += g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>();
    }
    let gm = gamma.data();
    let m = (n * s) as f64;
    let mut dx = vec![0.0; dy.len()];
    for (k, ((d, g), h)) in dx.chunks_mut(s).zip(dy.data().chunks(s)).zip(xhat.chunks(s)).enumerate() {
        let ch = k % c;
        let scale = gm[ch] * inv_std[ch];
        for ((o, &gv), &hv) in d.iter_mut().zip(g).zip(h) {
            *o = if batch_stats {
                scale * (gv - sum_dy[ch] / m - hv * sum_dy_xhat[ch] / m)
            } else {
                scale * gv
            };
        }
    }
    Ok((
        Tensor::new(dy.shape().to_vec(), dx)?,
        Tensor::new(vec![c], sum_dy_xhat)?,
        Tensor::new(vec![c], sum_dy)?,
    ))
}
