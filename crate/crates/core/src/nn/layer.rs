use super::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{ConvGeometry, Padding, PoolGeometry, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    /// Weights `filters×C×K_h×K_w`, bias `filters`.
    Conv2D {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
    },
    /// Weights `in×units`, bias `units`; input must be flat.
    Dense { units: usize },
    MaxPool {
        window: (usize, usize),
        stride: (usize, usize),
    },
    /// Inverted dropout: kept activations are scaled by `1/(1−rate)` during
    /// training, identity at inference.
    Dropout { rate: f64 },
    /// Per-channel (or per-feature for flat inputs) normalization with
    /// learned `γ, β` and running mean/variance for inference.
    BatchNorm { momentum: f64, epsilon: f64 },
    Flatten,
    GlobalAvgPool,
    Activation(ActivationKind),
    /// Bilinear upsampling by an integer factor.
    Upsample { factor: usize },
    /// Concatenate the current activation (first) with a tapped earlier
    /// output along channels.
    ConcatMerge { source: String },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv2D { .. } => "conv2d",
            LayerKind::Dense { .. } => "dense",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::BatchNorm { .. } => "batchnorm",
            LayerKind::Flatten => "flatten",
            LayerKind::GlobalAvgPool => "global_avg_pool",
            LayerKind::Activation(_) => "activation",
            LayerKind::Upsample { .. } => "upsample",
            LayerKind::ConcatMerge { .. } => "concat_merge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Name under which this layer's output is available to a later
    /// [`LayerKind::ConcatMerge`].
    pub tap: Option<String>,
}

impl LayerSpec {
    pub fn new(kind: LayerKind) -> Self {
        Self { kind, tap: None }
    }

    pub fn conv(filters: usize, kernel: usize, stride: usize, padding: Padding) -> Self {
        Self::new(LayerKind::Conv2D {
            filters,
            kernel: (kernel, kernel),
            stride: (stride, stride),
            padding,
        })
    }

    pub fn dense(units: usize) -> Self {
        Self::new(LayerKind::Dense { units })
    }

    pub fn maxpool(size: usize) -> Self {
        Self::new(LayerKind::MaxPool {
            window: (size, size),
            stride: (size, size),
        })
    }

    pub fn dropout(rate: f64) -> Self {
        Self::new(LayerKind::Dropout { rate })
    }

    pub fn batchnorm() -> Self {
        Self::new(LayerKind::BatchNorm {
            momentum: 0.9,
            epsilon: 1e-5,
        })
    }

    pub fn flatten() -> Self {
        Self::new(LayerKind::Flatten)
    }

    pub fn global_avg_pool() -> Self {
        Self::new(LayerKind::GlobalAvgPool)
    }

    pub fn activation(kind: ActivationKind) -> Self {
        Self::new(LayerKind::Activation(kind))
    }

    pub fn relu() -> Self {
        Self::activation(ActivationKind::Relu)
    }

    pub fn elu() -> Self {
        Self::activation(ActivationKind::Elu { alpha: 1.0 })
    }

    pub fn sigmoid() -> Self {
        Self::activation(ActivationKind::Sigmoid)
    }

    pub fn softmax() -> Self {
        Self::activation(ActivationKind::Softmax)
    }

    pub fn upsample(factor: usize) -> Self {
        Self::new(LayerKind::Upsample { factor })
    }

    pub fn concat(source: &str) -> Self {
        Self::new(LayerKind::ConcatMerge {
            source: source.to_string(),
        })
    }

    pub fn with_tap(mut self, name: &str) -> Self {
        self.tap = Some(name.to_string());
        self
    }

    /// Hyperparameter checks that do not depend on the input shape.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            LayerKind::Conv2D {
                filters,
                kernel,
                stride,
                ..
            } => {
                if *filters == 0 || kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0 {
                    return Err(Error::param("conv filters, kernel and stride must be positive"));
                }
            }
            LayerKind::Dense { units } if *units == 0 => return Err(Error::param("dense units must be positive")),
            LayerKind::MaxPool { window, stride } => {
                if window.0 == 0 || window.1 == 0 || stride.0 == 0 || stride.1 == 0 {
                    return Err(Error::param("pool window and stride must be positive"));
                }
            }
            LayerKind::Dropout { rate } if !(0.0..1.0).contains(rate) => {
                return Err(Error::param(format!("dropout rate must be in [0, 1), got {rate}")));
            }
            LayerKind::BatchNorm { momentum, epsilon } => {
                if !(*epsilon > 0.0) {
                    return Err(Error::param(format!("batchnorm epsilon must be > 0, got {epsilon}")));
                }
                if !(0.0..=1.0).contains(momentum) {
                    return Err(Error::param(format!("batchnorm momentum must be in [0, 1], got {momentum}")));
                }
            }
            LayerKind::Activation(a) => a.validate()?,
            LayerKind::Upsample { factor } if *factor == 0 => {
                return Err(Error::param("upsample factor must be ≥ 1"));
            }
            _ => {}
        }
        Ok(())
    }
}

pub(crate) fn spatial(shape: &[usize]) -> std::result::Result<(usize, usize, usize), String> {
    match *shape {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(format!("expected C×H×W input, got {shape:?}")),
    }
}

/// Per-sample output shape of `kind` applied to a per-sample `input` shape.
/// `tap` is the shape of the merge source for [`LayerKind::ConcatMerge`].
pub(crate) fn output_shape(
    kind: &LayerKind,
    input: &[usize],
    tap: Option<&[usize]>,
) -> std::result::Result<Vec<usize>, String> {
    Ok(match kind {
        LayerKind::Conv2D {
            filters,
            kernel,
            stride,
            padding,
        } => {
            let g = ConvGeometry::new(spatial(input)?, *kernel, *stride, *padding).map_err(|e| e.to_string())?;
            vec![*filters, g.out_h, g.out_w]
        }
        LayerKind::Dense { units } => {
            if input.len() != 1 {
                return Err(format!("dense needs a flat input, got {input:?}"));
            }
            vec![*units]
        }
        LayerKind::MaxPool { window, stride } => {
            let (c, h, w) = spatial(input)?;
            let g = PoolGeometry::new((h, w), *window, *stride).map_err(|e| e.to_string())?;
            vec![c, g.out_h, g.out_w]
        }
        LayerKind::Flatten => vec![input.iter().product()],
        LayerKind::GlobalAvgPool => vec![spatial(input)?.0],
        LayerKind::Upsample { factor } => {
            let (c, h, w) = spatial(input)?;
            vec![c, h * factor, w * factor]
        }
        LayerKind::ConcatMerge { source } => {
            let (c, h, w) = spatial(input)?;
            let tap = tap.ok_or_else(|| format!("unknown tap `{source}`"))?;
            let (ct, ht, wt) = spatial(tap)?;
            if (h, w) != (ht, wt) {
                return Err(format!("tap `{source}` is {ht}×{wt} but the current activation is {h}×{w}"));
            }
            vec![c + ct, h, w]
        }
        LayerKind::BatchNorm { .. } => {
            if input.len() != 1 && input.len() != 3 {
                return Err(format!("batchnorm needs a flat or C×H×W input, got {input:?}"));
            }
            input.to_vec()
        }
        LayerKind::Dropout { .. } | LayerKind::Activation(_) => input.to_vec(),
    })
}

/// Shapes of the trainable parameters, then of the non-trainable state.
pub(crate) fn param_shapes(kind: &LayerKind, input: &[usize]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    match kind {
        LayerKind::Conv2D { filters, kernel, .. } => (
            vec![vec![*filters, input[0], kernel.0, kernel.1], vec![*filters]],
            vec![],
        ),
        LayerKind::Dense { units } => (vec![vec![input[0], *units], vec![*units]], vec![]),
        LayerKind::BatchNorm { .. } => {
            let c = input[0];
            (vec![vec![c], vec![c]], vec![vec![c], vec![c]])
        }
        _ => (vec![], vec![]),
    }
}

/// Initial parameters and state. Weights feeding ReLU/ELU use He normal
/// (`std = √(2/fan_in)`), others Glorot uniform; biases and `β` start at 0,
/// `γ` and the running variance at 1.
pub(crate) fn init_params(
    kind: &LayerKind,
    input: &[usize],
    next: Option<&LayerKind>,
    prng: &mut Prng,
) -> (Vec<Tensor>, Vec<Tensor>) {
    let (pshapes, sshapes) = param_shapes(kind, input);
    let he = matches!(
        next,
        Some(LayerKind::Activation(ActivationKind::Relu | ActivationKind::Elu { .. }))
    );
    let weight = |shape: &[usize], fan_in: usize, fan_out: usize, prng: &mut Prng| {
        let n: usize = shape.iter().product();
        let data = if he {
            let std = (2.0 / fan_in as f64).sqrt();
            (0..n).map(|_| std * prng.normal()).collect()
        } else {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..n).map(|_| prng.uniform(-lim, lim)).collect()
        };
        Tensor::new(shape.to_vec(), data).expect("shape from spec")
    };
    match kind {
        LayerKind::Conv2D { kernel, .. } => {
            let rf = kernel.0 * kernel.1;
            let w = weight(&pshapes[0], input[0] * rf, pshapes[0][0] * rf, prng);
            (vec![w, Tensor::zeros(&pshapes[1])], vec![])
        }
        LayerKind::Dense { units } => {
            let w = weight(&pshapes[0], input[0], *units, prng);
            (vec![w, Tensor::zeros(&pshapes[1])], vec![])
        }
        LayerKind::BatchNorm { .. } => (
            vec![Tensor::full(&pshapes[0], 1.0), Tensor::zeros(&pshapes[1])],
            vec![Tensor::zeros(&sshapes[0]), Tensor::full(&sshapes[1], 1.0)],
        ),
        _ => (vec![], vec![]),
    }
}
