//! Analytic gradients against central finite differences.
//!
//! Each case is a small random model exercising one layer kind, activation
//! or loss. The scalar objective is either the model's training loss or a
//! random weighted sum of its outputs, and every parameter and input element
//! is perturbed by `±h`.
//!
//! Finite differences are meaningless within `h` of a kink (ReLU or ELU at
//! zero, a tie inside a max-pool window), so inputs are redrawn until every
//! such point is at least [`KINK_MARGIN`] away; the number of redraws is
//! reported.

use super::activation::ActivationKind;
use super::graph::{Mode, ModelGraph};
use super::layer::{LayerKind, LayerSpec};
use super::loss::{loss, LossKind};
use crate::error::{Error, Result};
use crate::rng::Prng;
use crate::tensor::{Padding, Tensor};

/// Denominator floor for the relative error, so entries whose true gradient
/// is (near) zero are judged by absolute error instead.
pub const REL_FLOOR: f64 = 1e-4;
pub const KINK_MARGIN: f64 = 1e-3;
const MAX_REDRAWS: usize = 100;

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone)]
pub struct GradcheckConfig {
    pub seeds: usize,
    pub base_seed: u64,
    pub h: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seeds: 20,
            base_seed: 0,
            h: 1e-5,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub max_rel_error: f64,
    pub seeds: usize,
    pub redraws: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub cases: Vec<CaseResult>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.cases {
            s.push_str(&format!(
                "{:<24} max_rel_error {:.3e} seeds {} redraws {} {}\n",
                c.name,
                c.max_rel_error,
                c.seeds,
                c.redraws,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

/// What the scalar objective is made of.
#[derive(Debug, Clone, Copy)]
enum Objective {
    WeightedSum,
    Loss(LossKind),
}

struct Case {
    name: &'static str,
    input: Vec<usize>,
    layers: Vec<LayerSpec>,
    mode: Mode,
    objective: Objective,
}

fn case(name: &'static str, input: &[usize], layers: Vec<LayerSpec>) -> Case {
    Case {
        name,
        input: input.to_vec(),
        layers,
        mode: Mode::Infer,
        objective: Objective::WeightedSum,
    }
}

impl Case {
    fn train(mut self) -> Self {
        self.mode = Mode::Train;
        self
    }

    fn with_loss(mut self, kind: LossKind) -> Self {
        self.objective = Objective::Loss(kind);
        self
    }
}

fn conv(f: usize, k: usize, s: usize) -> LayerSpec {
    LayerSpec::conv(f, k, s, Padding::Same)
}

fn cases() -> Vec<Case> {
    let act = |a: ActivationKind| vec![LayerSpec::dense(5), LayerSpec::activation(a), LayerSpec::dense(3)];
    vec![
        case("conv2d", &[2, 5, 5], vec![conv(3, 3, 1), LayerSpec::conv(2, 2, 2, Padding::Valid)]),
        case("dense", &[6], vec![LayerSpec::dense(5), LayerSpec::dense(3)]),
        case("maxpool", &[2, 6, 6], vec![conv(3, 3, 1), LayerSpec::maxpool(2), conv(2, 3, 1)]),
        case("dropout_infer", &[6], vec![LayerSpec::dense(5), LayerSpec::dropout(0.4), LayerSpec::dense(3)]),
        case("dropout_train", &[6], vec![LayerSpec::dense(5), LayerSpec::dropout(0.4), LayerSpec::dense(3)]).train(),
        // An ELU sits between the convolution and the normalization: a bias
        // feeding batch norm directly is cancelled by the mean subtraction,
        // leaving a gradient that is zero by construction.
        case(
            "batchnorm_conv_train",
            &[2, 4, 4],
            vec![conv(3, 3, 1), LayerSpec::elu(), LayerSpec::batchnorm(), conv(2, 3, 1)],
        )
        .train(),
        case(
            "batchnorm_dense_train",
            &[5],
            vec![LayerSpec::dense(4), LayerSpec::elu(), LayerSpec::batchnorm(), LayerSpec::dense(3)],
        )
        .train(),
        case("batchnorm_infer", &[2, 4, 4], vec![conv(3, 3, 1), LayerSpec::batchnorm(), conv(2, 3, 1)]),
        case("flatten", &[2, 3, 3], vec![LayerSpec::conv(2, 2, 1, Padding::Valid), LayerSpec::flatten(), LayerSpec::dense(3)]),
        case("global_avg_pool", &[2, 4, 4], vec![conv(3, 3, 1), LayerSpec::global_avg_pool(), LayerSpec::dense(2)]),
        case("sigmoid", &[6], act(ActivationKind::Sigmoid)),
        case("relu", &[6], act(ActivationKind::Relu)),
        case("elu", &[6], act(ActivationKind::Elu { alpha: 0.7 })),
        case("softmax", &[6], act(ActivationKind::Softmax)),
        case("upsample", &[2, 3, 3], vec![conv(2, 3, 1), LayerSpec::upsample(2), conv(2, 3, 1)]),
        case(
            "concat_merge",
            &[2, 4, 4],
            vec![
                conv(3, 3, 1).with_tap("skip"),
                conv(3, 3, 2),
                LayerSpec::upsample(2),
                LayerSpec::concat("skip"),
                conv(2, 3, 1),
            ],
        ),
        case("mse", &[4], vec![LayerSpec::dense(3), LayerSpec::dense(2)]).with_loss(LossKind::Mse),
        case("categorical_ce", &[4], vec![LayerSpec::dense(5), LayerSpec::softmax(), LayerSpec::flatten()])
            .with_loss(LossKind::CategoricalCe),
        case("categorical_ce_softmax", &[4], vec![LayerSpec::dense(5), LayerSpec::softmax()])
            .with_loss(LossKind::CategoricalCe),
        case(
            "cross_entropy",
            &[2, 3, 3],
            vec![LayerSpec::conv(2, 1, 1, Padding::Valid), LayerSpec::elu(), LayerSpec::softmax(), LayerSpec::dropout(0.0)],
        )
        .with_loss(LossKind::CrossEntropy),
        case(
            "cross_entropy_softmax",
            &[2, 3, 3],
            // Softmax runs along the last axis, where a per-channel bias is a
            // uniform shift; the ELU keeps that bias observable.
            vec![LayerSpec::conv(2, 1, 1, Padding::Valid), LayerSpec::elu(), LayerSpec::softmax()],
        )
        .with_loss(LossKind::CrossEntropy),
        case("binary_ce", &[4], vec![LayerSpec::dense(3), LayerSpec::sigmoid(), LayerSpec::flatten()])
            .with_loss(LossKind::BinaryCe),
        case("binary_ce_sigmoid", &[4], vec![LayerSpec::dense(3), LayerSpec::sigmoid()]).with_loss(LossKind::BinaryCe),
    ]
}

fn random(shape: &[usize], prng: &mut Prng, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| prng.uniform(lo, hi)).collect()).expect("positive shape")
}

/// Targets matching a loss: soft distributions for the cross-entropies,
/// `{0,1}` labels for binary CE, arbitrary reals for MSE.
fn target(kind: LossKind, shape: &[usize], prng: &mut Prng) -> Tensor {
    match kind {
        LossKind::Mse => random(shape, prng, -1.0, 1.0),
        LossKind::BinaryCe => random(shape, prng, 0.0, 1.0).map(|v| if v < 0.5 { 0.0 } else { 1.0 }),
        LossKind::CategoricalCe | LossKind::CrossEntropy => {
            let mut t = random(shape, prng, 0.05, 1.0);
            let row = *shape.last().expect("rank ≥ 1");
            for r in t.data_mut().chunks_mut(row) {
                let s: f64 = r.iter().sum();
                r.iter_mut().for_each(|v| *v /= s);
            }
            t
        }
    }
}

/// Distance from the nearest non-differentiable point of every ReLU, ELU
/// and max-pool layer.
fn kink_margin(model: &ModelGraph, x: &Tensor, mode: Mode, dropout_seed: u64) -> Result<f64> {
    let mut margin = f64::INFINITY;
    for (k, layer) in model.layers().iter().enumerate() {
        let relevant = matches!(
            layer.kind,
            LayerKind::Activation(ActivationKind::Relu | ActivationKind::Elu { .. }) | LayerKind::MaxPool { .. }
        );
        if !relevant {
            continue;
        }
        let mut prefix = ModelGraph::from_parts(
            model.input_shape(),
            model.layers()[..k].to_vec(),
            model.params()[..k].to_vec(),
            model.state()[..k].to_vec(),
        )?;
        prefix.set_mode(mode);
        let (z, _) = prefix.forward(x.clone(), &mut Prng::new(dropout_seed))?;
        match &layer.kind {
            LayerKind::MaxPool { window, stride } => {
                let s = z.shape();
                let (h, w) = (s[2], s[3]);
                for plane in z.data().chunks(h * w) {
                    let mut oy = 0;
                    while oy * stride.0 + window.0 <= h {
                        let mut ox = 0;
                        while ox * stride.1 + window.1 <= w {
                            let mut vals: Vec<f64> = (0..window.0)
                                .flat_map(|dy| (0..window.1).map(move |dx| (dy, dx)))
                                .map(|(dy, dx)| plane[(oy * stride.0 + dy) * w + ox * stride.1 + dx])
                                .collect();
                            vals.sort_by(|a, b| b.total_cmp(a));
                            margin = margin.min(vals[0] - vals[1]);
                            ox += 1;
                        }
                        oy += 1;
                    }
                }
            }
            _ => {
                margin = margin.min(z.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
            }
        }
    }
    Ok(margin)
}

struct Instance {
    model: ModelGraph,
    x: Tensor,
    target: Option<Tensor>,
    weights: Tensor,
    dropout_seed: u64,
}

impl Instance {
    /// Central difference of the objective between two perturbed models or
    /// inputs. For the weighted sum the outputs are differenced elementwise
    /// before weighting, which keeps cancellation error near one ulp per
    /// output rather than one ulp of the whole sum.
    fn central_difference(
        &self,
        plus: (&ModelGraph, &Tensor),
        minus: (&ModelGraph, &Tensor),
        objective: Objective,
        h: f64,
    ) -> Result<f64> {
        let run = |(model, x): (&ModelGraph, &Tensor)| -> Result<Tensor> {
            let mut m = model.clone();
            Ok(m.forward(x.clone(), &mut Prng::new(self.dropout_seed))?.0)
        };
        let (op, om) = (run(plus)?, run(minus)?);
        let diff = match objective {
            Objective::WeightedSum => op
                .data()
                .iter()
                .zip(om.data())
                .zip(self.weights.data())
                .map(|((a, b), w)| (a - b) * w)
                .sum::<f64>(),
            Objective::Loss(kind) => {
                let y = self.target.as_ref().expect("loss cases have targets");
                loss(kind, y, &op)? - loss(kind, y, &om)?
            }
        };
        Ok(diff / (2.0 * h))
    }
}

fn build_instance(c: &Case, seed: u64) -> Result<(Instance, usize)> {
    const BATCH: usize = 3;
    let mut prng = Prng::new(seed);
    for redraws in 0..MAX_REDRAWS {
        let mut model = ModelGraph::new(&c.input, c.layers.clone(), &mut prng)?;
        model.set_mode(c.mode);
        // Move biases, batch-norm affine terms and running statistics off
        // their initial values so every code path is exercised.
        for p in model.params_mut().iter_mut().flatten() {
            if p.rank() == 1 {
                *p = random(p.shape(), &mut prng, -1.5, 1.5);
            }
        }
        for st in model.state_mut().iter_mut().filter(|s| !s.is_empty()) {
            st[0] = random(st[0].shape(), &mut prng, -0.5, 0.5);
            st[1] = random(st[1].shape(), &mut prng, 0.5, 2.0);
        }
        let mut xs = vec![BATCH];
        xs.extend_from_slice(&c.input);
        let x = random(&xs, &mut prng, -1.0, 1.0);
        let mut ys = vec![BATCH];
        ys.extend_from_slice(model.output_shape());
        let target = match c.objective {
            Objective::Loss(kind) => Some(target(kind, &ys, &mut prng)),
            Objective::WeightedSum => None,
        };
        let weights = random(&ys, &mut prng, -1.0, 1.0);
        let dropout_seed = prng.next_u64();
        if kink_margin(&model, &x, c.mode, dropout_seed)? >= KINK_MARGIN {
            return Ok((
                Instance {
                    model,
                    x,
                    target,
                    weights,
                    dropout_seed,
                },
                redraws,
            ));
        }
    }
    Err(Error::param(format!(
        "{}: no kink-free draw after {MAX_REDRAWS} attempts",
        c.name
    )))
}

/// Largest relative error over every parameter and input element.
fn check_instance(inst: &Instance, objective: Objective, h: f64) -> Result<f64> {
    let mut model = inst.model.clone();
    let mut prng = Prng::new(inst.dropout_seed);
    let grads = match objective {
        Objective::Loss(kind) => {
            let y = inst.target.as_ref().expect("loss cases have targets");
            model.loss_and_gradients(inst.x.clone(), y, kind, &mut prng, true)?.2
        }
        Objective::WeightedSum => {
            let (_, trace) = model.forward(inst.x.clone(), &mut prng)?;
            model.backward(&trace, inst.weights.clone())?
        }
    };
    let mut worst: f64 = 0.0;
    for (l, layer_grads) in grads.params.iter().enumerate() {
        for (t, g) in layer_grads.iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = inst.model.clone();
                plus.params_mut()[l][t].data_mut()[k] += h;
                let mut minus = inst.model.clone();
                minus.params_mut()[l][t].data_mut()[k] -= h;
                let fd = inst.central_difference((&plus, &inst.x), (&minus, &inst.x), objective, h)?;
                worst = worst.max(relative_error(g.data()[k], fd));
            }
        }
    }
    let dx = grads.input.expect("input gradient requested");
    for k in 0..inst.x.len() {
        let mut xp = inst.x.clone();
        xp.data_mut()[k] += h;
        let mut xm = inst.x.clone();
        xm.data_mut()[k] -= h;
        let fd = inst.central_difference((&inst.model, &xp), (&inst.model, &xm), objective, h)?;
        worst = worst.max(relative_error(dx.data()[k], fd));
    }
    Ok(worst)
}

/// Run every case over `config.seeds` seeds.
pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    if config.seeds == 0 || !(config.h > 0.0) {
        return Err(Error::param("gradcheck needs ≥ 1 seed and h > 0"));
    }
    let mut out = Vec::new();
    for (ci, c) in cases().iter().enumerate() {
        let mut worst: f64 = 0.0;
        let mut redraws = 0;
        for s in 0..config.seeds {
            let seed = config
                .base_seed
                .wrapping_add((ci as u64) << 32)
                .wrapping_add(s as u64);
            let (inst, r) = build_instance(c, seed)?;
            redraws += r;
            worst = worst.max(check_instance(&inst, c.objective, config.h)?);
        }
        out.push(CaseResult {
            name: c.name.to_string(),
            max_rel_error: worst,
            seeds: config.seeds,
            redraws,
            passed: worst < config.tolerance,
        });
    }
    Ok(GradcheckReport {
        cases: out,
        tolerance: config.tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_definition() {
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1e-9, 0.0), 1e-9 / REL_FLOOR);
    }

    #[test]
    fn every_case_passes_on_a_few_seeds() {
        let report = run_gradcheck(&GradcheckConfig {
            seeds: 2,
            ..Default::default()
        })
        .unwrap();
        assert!(report.passed(), "{}", report.to_text());
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // The harness itself must flag a mismatch: compare analytic
        // gradients for one weighting against differences under another.
        let c = case("dense", &[3], vec![LayerSpec::dense(2)]);
        let (mut inst, _) = build_instance(&c, 1).unwrap();
        assert!(check_instance(&inst, c.objective, 1e-5).unwrap() < 1e-6);
        let mut m = inst.model.clone();
        let (_, tr) = m.forward(inst.x.clone(), &mut Prng::new(inst.dropout_seed)).unwrap();
        let g = m.backward(&tr, inst.weights.clone()).unwrap().params[0][0].data()[0];
        inst.weights = inst.weights.scale(2.0);
        let mut plus = inst.model.clone();
        plus.params_mut()[0][0].data_mut()[0] += 1e-5;
        let mut minus = inst.model.clone();
        minus.params_mut()[0][0].data_mut()[0] -= 1e-5;
        let fd = inst
            .central_difference((&plus, &inst.x), (&minus, &inst.x), c.objective, 1e-5)
            .unwrap();
        assert!(relative_error(g, fd) > 0.1);
    }
}
