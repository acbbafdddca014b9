use driveperc::datasets::{synth_sign, synth_vehicle};
use driveperc::models::{build_binary_vehicle_cnn, build_traffic_sign_cnn};
use driveperc::nn::{predict_batched, train_epoch, LossKind, ModelGraph, OptimizerState, Samples};
use driveperc::{Prng, Tensor};

fn stack(xs: &[Tensor]) -> Tensor {
    Tensor::stack(&xs.iter().collect::<Vec<_>>()).unwrap()
}

/// Train full-batch until `correct` says every sample is right; returns the
/// epoch count or `None` after `max_epochs`.
fn overfit(
    model: &mut ModelGraph,
    data: &Samples,
    loss: LossKind,
    max_epochs: usize,
    prng: &mut Prng,
    correct: impl Fn(&Tensor) -> usize,
) -> Option<usize> {
    let mut opt = OptimizerState::adam(0.001);
    for epoch in 1..=max_epochs {
        train_epoch(model, data, data.len(), loss, &mut opt, prng).unwrap();
        let pred = predict_batched(model, &data.x, data.len()).unwrap();
        if correct(&pred) == data.len() {
            return Some(epoch);
        }
    }
    None
}

#[test]
fn sign_model_memorizes_random_labels() {
    let mut p = Prng::new(21);
    let n = 16;
    let xs: Vec<Tensor> = (0..n).map(|i| synth_sign(i % 10, &mut p).normalize()).collect();
    // Labels drawn independently of the images, over all 43 outputs.
    let labels: Vec<usize> = (0..n).map(|_| p.below(43)).collect();
    let mut y = vec![0.0; n * 43];
    for (i, &k) in labels.iter().enumerate() {
        y[i * 43 + k] = 1.0;
    }
    let data = Samples::new(stack(&xs), Tensor::new(vec![n, 43], y).unwrap()).unwrap();
    let mut model = build_traffic_sign_cnn(&mut p).unwrap();
    let epochs = overfit(&mut model, &data, LossKind::CategoricalCe, 200, &mut p, |pred| {
        pred.argmax_rows().iter().zip(&labels).filter(|(a, b)| a == b).count()
    });
    eprintln!("sign model: {epochs:?} epochs");
    assert!(epochs.is_some(), "16 random labels not memorized in 200 epochs");
}

#[test]
fn vehicle_model_overfits_sixteen_samples() {
    let mut p = Prng::new(22);
    let n = 16;
    let xs: Vec<Tensor> = (0..n).map(|i| synth_vehicle(i % 2 == 0, &mut p).normalize()).collect();
    let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
    let data = Samples::new(stack(&xs), Tensor::new(vec![n, 1], y.clone()).unwrap()).unwrap();
    let mut model = build_binary_vehicle_cnn(&mut p).unwrap();
    let epochs = overfit(&mut model, &data, LossKind::BinaryCe, 200, &mut p, |pred| {
        pred.data().iter().zip(&y).filter(|(s, t)| (**s > 0.5) == (**t > 0.5)).count()
    });
    eprintln!("vehicle model: {epochs:?} epochs");
    assert!(epochs.is_some(), "16 samples not fitted in 200 epochs");
    let pred = predict_batched(&model, &data.x, n).unwrap();
    assert!(pred.data().iter().all(|&s| s > 0.0 && s < 1.0));
}
