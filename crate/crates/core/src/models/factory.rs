use crate::error::Result;
use crate::nn::{LayerSpec, ModelGraph};
use crate::rng::Prng;
use crate::tensor::Padding;

pub const SIGN_INPUT: [usize; 3] = [3, 32, 32];
pub const SIGN_CLASSES: usize = 43;
pub const CLONE_INPUT: [usize; 3] = [3, 66, 200];
pub const FCN_INPUT: [usize; 3] = [3, 128, 128];
pub const VEHICLE_INPUT: [usize; 3] = [3, 32, 32];

fn same(filters: usize, kernel: usize) -> LayerSpec {
    LayerSpec::conv(filters, kernel, 1, Padding::Same)
}

/// Three `conv 3×3 same → ReLU → maxpool 2×2 → batch norm → dropout 0.3`
/// blocks with 64, 128 and 512 filters: 32×32 → 16 → 8 → 4.
fn sign_trunk() -> Vec<LayerSpec> {
    [64, 128, 512]
        .into_iter()
        .flat_map(|f| {
            [
                same(f, 3),
                LayerSpec::relu(),
                LayerSpec::maxpool(2),
                LayerSpec::batchnorm(),
                LayerSpec::dropout(0.3),
            ]
        })
        .collect()
}

/// Traffic-sign classifier layers with a `classes`-way softmax head.
pub fn traffic_sign_layers(classes: usize) -> Vec<LayerSpec> {
    let mut l = sign_trunk();
    l.push(LayerSpec::flatten());
    for units in [4000, 4000, 1000] {
        l.push(LayerSpec::dense(units));
        l.push(LayerSpec::relu());
    }
    l.push(LayerSpec::dense(classes));
    l.push(LayerSpec::softmax());
    l
}

/// Steering regressor: five ELU convolutions (5×5 stride 2 ×3, then 3×3
/// stride 1 ×2), dropout, and a 100-50-10-1 dense head with a linear output.
pub fn behavior_clone_layers() -> Vec<LayerSpec> {
    let mut l = Vec::new();
    for (f, k, s) in [(24, 5, 2), (36, 5, 2), (48, 5, 2), (64, 3, 1), (64, 3, 1)] {
        l.push(LayerSpec::conv(f, k, s, Padding::Valid));
        l.push(LayerSpec::elu());
    }
    l.push(LayerSpec::dropout(0.5));
    l.push(LayerSpec::flatten());
    for units in [100, 50, 10] {
        l.push(LayerSpec::dense(units));
        l.push(LayerSpec::elu());
    }
    l.push(LayerSpec::dense(1));
    l
}

/// Five-block encoder with taps `pool3`, `pool4`, `pool5`; the decoder fuses
/// pool5 with pool4, then with pool3, and upsamples ×8 to a one-channel
/// sigmoid mask.
pub fn mini_fcn_layers() -> Vec<LayerSpec> {
    let mut l = Vec::new();
    for (i, f) in [16, 32, 64, 128, 128].into_iter().enumerate() {
        l.push(same(f, 3));
        l.push(LayerSpec::relu());
        let pool = LayerSpec::maxpool(2);
        l.push(if i >= 2 { pool.with_tap(&format!("pool{}", i + 1)) } else { pool });
    }
    l.extend([
        LayerSpec::upsample(2),
        LayerSpec::concat("pool4"),
        same(64, 3),
        LayerSpec::relu(),
        LayerSpec::upsample(2),
        LayerSpec::concat("pool3"),
        same(32, 3),
        LayerSpec::relu(),
        LayerSpec::upsample(8),
        same(1, 1),
        LayerSpec::sigmoid(),
    ]);
    l
}

/// The traffic-sign convolutional trunk with a single sigmoid unit.
pub fn binary_vehicle_layers() -> Vec<LayerSpec> {
    let mut l = sign_trunk();
    l.extend([LayerSpec::flatten(), LayerSpec::dense(1), LayerSpec::sigmoid()]);
    l
}

pub fn build_traffic_sign_cnn(prng: &mut Prng) -> Result<ModelGraph> {
    build_traffic_sign_cnn_with_classes(SIGN_CLASSES, prng)
}

pub fn build_traffic_sign_cnn_with_classes(classes: usize, prng: &mut Prng) -> Result<ModelGraph> {
    ModelGraph::new(&SIGN_INPUT, traffic_sign_layers(classes), prng)
}

pub fn build_behavior_clone_cnn(prng: &mut Prng) -> Result<ModelGraph> {
    ModelGraph::new(&CLONE_INPUT, behavior_clone_layers(), prng)
}

pub fn build_mini_fcn_segmenter(prng: &mut Prng) -> Result<ModelGraph> {
    ModelGraph::new(&FCN_INPUT, mini_fcn_layers(), prng)
}

pub fn build_binary_vehicle_cnn(prng: &mut Prng) -> Result<ModelGraph> {
    ModelGraph::new(&VEHICLE_INPUT, binary_vehicle_layers(), prng)
}
