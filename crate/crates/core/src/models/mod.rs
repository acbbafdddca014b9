//! Model factories and the checkpoint format.

mod checkpoint;
mod factory;

pub use checkpoint::{decode_checkpoint, decode_tensor, encode_checkpoint, encode_tensor, load_checkpoint, save_checkpoint, MAGIC,
    TENSOR_MAGIC, VERSION,};
pub use factory::{
    behavior_clone_layers, binary_vehicle_layers, build_behavior_clone_cnn, build_binary_vehicle_cnn,
    build_mini_fcn_segmenter, build_traffic_sign_cnn, build_traffic_sign_cnn_with_classes, mini_fcn_layers,
    traffic_sign_layers, CLONE_INPUT, FCN_INPUT, SIGN_CLASSES, SIGN_INPUT, VEHICLE_INPUT,
};
