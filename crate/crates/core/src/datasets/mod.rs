//! Dataset loading, splitting, augmentation and synthetic generators.

mod augment;
mod loaders;
mod synth;

pub use augment::{
    augment_classification, preprocess_driving, preprocess_frame, resolve_image_path, AugmentConfig, Camera,
    DRIVING_HEIGHT, DRIVING_WIDTH,
};
pub use loaders::{
    binarize_mask, load_class_dirs, load_classification, load_mask, load_rgb_tensor, load_seg_pairs,
    load_segmentation, parse_driving_log, parse_driving_log_str, split_train_test, ClassifiedImageSet,
    DrivingRecord, SegmentationPairSet, MASK_THRESHOLD,
};
pub use synth::{
    parse_lane_sidecar, sample_stem, synth_generate, synth_lane_frame, synth_road, synth_sign, synth_vehicle,
    SynthTask, LANE_EXTENT, LANE_HEIGHT, LANE_SIDECAR, LANE_WIDTH, SEG_SIZE, SIGN_SIZE, SYNTH_SIGN_CLASSES,
    VEHICLE_SIZE, WHITE_LINE, YELLOW_LINE,
};
