//! Classical lane detection: color selection, grayscale, Gaussian blur,
//! Canny edges, region-of-interest masking, Hough line voting, lane fitting
//! and overlay.
//!
//! Coordinates are pixels with the origin at the top-left corner, `x` to the
//! right and `y` down.

mod config;
mod edges;
mod hough;
mod lines;
mod overlay;
mod pipeline;
mod roi;

pub use config::PipelineConfig;
pub use edges::{canny, color_select, detect_edges, hysteresis, sobel_gradients, EdgeMap};
pub use hough::{hough_accumulate, hough_transform, HoughAccumulator, HoughPeak};
pub use lines::{peaks_to_lanes, LaneLines, LineSegment};
pub use overlay::{overlay_lanes, rasterize_segment, LANE_COLOR};
pub use pipeline::{run_pipeline, PipelineOutput, StageImages, STAGE_NAMES};
pub use roi::{roi_mask, roi_mask_image, RoiPolygon};

use crate::error::Result;
use crate::imaging::{self, Image};
use crate::tensor::Tensor;

/// Grayscale image as an `H×W` tensor of byte-valued intensities.
pub fn gray_field(image: &Image) -> Result<Tensor> {
    let gray = imaging::to_grayscale(image)?;
    gray.to_tensor().into_reshaped(&[gray.height(), gray.width()])
}
