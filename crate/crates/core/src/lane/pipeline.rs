use super::{
    detect_edges, gray_field, hough_accumulate, overlay_lanes, peaks_to_lanes, roi_mask, LaneLines,
    PipelineConfig, RoiPolygon,
};
use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur_tensor, Image, PixelFormat};

pub const STAGE_NAMES: [&str; 6] = ["gray", "blur", "canny", "roi", "hough", "overlay"];

/// Intermediate images, one per entry of [`STAGE_NAMES`].
#[derive(Debug, Clone)]
pub struct StageImages {
    pub gray: Image,
    pub blur: Image,
    pub canny: Image,
    pub roi: Image,
    pub hough: Image,
    pub overlay: Image,
}

impl StageImages {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Image)> {
        STAGE_NAMES.into_iter().zip([
            &self.gray,
            &self.blur,
            &self.canny,
            &self.roi,
            &self.hough,
            &self.overlay,
        ])
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub lanes: LaneLines,
    pub annotated: Image,
    pub stages: Option<StageImages>,
}

/// grayscale → blur → Canny → ROI mask → Hough → lane fit → overlay.
/// Errors are wrapped with the name of the failing stage.
pub fn run_pipeline(image: &Image, config: &PipelineConfig, keep_stages: bool) -> Result<PipelineOutput> {
    image.require(PixelFormat::Rgb8).map_err(|e| e.in_stage("input"))?;
    config.validate()?;
    let (w, h) = (image.width(), image.height());

    let gray = gray_field(image).map_err(|e| e.in_stage("gray"))?;
    let spec = config.blur_spec()?;
    let blurred = gaussian_blur_tensor(&gray, &spec).map_err(|e| e.in_stage("blur"))?;
    let edges = detect_edges(&blurred, config.canny_low, config.canny_high).map_err(|e| e.in_stage("canny"))?;
    let poly = RoiPolygon::from_fractions(&config.roi, w, h).map_err(|e| e.in_stage("roi"))?;
    let masked = roi_mask(&edges, &poly).map_err(|e| e.in_stage("roi"))?;
    let acc = hough_accumulate(&masked, config.hough_r_res, config.theta_res()).map_err(|e| e.in_stage("hough"))?;
    let lanes = peaks_to_lanes(&acc.peaks(config.hough_threshold), config, w, h);
    let annotated = overlay_lanes(image, &lanes, config.overlay_thickness).map_err(|e| e.in_stage("overlay"))?;

    let stages = if keep_stages {
        let as_image = |t| Image::from_tensor(t).map_err(|e: Error| e.in_stage("dump"));
        Some(StageImages {
            gray: as_image(&gray)?,
            blur: as_image(&blurred)?,
            canny: edges.to_image(),
            roi: masked.to_image(),
            hough: acc.to_image(),
            overlay: annotated.clone(),
        })
    } else {
        None
    };
    Ok(PipelineOutput {
        lanes,
        annotated,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lane::{LineSegment, LANE_COLOR};

    fn road(color: [u8; 3]) -> (Image, LineSegment, LineSegment) {
        let (w, h) = (320, 180);
        let mut img = Image::filled(w, h, PixelFormat::Rgb8, &[60, 60, 60]).unwrap();
        let left = LineSegment::new(50.0, 179.0, 145.0, 107.4);
        let right = LineSegment::new(270.0, 179.0, 175.0, 107.4);
        for seg in [left, right] {
            let painted = overlay_lanes(
                &img,
                &LaneLines {
                    left: Some(seg),
                    right: None,
                },
                5,
            )
            .unwrap();
            for (dst, src) in img.pixels_mut().chunks_mut(3).zip(painted.pixels().chunks(3)) {
                if src == LANE_COLOR {
                    dst.copy_from_slice(&color);
                }
            }
        }
        (img, left, right)
    }

    #[test]
    fn black_frame_has_no_lanes() {
        let img = Image::filled(64, 48, PixelFormat::Rgb8, &[0, 0, 0]).unwrap();
        let out = run_pipeline(&img, &PipelineConfig::default(), true).unwrap();
        assert_eq!(out.lanes, LaneLines::default());
        assert_eq!(out.annotated, img);
        assert_eq!(out.stages.unwrap().iter().count(), 6);
    }

    #[test]
    fn two_lane_road_white_and_yellow() {
        for color in [[255, 255, 255], [255, 210, 0]] {
            let (img, left, right) = road(color);
            let out = run_pipeline(&img, &PipelineConfig::default(), false).unwrap();
            let l = out.lanes.left.expect("left lane");
            let r = out.lanes.right.expect("right lane");
            assert!(l.endpoint_error(&left) <= 3.0, "{l:?} vs {left:?}");
            assert!(r.endpoint_error(&right) <= 3.0, "{r:?} vs {right:?}");
        }
    }

    #[test]
    fn deterministic_and_rejects_gray() {
        let (img, _, _) = road([255, 255, 255]);
        let a = run_pipeline(&img, &PipelineConfig::default(), false).unwrap();
        let b = run_pipeline(&img, &PipelineConfig::default(), false).unwrap();
        assert_eq!(a.lanes, b.lanes);
        assert_eq!(a.annotated, b.annotated);
        let g = Image::filled(8, 8, PixelFormat::Gray8, &[0]).unwrap();
        assert!(matches!(run_pipeline(&g, &PipelineConfig::default(), false), Err(Error::Stage { .. })));
    }
}
