use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::GaussianKernelSpec;

/// Largest Sobel magnitude on 8-bit input (a full 0→255 step).
pub const MAX_GRADIENT: f64 = 255.0 * 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub blur_size: usize,
    pub blur_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    /// ROI polygon vertices as fractions of `(width − 1, height − 1)`.
    pub roi: Vec<[f64; 2]>,
    pub hough_r_res: f64,
    pub hough_theta_res_deg: f64,
    pub hough_threshold: u32,
    /// Hough lines flatter than this |dy/dx| are dropped before fitting.
    pub slope_min: f64,
    /// Per side, peaks below this fraction of the strongest peak's votes are
    /// ignored when averaging.
    pub peak_fraction: f64,
    /// Lane segments run from the bottom row up to `extent_fraction·(h − 1)`.
    pub extent_fraction: f64,
    pub overlay_thickness: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            blur_size: 5,
            blur_sigma: 1.0,
            canny_low: 50.0,
            canny_high: 150.0,
            roi: vec![[0.1, 1.0], [0.45, 0.6], [0.55, 0.6], [0.9, 1.0]],
            hough_r_res: 1.0,
            hough_theta_res_deg: 1.0,
            hough_threshold: 20,
            slope_min: 0.3,
            peak_fraction: 0.5,
            extent_fraction: 0.6,
            overlay_thickness: 3,
        }
    }
}

impl PipelineConfig {
    pub fn blur_spec(&self) -> Result<GaussianKernelSpec> {
        GaussianKernelSpec::new(self.blur_size, self.blur_sigma)
    }

    pub fn theta_res(&self) -> f64 {
        self.hough_theta_res_deg.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        self.blur_spec()?;
        if !(self.canny_low > 0.0 && self.canny_low < self.canny_high && self.canny_high <= MAX_GRADIENT) {
            return Err(Error::param(format!(
                "canny thresholds need 0 < low < high ≤ {MAX_GRADIENT}, got {} / {}",
                self.canny_low, self.canny_high
            )));
        }
        if !(self.hough_r_res > 0.0 && self.hough_theta_res_deg > 0.0) {
            return Err(Error::param("hough resolutions must be positive"));
        }
        if self.roi.len() < 3 || self.roi.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("roi needs ≥ 3 vertices with fractional coordinates in [0, 1]"));
        }
        if !(self.slope_min >= 0.0) {
            return Err(Error::param("slope_min must be ≥ 0"));
        }
        if !(0.0..=1.0).contains(&self.peak_fraction) {
            return Err(Error::param("peak_fraction must be in [0, 1]"));
        }
        if !(self.extent_fraction > 0.0 && self.extent_fraction <= 1.0) {
            return Err(Error::param("extent_fraction must be in (0, 1]"));
        }
        if self.overlay_thickness == 0 {
            return Err(Error::param("overlay_thickness must be ≥ 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_thresholds() {
        let cfg = PipelineConfig {
            canny_low: 150.0,
            canny_high: 50.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Parameter(_))));
        let cfg = PipelineConfig {
            roi: vec![[0.0, 0.0], [1.0, 1.0]],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
