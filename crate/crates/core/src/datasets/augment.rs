use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::loaders::DrivingRecord;
use crate::error::{Error, Result};
use crate::imaging::{
    affine_warp, crop, flip_horizontal, gaussian_blur, gaussian_blur_tensor, read_image, resize_bilinear, rgb_to_yuv,
    GaussianKernelSpec, Image, Rect,
};
use crate::rng::Prng;
use crate::tensor::{self, Tensor};

pub const DRIVING_WIDTH: usize = 200;
pub const DRIVING_HEIGHT: usize = 66;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    /// Shear angle drawn uniformly from `[−shear_range, shear_range]` radians.
    pub shear_range: f64,
    /// Scale drawn uniformly from `[1 − zoom_range, 1 + zoom_range]`.
    pub zoom_range: f64,
    /// Fractional `[x, y, width, height]` crop applied first.
    pub crop: Option<[f64; 4]>,
    /// `[size, sigma]` Gaussian blur applied after the warp.
    pub blur: Option<(usize, f64)>,
    /// `[width, height]` resize applied last.
    pub target_size: Option<[usize; 2]>,

    /// Driving frames: fraction of rows removed at the top (sky).
    pub driving_crop_top: f64,
    /// Driving frames: fraction of rows removed at the bottom (hood).
    pub driving_crop_bottom: f64,
    pub driving_blur_size: usize,
    pub driving_blur_sigma: f64,
    /// Added for the left camera, subtracted for the right.
    pub steering_correction: f64,
    pub driving_flip_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_prob: 0.0,
            shear_range: 0.0,
            zoom_range: 0.0,
            crop: None,
            blur: None,
            target_size: None,
            driving_crop_top: 0.375,
            driving_crop_bottom: 0.156,
            driving_blur_size: 3,
            driving_blur_sigma: 0.8,
            steering_correction: 0.2,
            driving_flip_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1], got {p}")))
            }
        };
        prob("flip_prob", self.flip_prob)?;
        prob("driving_flip_prob", self.driving_flip_prob)?;
        if !(self.shear_range >= 0.0 && self.shear_range < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!("shear_range must be in [0, π/2), got {}", self.shear_range)));
        }
        if !(self.zoom_range >= 0.0 && self.zoom_range < 1.0) {
            return Err(Error::Config(format!("zoom_range must be in [0, 1), got {}", self.zoom_range)));
        }
        if let Some([x, y, w, h]) = self.crop {
            if !(x >= 0.0 && y >= 0.0 && w > 0.0 && h > 0.0 && x + w <= 1.0 && y + h <= 1.0) {
                return Err(Error::Config(format!("crop {:?} is not inside the unit square", self.crop)));
            }
        }
        if let Some((size, sigma)) = self.blur {
            GaussianKernelSpec::new(size, sigma)?;
        }
        if self.target_size.is_some_and(|[w, h]| w == 0 || h == 0) {
            return Err(Error::Config("target_size must be positive".into()));
        }
        if !(self.driving_crop_top >= 0.0 && self.driving_crop_bottom >= 0.0)
            || self.driving_crop_top + self.driving_crop_bottom >= 1.0
        {
            return Err(Error::Config("driving crop fractions must be ≥ 0 and leave some rows".into()));
        }
        GaussianKernelSpec::new(self.driving_blur_size, self.driving_blur_sigma)?;
        if !self.steering_correction.is_finite() {
            return Err(Error::Config("steering_correction must be finite".into()));
        }
        Ok(())
    }
}

/// Random flip, shear and zoom (about the image centre), framed by the
/// optional crop, blur and resize of `config`.
pub fn augment_classification(image: &Image, config: &AugmentConfig, prng: &mut Prng) -> Result<Image> {
    let mut img = image.clone();
    if let Some([fx, fy, fw, fh]) = config.crop {
        let (w, h) = (img.width() as f64, img.height() as f64);
        let rect = Rect {
            x: (fx * w).floor() as usize,
            y: (fy * h).floor() as usize,
            width: ((fw * w).floor() as usize).max(1),
            height: ((fh * h).floor() as usize).max(1),
        };
        img = crop(&img, rect)?;
    }
    if prng.bernoulli(config.flip_prob) {
        img = flip_horizontal(&img);
    }
    let shear = if config.shear_range > 0.0 {
        prng.uniform(-config.shear_range, config.shear_range).tan()
    } else {
        0.0
    };
    let scale = if config.zoom_range > 0.0 {
        prng.uniform(1.0 - config.zoom_range, 1.0 + config.zoom_range)
    } else {
        1.0
    };
    if shear != 0.0 || scale != 1.0 {
        let (cx, cy) = ((img.width() - 1) as f64 / 2.0, (img.height() - 1) as f64 / 2.0);
        let (a, b, e) = (scale, scale * shear, scale);
        img = affine_warp(&img, [[a, b, cx - a * cx - b * cy], [0.0, e, cy - e * cy]])?;
    }
    if let Some((size, sigma)) = config.blur {
        img = gaussian_blur(&img, &GaussianKernelSpec::new(size, sigma)?)?;
    }
    if let Some([w, h]) = config.target_size {
        img = resize_bilinear(&img, w, h)?;
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Camera {
    Center,
    Left,
    Right,
}

impl Camera {
    pub fn path<'a>(&self, record: &'a DrivingRecord) -> &'a str {
        match self {
            Camera::Center => &record.center,
            Camera::Left => &record.left,
            Camera::Right => &record.right,
        }
    }
}

/// Resolve a logged image path. With an images directory only the file name
/// is kept (simulator logs record absolute paths from the capture machine).
pub fn resolve_image_path(logged: &str, images_dir: Option<&Path>) -> PathBuf {
    match images_dir {
        Some(dir) => {
            let name = logged.rsplit(['/', '\\']).next().unwrap_or(logged);
            dir.join(name)
        }
        None => PathBuf::from(logged),
    }
}

/// Crop, RGB→YUV, blur, resize to 66×200 of an already loaded frame.
pub fn preprocess_frame(image: &Image, config: &AugmentConfig) -> Result<Tensor> {
    let h = image.height();
    let top = (config.driving_crop_top * h as f64).round() as usize;
    let bottom = (config.driving_crop_bottom * h as f64).round() as usize;
    if top + bottom >= h {
        return Err(Error::dim(format!("crop of {top}+{bottom} rows leaves nothing of {h}")));
    }
    let cropped = crop(
        image,
        Rect {
            x: 0,
            y: top,
            width: image.width(),
            height: h - top - bottom,
        },
    )?;
    let yuv = rgb_to_yuv(&cropped)?;
    let spec = GaussianKernelSpec::new(config.driving_blur_size, config.driving_blur_sigma)?;
    let blurred = gaussian_blur_tensor(&yuv, &spec)?;
    tensor::resize_bilinear(&blurred, DRIVING_HEIGHT, DRIVING_WIDTH)
}

/// One training sample from a driving record: the `3×66×200` YUV frame of
/// `camera` and its steering target. Side cameras shift the steering by
/// `±steering_correction`; with `augment`, a horizontal flip (probability
/// `driving_flip_prob`) negates it.
pub fn preprocess_driving(
    record: &DrivingRecord,
    camera: Camera,
    prng: &mut Prng,
    augment: bool,
    config: &AugmentConfig,
    images_dir: Option<&Path>,
) -> Result<(Tensor, f64)> {
    let path = resolve_image_path(camera.path(record), images_dir);
    let image = read_image(&path).map_err(|e| Error::Sample {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let x = preprocess_frame(&image, config).map_err(|e| Error::Sample {
        path,
        message: e.to_string(),
    })?;
    let steering = match camera {
        Camera::Center => record.steering,
        Camera::Left => record.steering + config.steering_correction,
        Camera::Right => record.steering - config.steering_correction,
    };
    Ok(if augment && prng.bernoulli(config.driving_flip_prob) {
        (x.flip_last_axis(), -steering)
    } else {
        (x, steering)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{write_image, PixelFormat};

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let mut p = Prng::new(seed);
        Image::new(w, h, PixelFormat::Rgb8, (0..w * h * 3).map(|_| p.below(256) as u8).collect()).unwrap()
    }

    #[test]
    fn zero_config_is_identity() {
        let img = noise(9, 7, 1);
        let out = augment_classification(&img, &AugmentConfig::default(), &mut Prng::new(2)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn forced_flip() {
        let img = noise(9, 7, 3);
        let cfg = AugmentConfig {
            flip_prob: 1.0,
            ..Default::default()
        };
        assert_eq!(augment_classification(&img, &cfg, &mut Prng::new(4)).unwrap(), flip_horizontal(&img));
    }

    #[test]
    fn seeded_augmentation_repeats_and_keeps_size() {
        let img = noise(16, 12, 5);
        let cfg = AugmentConfig {
            flip_prob: 0.5,
            shear_range: 0.2,
            zoom_range: 0.15,
            ..Default::default()
        };
        let a = augment_classification(&img, &cfg, &mut Prng::new(6)).unwrap();
        let b = augment_classification(&img, &cfg, &mut Prng::new(6)).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (16, 12));
        assert_ne!(a, img);
    }

    fn record_with_frames(dir: &Path) -> DrivingRecord {
        for (name, seed) in [("c.ppm", 1), ("l.ppm", 2), ("r.ppm", 3)] {
            write_image(&noise(320, 160, seed), dir.join(name)).unwrap();
        }
        DrivingRecord {
            center: "C:\\sim\\IMG\\c.ppm".into(),
            left: "/capture/IMG/l.ppm".into(),
            right: "r.ppm".into(),
            steering: 0.3,
            throttle: 1.0,
            reverse: 0,
            speed: 20.0,
        }
    }

    #[test]
    fn driving_shape_corrections_and_flip() {
        let d = tempfile::tempdir().unwrap();
        let rec = record_with_frames(d.path());
        let cfg = AugmentConfig::default();
        let dir = Some(d.path());
        let (x, s) = preprocess_driving(&rec, Camera::Center, &mut Prng::new(0), false, &cfg, dir).unwrap();
        assert_eq!(x.shape(), &[3, 66, 200]);
        assert_eq!(s, 0.3);
        let (_, sl) = preprocess_driving(&rec, Camera::Left, &mut Prng::new(0), false, &cfg, dir).unwrap();
        assert_eq!(sl, 0.3 + 0.2);
        let (_, sr) = preprocess_driving(&rec, Camera::Right, &mut Prng::new(0), false, &cfg, dir).unwrap();
        assert_eq!(sr, 0.3 - 0.2);
        let always = AugmentConfig {
            driving_flip_prob: 1.0,
            ..cfg.clone()
        };
        let (xf, sf) = preprocess_driving(&rec, Camera::Center, &mut Prng::new(0), true, &always, dir).unwrap();
        assert_eq!(sf, -s);
        assert_eq!(xf, x.flip_last_axis());
        // Without augmentation the result does not depend on the generator.
        let (x2, _) = preprocess_driving(&rec, Camera::Center, &mut Prng::new(99), false, &cfg, dir).unwrap();
        assert_eq!(x2, x);
    }

    #[test]
    fn missing_frame_names_the_path() {
        let rec = DrivingRecord {
            center: "nope.ppm".into(),
            left: String::new(),
            right: String::new(),
            steering: 0.0,
            throttle: 0.0,
            reverse: 0,
            speed: 0.0,
        };
        let err = preprocess_driving(&rec, Camera::Center, &mut Prng::new(0), false, &AugmentConfig::default(), None)
            .unwrap_err();
        assert!(matches!(err, Error::Sample { ref path, .. } if path.ends_with("nope.ppm")));
    }
}
