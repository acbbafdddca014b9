use serde::{Deserialize, Serialize};

use super::{to_byte, Image};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernelSpec {
    pub size: usize,
    pub sigma: f64,
}

impl GaussianKernelSpec {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        let spec = Self { size, sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.size % 2 == 0 {
            return Err(Error::param(format!(
                "gaussian kernel size must be odd and positive, got {}",
                self.size
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!("gaussian sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// `size×size` samples of `G(x, y) = exp(−(x²+y²)/2σ²) / 2πσ²` at integer
/// offsets from the centre, normalized to sum to 1.
pub fn gaussian_kernel(spec: &GaussianKernelSpec) -> Result<Tensor> {
    spec.validate()?;
    let r = (spec.size / 2) as isize;
    let s2 = spec.sigma * spec.sigma;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2);
    let mut data = Vec::with_capacity(spec.size * spec.size);
    for y in -r..=r {
        for x in -r..=r {
            let d2 = (x * x + y * y) as f64;
            data.push(norm * (-d2 / (2.0 * s2)).exp());
        }
    }
    let total: f64 = data.iter().sum();
    for v in &mut data {
        *v /= total;
    }
    Tensor::new(vec![spec.size, spec.size], data)
}

fn blur_plane(plane: &[f64], h: usize, w: usize, kernel: &Tensor, out: &mut [f64]) {
    let k = kernel.shape()[0];
    let r = (k / 2) as isize;
    let kd = kernel.data();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..k {
                let sy = (y as isize + ky as isize - r).clamp(0, h as isize - 1) as usize;
                let row = &plane[sy * w..(sy + 1) * w];
                for kx in 0..k {
                    let sx = (x as isize + kx as isize - r).clamp(0, w as isize - 1) as usize;
                    acc += kd[ky * k + kx] * row[sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
}

/// Gaussian blur of an `H×W` or `C×H×W` tensor with clamp-to-edge borders.
pub fn gaussian_blur_tensor(t: &Tensor, spec: &GaussianKernelSpec) -> Result<Tensor> {
    let (c, h, w) = match *t.shape() {
        [h, w] => (1, h, w),
        [c, h, w] => (c, h, w),
        ref s => return Err(Error::dim(format!("cannot blur tensor of shape {s:?}"))),
    };
    if spec.size > h || spec.size > w {
        return Err(Error::dim(format!(
            "blur kernel {0}×{0} larger than image {h}×{w}",
            spec.size
        )));
    }
    let kernel = gaussian_kernel(spec)?;
    let mut out = vec![0.0; t.len()];
    for ch in 0..c {
        let range = ch * h * w..(ch + 1) * h * w;
        blur_plane(&t.data()[range.clone()], h, w, &kernel, &mut out[range]);
    }
    Tensor::new(t.shape().to_vec(), out)
}

/// Per-channel Gaussian blur of an 8-bit image; results rounded half-up.
pub fn gaussian_blur(image: &Image, spec: &GaussianKernelSpec) -> Result<Image> {
    let blurred = gaussian_blur_tensor(&image.to_tensor(), spec)?;
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let mut pixels = vec![0u8; w * h * c];
    for ch in 0..c {
        for i in 0..w * h {
            pixels[i * c + ch] = to_byte(blurred.data()[ch * w * h + i]);
        }
    }
    Image::new(w, h, image.format(), pixels)
}
