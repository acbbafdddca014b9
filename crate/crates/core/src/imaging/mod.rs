//! 8-bit rasters, Netpbm/PNG I/O and pixel-level preprocessing.

mod color;
mod filter;
mod geometry;
mod io;

pub use color::{rgb_to_yuv, to_grayscale};
pub use filter::{gaussian_blur, gaussian_blur_tensor, gaussian_kernel, GaussianKernelSpec};
pub use geometry::{affine_warp, crop, flip_horizontal, resize_bilinear, Rect};
pub use io::{decode_image, encode_pnm, read_image, write_image};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    Gray8,
    Rgb8,
}

impl PixelFormat {
    pub fn channels(self) -> usize {
        match self {
            PixelFormat::Gray8 => 1,
            PixelFormat::Rgb8 => 3,
        }
    }
}

/// Row-major interleaved 8-bit raster (`R,G,B` order for `Rgb8`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    format: PixelFormat,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, format: PixelFormat, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim("image dimensions must be positive"));
        }
        let expected = width * height * format.channels();
        if pixels.len() != expected {
            return Err(Error::dim(format!(
                "{width}×{height} {format:?} needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            format,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, format: PixelFormat, value: &[u8]) -> Result<Self> {
        if value.len() != format.channels() {
            return Err(Error::dim("fill value has the wrong channel count"));
        }
        let pixels = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * format.channels())
            .collect();
        Self::new(width, height, format, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn format(&self) -> PixelFormat {
        self.format
    }

    pub fn channels(&self) -> usize {
        self.format.channels()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let c = self.channels();
        let o = (y * self.width + x) * c;
        &self.pixels[o..o + c]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[u8]) {
        let c = self.channels();
        let o = (y * self.width + x) * c;
        self.pixels[o..o + c].copy_from_slice(value);
    }

    pub fn require(&self, format: PixelFormat) -> Result<()> {
        if self.format != format {
            return Err(Error::UnsupportedFormat(format!(
                "expected {format:?} image, got {:?}",
                self.format
            )));
        }
        Ok(())
    }

    /// Channels-first `C×H×W` tensor of raw byte values (0–255).
    pub fn to_tensor(&self) -> Tensor {
        let (w, h, c) = (self.width, self.height, self.channels());
        let mut data = vec![0.0; c * h * w];
        for (i, px) in self.pixels.chunks(c).enumerate() {
            for (ch, &v) in px.iter().enumerate() {
                data[ch * h * w + i] = v as f64;
            }
        }
        Tensor::new(vec![c, h, w], data).expect("image dims are positive")
    }

    /// Pixel values divided by 255, so every entry lies in `[0, 1]`.
    pub fn normalize(&self) -> Tensor {
        self.to_tensor().map(|v| v / 255.0)
    }

    /// Inverse of [`Image::to_tensor`]: values are rounded half-up and
    /// clamped to `[0, 255]`. Accepts `1×H×W`, `3×H×W` or `H×W`.
    pub fn from_tensor(t: &Tensor) -> Result<Image> {
        let (c, h, w) = match *t.shape() {
            [h, w] => (1, h, w),
            [c @ (1 | 3), h, w] => (c, h, w),
            ref s => return Err(Error::dim(format!("cannot convert tensor {s:?} to an image"))),
        };
        let format = if c == 1 { PixelFormat::Gray8 } else { PixelFormat::Rgb8 };
        let mut pixels = vec![0u8; c * h * w];
        for ch in 0..c {
            for i in 0..h * w {
                pixels[i * c + ch] = to_byte(t.data()[ch * h * w + i]);
            }
        }
        Image::new(w, h, format, pixels)
    }
}

/// Round half-up and clamp to a byte.
pub fn to_byte(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
