use super::{to_byte, Image};
use crate::error::{Error, Result};
use crate::tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn full(image: &Image) -> Self {
        Rect {
            x: 0,
            y: 0,
            width: image.width(),
            height: image.height(),
        }
    }
}

pub fn crop(image: &Image, rect: Rect) -> Result<Image> {
    if rect.width == 0
        || rect.height == 0
        || rect.x + rect.width > image.width()
        || rect.y + rect.height > image.height()
    {
        return Err(Error::Bounds(format!(
            "crop {rect:?} outside {}×{} image",
            image.width(),
            image.height()
        )));
    }
    let c = image.channels();
    let mut pixels = Vec::with_capacity(rect.width * rect.height * c);
    for y in rect.y..rect.y + rect.height {
        let start = (y * image.width() + rect.x) * c;
        pixels.extend_from_slice(&image.pixels()[start..start + rect.width * c]);
    }
    Image::new(rect.width, rect.height, image.format(), pixels)
}

pub fn flip_horizontal(image: &Image) -> Image {
    let c = image.channels();
    let w = image.width();
    let mut out = image.clone();
    for (src, dst) in image.pixels().chunks(w * c).zip(out.pixels_mut().chunks_mut(w * c)) {
        for x in 0..w {
            dst[x * c..(x + 1) * c].copy_from_slice(&src[(w - 1 - x) * c..(w - x) * c]);
        }
    }
    out
}

/// Bilinear resize using the half-pixel convention shared with the tensor
/// resampler.
pub fn resize_bilinear(image: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    let t = tensor::resize_bilinear(&image.to_tensor(), out_h, out_w)?;
    Image::from_tensor(&t)
}

/// Applies `dst = M·[x, y, 1]ᵀ` by inverse mapping each destination pixel
/// and sampling the source bilinearly. Samples that fall outside the source
/// are black.
pub fn affine_warp(image: &Image, m: [[f64; 3]; 2]) -> Result<Image> {
    let [[a, b, tx], [d, e, ty]] = m;
    let det = a * e - b * d;
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::param(format!("affine matrix is singular (det = {det})")));
    }
    let (ia, ib, id, ie) = (e / det, -b / det, -d / det, a / det);
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
    const TOL: f64 = 1e-9;
    let mut out = vec![0u8; w * h * c];
    let px = image.pixels();
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 - tx, y as f64 - ty);
            let sx = ia * u + ib * v;
            let sy = id * u + ie * v;
            if sx < -TOL || sy < -TOL || sx > maxx + TOL || sy > maxy + TOL {
                continue;
            }
            let (sx, sy) = (sx.clamp(0.0, maxx), sy.clamp(0.0, maxy));
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for ch in 0..c {
                let at = |xx: usize, yy: usize| px[(yy * w + xx) * c + ch] as f64;
                let top = at(x0, y0) + (at(x1, y0) - at(x0, y0)) * fx;
                let bot = at(x0, y1) + (at(x1, y1) - at(x0, y1)) * fx;
                out[(y * w + x) * c + ch] = to_byte(top + (bot - top) * fy);
            }
        }
    }
    Image::new(w, h, image.format(), out)
}
