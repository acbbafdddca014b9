use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur_tensor, GaussianKernelSpec, Image, PixelFormat};
use crate::tensor::Tensor;

/// Binary edge mask (1 = edge).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    mask: Vec<u8>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize, mask: Vec<u8>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::dim("edge mask length does not match dimensions"));
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::param("edge mask values must be 0 or 1"));
        }
        Ok(Self { width, height, mask })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.mask[y * self.width + x] = on as u8;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&v| v != 0).count()
    }

    /// Edge pixel coordinates in raster order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| (i % self.width, i / self.width))
    }

    /// Edges as 255 on a black Gray8 image.
    pub fn to_image(&self) -> Image {
        let px = self.mask.iter().map(|&v| v * 255).collect();
        Image::new(self.width, self.height, PixelFormat::Gray8, px).expect("dims match")
    }
}

/// Black out every pixel with any channel below its threshold.
pub fn color_select(image: &Image, thresholds: [u8; 3]) -> Result<Image> {
    image.require(PixelFormat::Rgb8)?;
    let mut out = image.clone();
    for p in out.pixels_mut().chunks_mut(3) {
        if p.iter().zip(&thresholds).any(|(v, t)| v < t) {
            p.fill(0);
        }
    }
    Ok(out)
}

fn hw(gray: &Tensor) -> Result<(usize, usize)> {
    match *gray.shape() {
        [h, w] => Ok((h, w)),
        [1, h, w] => Ok((h, w)),
        ref s => Err(Error::dim(format!("expected a gray H×W field, got {s:?}"))),
    }
}

/// 3×3 Sobel gradients with replicated borders. Returns magnitude
/// `√(gx² + gy²)` and direction `atan2(gy, gx)`, both `H×W`.
pub fn sobel_gradients(gray: &Tensor) -> Result<(Tensor, Tensor)> {
    let (h, w) = hw(gray)?;
    let d = gray.data();
    let at = |x: isize, y: isize| {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        d[yy * w + xx]
    };
    let mut mag = vec![0.0; h * w];
    let mut dir = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            mag[i] = (gx * gx + gy * gy).sqrt();
            dir[i] = gy.atan2(gx);
        }
    }
    Ok((Tensor::new(vec![h, w], mag)?, Tensor::new(vec![h, w], dir)?))
}

/// Neighbour offsets `(dx, dy)` along the gradient for the four quantized
/// directions 0°, 45°, 90° and 135° (y down).
fn nms_offsets(angle: f64) -> (isize, isize) {
    let mut deg = angle.to_degrees() % 180.0;
    if deg < 0.0 {
        deg += 180.0;
    }
    if !(22.5..157.5).contains(&deg) {
        (1, 0)
    } else if deg < 67.5 {
        (1, 1)
    } else if deg < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Keeps weak pixels that are 8-connected, directly or through other weak
/// pixels, to a strong pixel. Strong pixels are always kept.
pub fn hysteresis(strong: &[bool], weak: &[bool], width: usize, height: usize) -> Vec<bool> {
    let mut keep = strong.to_vec();
    let mut queue: VecDeque<usize> = (0..strong.len()).filter(|&i| strong[i]).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if weak[j] && !keep[j] {
                    keep[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    keep
}

/// Canny on an already-smoothed field: Sobel, non-maximum suppression over
/// four direction bins, double threshold and hysteresis.
///
/// Along the gradient a pixel must strictly exceed its neighbour on the
/// negative side and at least equal the one on the positive side, so a
/// symmetric ridge thins to exactly one pixel.
pub fn detect_edges(smoothed: &Tensor, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low > 0.0 && low < high) {
        return Err(Error::param(format!(
            "canny thresholds need 0 < low < high, got {low} / {high}"
        )));
    }
    let (h, w) = hw(smoothed)?;
    let (mag, dir) = sobel_gradients(smoothed)?;
    let (m, a) = (mag.data(), dir.data());
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            m[y as usize * w + x as usize]
        }
    };
    let mut strong = vec![false; h * w];
    let mut weak = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = m[i];
            if v < low {
                continue;
            }
            let (dx, dy) = nms_offsets(a[i]);
            let (xi, yi) = (x as isize, y as isize);
            let before = at(xi - dx, yi - dy);
            let after = at(xi + dx, yi + dy);
            if v > before && v >= after {
                if v >= high {
                    strong[i] = true;
                } else {
                    weak[i] = true;
                }
            }
        }
    }
    let keep = hysteresis(&strong, &weak, w, h);
    EdgeMap::new(w, h, keep.into_iter().map(u8::from).collect())
}

/// Full Canny: optional Gaussian smoothing followed by [`detect_edges`].
pub fn canny(gray: &Tensor, low: f64, high: f64, blur: Option<&GaussianKernelSpec>) -> Result<EdgeMap> {
    if !(low > 0.0 && low < high) {
        return Err(Error::param(format!(
            "canny thresholds need 0 < low < high, got {low} / {high}"
        )));
    }
    match blur {
        Some(spec) => detect_edges(&gaussian_blur_tensor(gray, spec)?, low, high),
        None => detect_edges(gray, low, high),
    }
}
