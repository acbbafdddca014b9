use super::{to_byte, Image, PixelFormat};
use crate::error::Result;
use crate::tensor::Tensor;

// BT.601 luma weights.
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

/// Luma `round(0.299R + 0.587G + 0.114B)`. Gray input is returned unchanged.
pub fn to_grayscale(image: &Image) -> Result<Image> {
    if image.format() == PixelFormat::Gray8 {
        return Ok(image.clone());
    }
    let pixels = image
        .pixels()
        .chunks(3)
        .map(|p| to_byte(KR * p[0] as f64 + KG * p[1] as f64 + KB * p[2] as f64))
        .collect();
    Image::new(image.width(), image.height(), PixelFormat::Gray8, pixels)
}

/// Full-range BT.601 YUV planes (`3×H×W`) from RGB scaled to `[0, 1]`:
/// `Y ∈ [0, 1]`, `U, V ∈ [−0.5, 0.5]`.
pub fn rgb_to_yuv(image: &Image) -> Result<Tensor> {
    image.require(PixelFormat::Rgb8)?;
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    let mut data = vec![0.0; 3 * n];
    for (i, p) in image.pixels().chunks(3).enumerate() {
        let (r, g, b) = (p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0);
        let y = KR * r + KG * g + KB * b;
        data[i] = y;
        data[n + i] = 0.5 * (b - y) / (1.0 - KB);
        data[2 * n + i] = 0.5 * (r - y) / (1.0 - KR);
    }
    Tensor::new(vec![3, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(r: u8, g: u8, b: u8) -> Image {
        Image::new(1, 1, PixelFormat::Rgb8, vec![r, g, b]).unwrap()
    }

    #[test]
    fn grayscale_values() {
        assert_eq!(to_grayscale(&px(255, 255, 255)).unwrap().pixels(), &[255]);
        // 0.299 · 255 = 76.245 → 76
        assert_eq!(to_grayscale(&px(255, 0, 0)).unwrap().pixels(), &[76]);
        for g in 0..=255u8 {
            assert_eq!(to_grayscale(&px(g, g, g)).unwrap().pixels(), &[g]);
        }
    }

    #[test]
    fn yuv_values() {
        let t = rgb_to_yuv(&px(0, 0, 0)).unwrap();
        assert_eq!(t.data(), &[0.0, 0.0, 0.0]);
        let g = rgb_to_yuv(&px(90, 90, 90)).unwrap();
        assert!(g.data()[1].abs() < 1e-15 && g.data()[2].abs() < 1e-15);
        // Matrix-vector oracle: rows of the full-range BT.601 matrix applied
        // to (1, 0, 0).
        let red = rgb_to_yuv(&px(255, 0, 0)).unwrap();
        let expect = [0.299, -0.168_735_891_647_855_5, 0.5];
        for (a, b) in red.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn yuv_ranges() {
        for (r, g, b) in [(255, 255, 0), (0, 0, 255), (0, 255, 0), (255, 0, 255)] {
            let t = rgb_to_yuv(&px(r, g, b)).unwrap();
            assert!((0.0..=1.0).contains(&t.data()[0]));
            assert!(t.data()[1].abs() <= 0.5 + 1e-12);
            assert!(t.data()[2].abs() <= 0.5 + 1e-12);
        }
    }
}
