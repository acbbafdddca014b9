use super::{LaneLines, LineSegment};
use crate::error::Result;
use crate::imaging::{Image, PixelFormat};

pub const LANE_COLOR: [u8; 3] = [255, 0, 0];

/// Bresenham line between the rounded endpoints, inclusive.
pub fn rasterize_segment(seg: &LineSegment) -> Vec<(i64, i64)> {
    let [mut x0, mut y0, x1, y1] = seg.rounded();
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut pts = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        pts.push((x0, y0));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    pts
}

/// Paint the present lane segments onto a copy of `image`. Each rasterized
/// point is dilated to a `thickness × thickness` square; pixels outside the
/// frame are skipped.
pub fn overlay_lanes(image: &Image, lanes: &LaneLines, thickness: usize) -> Result<Image> {
    image.require(PixelFormat::Rgb8)?;
    let mut out = image.clone();
    let (w, h) = (image.width() as i64, image.height() as i64);
    let t = thickness.max(1) as i64;
    let lo = -(t - 1) / 2;
    for seg in [lanes.left, lanes.right].into_iter().flatten() {
        for (px, py) in rasterize_segment(&seg) {
            for dy in lo..lo + t {
                for dx in lo..lo + t {
                    let (x, y) = (px + dx, py + dy);
                    if x >= 0 && y >= 0 && x < w && y < h {
                        out.set_pixel(x as usize, y as usize, &LANE_COLOR);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absent_lanes_leave_image_unchanged() {
        let img = Image::filled(8, 6, PixelFormat::Rgb8, &[10, 20, 30]).unwrap();
        assert_eq!(overlay_lanes(&img, &LaneLines::default(), 3).unwrap(), img);
    }

    #[test]
    fn exactly_rasterized_pixels_are_red() {
        let img = Image::filled(20, 10, PixelFormat::Rgb8, &[0, 0, 0]).unwrap();
        let seg = LineSegment::new(1.0, 2.0, 18.0, 7.0);
        let lanes = LaneLines {
            left: Some(seg),
            right: None,
        };
        let out = overlay_lanes(&img, &lanes, 1).unwrap();
        // Oracle: for a shallow line Bresenham picks one pixel per column,
        // the one nearest the ideal line (no ties for this slope).
        let mut expect = std::collections::HashSet::new();
        for x in 1..=18 {
            let y = 2.0 + (x as f64 - 1.0) * 5.0 / 17.0;
            expect.insert((x, y.round() as usize));
        }
        for y in 0..10 {
            for x in 0..20 {
                let red = out.pixel(x, y) == LANE_COLOR;
                assert_eq!(red, expect.contains(&(x, y)), "({x},{y})");
                if !red {
                    assert_eq!(out.pixel(x, y), [0, 0, 0]);
                }
            }
        }
    }

    #[test]
    fn idempotent() {
        let img = Image::filled(30, 30, PixelFormat::Rgb8, &[5, 5, 5]).unwrap();
        let lanes = LaneLines {
            left: Some(LineSegment::new(2.0, 29.0, 12.0, 15.0)),
            right: Some(LineSegment::new(28.0, 29.0, 40.0, -3.0)),
        };
        let once = overlay_lanes(&img, &lanes, 3).unwrap();
        assert_eq!(overlay_lanes(&once, &lanes, 3).unwrap(), once);
    }

    #[test]
    fn rasterizer_endpoints_and_connectivity() {
        let pts = rasterize_segment(&LineSegment::new(3.0, 9.0, -2.0, 0.0));
        assert_eq!(pts.first(), Some(&(3, 9)));
        assert_eq!(pts.last(), Some(&(-2, 0)));
        for w in pts.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1 && (w[0].1 - w[1].1).abs() <= 1);
        }
        assert_eq!(pts.len(), 10);
    }
}
