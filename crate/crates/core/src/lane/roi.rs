use super::EdgeMap;
use crate::error::{Error, Result};
use crate::imaging::Image;

const EPS: f64 = 1e-9;

/// Simple polygon in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiPolygon {
    vertices: Vec<(f64, f64)>,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> bool {
    cross(a, b, p).abs() <= EPS * (1.0 + (b.0 - a.0).abs() + (b.1 - a.1).abs())
        && p.0 >= a.0.min(b.0) - EPS
        && p.0 <= a.0.max(b.0) + EPS
        && p.1 >= a.1.min(b.1) - EPS
        && p.1 <= a.1.max(b.1) + EPS
}

fn segments_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

impl RoiPolygon {
    /// Consecutive duplicate vertices (including a repeated first vertex at
    /// the end) are dropped. Fewer than three distinct vertices, zero area or
    /// self-intersection is a parameter error.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if !(p.0.is_finite() && p.1.is_finite()) {
                return Err(Error::param("non-finite polygon vertex"));
            }
            if v.last().is_none_or(|&q| q != p) {
                v.push(p);
            }
        }
        while v.len() > 1 && v.first() == v.last() {
            v.pop();
        }
        if v.len() < 3 {
            return Err(Error::param(format!(
                "polygon needs ≥ 3 distinct vertices, got {}",
                v.len()
            )));
        }
        let area2: f64 = (0..v.len())
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum();
        if area2.abs() <= EPS {
            return Err(Error::param("polygon has zero area"));
        }
        let n = v.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if !adjacent && segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                    return Err(Error::param("polygon is self-intersecting"));
                }
            }
        }
        Ok(Self { vertices: v })
    }

    /// Scale fractional vertices by `(width − 1, height − 1)`.
    pub fn from_fractions(fractions: &[[f64; 2]], width: usize, height: usize) -> Result<Self> {
        let (sx, sy) = ((width - 1) as f64, (height - 1) as f64);
        Self::new(fractions.iter().map(|&[fx, fy]| (fx * sx, fy * sy)).collect())
    }

    pub fn full_image(width: usize, height: usize) -> Self {
        let (x, y) = ((width - 1) as f64, (height - 1) as f64);
        Self {
            vertices: vec![(0.0, 0.0), (x, 0.0), (x, y), (0.0, y)],
        }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Even-odd rule; points on the boundary count as inside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        if (0..n).any(|i| on_segment((x, y), v[i], v[(i + 1) % n])) {
            return true;
        }
        let mut inside = false;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            if (a.1 > y) != (b.1 > y) {
                let xc = a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1);
                if x < xc {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        let (mx, my) = ((width - 1) as f64 + EPS, (height - 1) as f64 + EPS);
        if self
            .vertices
            .iter()
            .any(|&(x, y)| x < -EPS || y < -EPS || x > mx || y > my)
        {
            return Err(Error::Bounds(format!(
                "roi polygon extends outside the {width}×{height} image"
            )));
        }
        Ok(())
    }

    /// Row-major inside mask for a `width×height` raster.
    pub fn mask(&self, width: usize, height: usize) -> Vec<bool> {
        let mut m = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                m.push(self.contains(x as f64, y as f64));
            }
        }
        m
    }
}

/// Clear edge pixels outside the polygon.
pub fn roi_mask(map: &EdgeMap, polygon: &RoiPolygon) -> Result<EdgeMap> {
    polygon.check_bounds(map.width(), map.height())?;
    let inside = polygon.mask(map.width(), map.height());
    let mask = map
        .mask()
        .iter()
        .zip(&inside)
        .map(|(&v, &keep)| if keep { v } else { 0 })
        .collect();
    EdgeMap::new(map.width(), map.height(), mask)
}

/// Black out image pixels outside the polygon.
pub fn roi_mask_image(image: &Image, polygon: &RoiPolygon) -> Result<Image> {
    polygon.check_bounds(image.width(), image.height())?;
    let inside = polygon.mask(image.width(), image.height());
    let c = image.channels();
    let mut out = image.clone();
    for (px, &keep) in out.pixels_mut().chunks_mut(c).zip(&inside) {
        if !keep {
            px.fill(0);
        }
    }
    Ok(out)
}
