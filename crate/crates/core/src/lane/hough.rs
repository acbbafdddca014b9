use std::f64::consts::PI;

use super::EdgeMap;
use crate::error::{Error, Result};
use crate::imaging::{Image, PixelFormat};

/// Accumulator peak: the line `x·cos θ + y·sin θ = r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughPeak {
    pub r: f64,
    pub theta: f64,
    pub votes: u32,
    pub theta_bin: usize,
    pub r_bin: usize,
}

/// Vote counts over `θ ∈ [0, π)` (rows) and `r ∈ [−D, D]` (columns), where
/// `D` is the image diagonal.
#[derive(Debug, Clone)]
pub struct HoughAccumulator {
    pub r_res: f64,
    pub theta_res: f64,
    pub diag: f64,
    pub n_theta: usize,
    pub n_r: usize,
    votes: Vec<u32>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl HoughAccumulator {
    pub fn new(width: usize, height: usize, r_res: f64, theta_res: f64) -> Result<Self> {
        if !(r_res > 0.0 && theta_res > 0.0) {
            return Err(Error::param("hough resolutions must be positive"));
        }
        let n_theta = ((PI / theta_res) - 1e-9).ceil().max(1.0) as usize;
        let diag = ((width * width + height * height) as f64).sqrt();
        let n_r = (2.0 * diag / r_res).ceil() as usize + 1;
        let thetas: Vec<f64> = (0..n_theta).map(|i| i as f64 * theta_res).collect();
        Ok(Self {
            r_res,
            theta_res,
            diag,
            n_theta,
            n_r,
            votes: vec![0; n_theta * n_r],
            cos: thetas.iter().map(|t| t.cos()).collect(),
            sin: thetas.iter().map(|t| t.sin()).collect(),
        })
    }

    pub fn theta(&self, bin: usize) -> f64 {
        bin as f64 * self.theta_res
    }

    pub fn r(&self, bin: usize) -> f64 {
        bin as f64 * self.r_res - self.diag
    }

    /// Nearest `r` bin for the line through `(x, y)` at angle bin `t`.
    pub fn r_bin(&self, x: f64, y: f64, t: usize) -> usize {
        let r = x * self.cos[t] + y * self.sin[t];
        ((r + self.diag) / self.r_res).round() as usize
    }

    pub fn vote(&mut self, x: usize, y: usize) {
        for t in 0..self.n_theta {
            let rb = self.r_bin(x as f64, y as f64, t);
            self.votes[t * self.n_r + rb] += 1;
        }
    }

    pub fn votes(&self, theta_bin: usize, r_bin: usize) -> u32 {
        self.votes[theta_bin * self.n_r + r_bin]
    }

    /// Local maxima over the 8-neighbourhood with at least `threshold` votes,
    /// sorted by votes (descending) then bin order. On plateaus only the
    /// first cell in raster order is reported.
    pub fn peaks(&self, threshold: u32) -> Vec<HoughPeak> {
        let mut out = Vec::new();
        for t in 0..self.n_theta {
            for rb in 0..self.n_r {
                let v = self.votes(t, rb);
                if v == 0 || v < threshold {
                    continue;
                }
                let mut is_peak = true;
                'nb: for dt in -1isize..=1 {
                    for dr in -1isize..=1 {
                        if dt == 0 && dr == 0 {
                            continue;
                        }
                        let (nt, nr) = (t as isize + dt, rb as isize + dr);
                        if nt < 0 || nr < 0 || nt >= self.n_theta as isize || nr >= self.n_r as isize {
                            continue;
                        }
                        let nv = self.votes(nt as usize, nr as usize);
                        let earlier = (dt, dr) < (0, 0);
                        if nv > v || (earlier && nv == v) {
                            is_peak = false;
                            break 'nb;
                        }
                    }
                }
                if is_peak {
                    out.push(HoughPeak {
                        r: self.r(rb),
                        theta: self.theta(t),
                        votes: v,
                        theta_bin: t,
                        r_bin: rb,
                    });
                }
            }
        }
        out.sort_by(|a, b| b.votes.cmp(&a.votes));
        out
    }

    /// Accumulator rescaled to 0–255 (θ along x, r along y).
    pub fn to_image(&self) -> Image {
        let max = self.votes.iter().copied().max().unwrap_or(0).max(1) as f64;
        let mut px = vec![0u8; self.n_theta * self.n_r];
        for t in 0..self.n_theta {
            for rb in 0..self.n_r {
                px[rb * self.n_theta + t] = (self.votes(t, rb) as f64 * 255.0 / max).round() as u8;
            }
        }
        Image::new(self.n_theta, self.n_r, PixelFormat::Gray8, px).expect("dims are positive")
    }
}

pub fn hough_accumulate(edges: &EdgeMap, r_res: f64, theta_res: f64) -> Result<HoughAccumulator> {
    let mut acc = HoughAccumulator::new(edges.width(), edges.height(), r_res, theta_res)?;
    for (x, y) in edges.points() {
        acc.vote(x, y);
    }
    Ok(acc)
}

/// Standard Hough line transform. An empty edge map yields no peaks.
pub fn hough_transform(edges: &EdgeMap, r_res: f64, theta_res: f64, threshold: u32) -> Result<Vec<HoughPeak>> {
    Ok(hough_accumulate(edges, r_res, theta_res)?.peaks(threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_degree() -> f64 {
        PI / 180.0
    }

    #[test]
    fn single_pixel_votes_once_per_angle() {
        let mut e = EdgeMap::empty(20, 15);
        e.set(7, 4, true);
        let acc = hough_accumulate(&e, 1.0, one_degree()).unwrap();
        assert_eq!(acc.n_theta, 180);
        for t in 0..acc.n_theta {
            let th = t as f64 * one_degree();
            let r = 7.0 * th.cos() + 4.0 * th.sin();
            let expect = ((r + acc.diag) / 1.0).round() as usize;
            for rb in 0..acc.n_r {
                assert_eq!(acc.votes(t, rb), u32::from(rb == expect));
            }
        }
    }

    #[test]
    fn horizontal_line_peak() {
        let mut e = EdgeMap::empty(100, 30);
        for x in 0..100 {
            e.set(x, 10, true);
        }
        let peaks = hough_transform(&e, 1.0, one_degree(), 20).unwrap();
        let top = peaks[0];
        assert_eq!(top.theta_bin, 90);
        assert!((top.r - 10.0).abs() <= 1.0);
        assert_eq!(top.votes, 100);
    }

    #[test]
    fn perpendicular_lines_give_two_peaks() {
        let mut e = EdgeMap::empty(60, 60);
        for i in 0..60 {
            e.set(i, 25, true);
            e.set(40, i, true);
        }
        let peaks = hough_transform(&e, 1.0, one_degree(), 40).unwrap();
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        let mut bins: Vec<(usize, f64)> = peaks.iter().map(|p| (p.theta_bin, p.r)).collect();
        bins.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(bins[0].0, 0);
        assert!((bins[0].1 - 40.0).abs() <= 1.0);
        assert_eq!(bins[1].0, 90);
        assert!((bins[1].1 - 25.0).abs() <= 1.0);
    }

    #[test]
    fn empty_map_no_peaks() {
        assert!(hough_transform(&EdgeMap::empty(5, 5), 1.0, 0.1, 1).unwrap().is_empty());
        assert!(hough_transform(&EdgeMap::empty(5, 5), 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn peak_votes_match_rescan() {
        let mut p = crate::rng::Prng::new(77);
        let mask = (0..40 * 30).map(|_| u8::from(p.bernoulli(0.05))).collect();
        let e = EdgeMap::new(40, 30, mask).unwrap();
        let acc = hough_accumulate(&e, 2.0, 2.0 * one_degree()).unwrap();
        for pk in acc.peaks(3) {
            let th = pk.theta_bin as f64 * acc.theta_res;
            let count = e
                .points()
                .filter(|&(x, y)| {
                    let r = x as f64 * th.cos() + y as f64 * th.sin();
                    ((r + acc.diag) / acc.r_res).round() as usize == pk.r_bin
                })
                .count();
            assert_eq!(count as u32, pk.votes);
        }
    }
}
