use super::{HoughPeak, PipelineConfig};

/// Segment between `(x1, y1)` and `(x2, y2)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl LineSegment {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Largest distance between matching endpoints of `self` and `other`.
    pub fn endpoint_error(&self, other: &LineSegment) -> f64 {
        let d1 = (self.x1 - other.x1).hypot(self.y1 - other.y1);
        let d2 = (self.x2 - other.x2).hypot(self.y2 - other.y2);
        d1.max(d2)
    }

    /// Endpoints rounded to whole pixels.
    pub fn rounded(&self) -> [i64; 4] {
        [self.x1, self.y1, self.x2, self.y2].map(|v| v.round() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneLines {
    pub left: Option<LineSegment>,
    pub right: Option<LineSegment>,
}

impl LaneLines {
    /// Two-line text form: `left x1 y1 x2 y2` or `left absent`, then the
    /// same for `right`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, seg) in [("left", self.left), ("right", self.right)] {
            match seg {
                Some(seg) => {
                    let [x1, y1, x2, y2] = seg.rounded();
                    s.push_str(&format!("{name} {x1} {y1} {x2} {y2}\n"));
                }
                None => s.push_str(&format!("{name} absent\n")),
            }
        }
        s
    }
}

/// A Hough peak rewritten as `x = a·y + b`.
#[derive(Debug, Clone, Copy)]
struct SidePeak {
    a: f64,
    b: f64,
    votes: f64,
}

/// Usable peaks split into `[left, right]`, keeping per side only those with
/// at least `peak_fraction` of the strongest peak's votes.
fn side_peaks(peaks: &[HoughPeak], config: &PipelineConfig, width: usize) -> [Vec<SidePeak>; 2] {
    let max_a = if config.slope_min > 0.0 {
        1.0 / config.slope_min
    } else {
        f64::INFINITY
    };
    let mut sides: [Vec<SidePeak>; 2] = [Vec::new(), Vec::new()];
    for p in peaks {
        let (s, c) = p.theta.sin_cos();
        if c.abs() < 1e-12 {
            continue;
        }
        let (a, b) = (-s / c, p.r / c);
        if a.abs() > max_a {
            continue;
        }
        let side = if a < 0.0 || (a == 0.0 && b < width as f64 / 2.0) { 0 } else { 1 };
        sides[side].push(SidePeak {
            a,
            b,
            votes: p.votes as f64,
        });
    }
    // A thick line also produces weaker maxima at neighbouring angles that
    // cut across it.
    sides.map(|v| {
        let top = v.iter().map(|p| p.votes).fold(0.0, f64::max);
        v.into_iter().filter(|p| p.votes >= config.peak_fraction * top).collect()
    })
}

fn span(a: f64, b: f64, config: &PipelineConfig, height: usize) -> LineSegment {
    let y_bottom = (height - 1) as f64;
    let y_top = config.extent_fraction * y_bottom;
    LineSegment::new(a * y_bottom + b, y_bottom, a * y_top + b, y_top)
}

fn weighted_mean(peaks: &[SidePeak]) -> Option<(f64, f64)> {
    let (wa, wb, w) = peaks
        .iter()
        .fold((0.0, 0.0, 0.0), |(wa, wb, w), p| (wa + p.votes * p.a, wb + p.votes * p.b, w + p.votes));
    (w > 0.0).then(|| (wa / w, wb / w))
}

/// Collapse Hough peaks into at most one line per side.
///
/// Each peak is rewritten as `x = a·y + b`, which stays finite for the
/// near-vertical lines lanes produce. Lines whose image slope `|dy/dx|` is
/// below `slope_min` are discarded; the rest are split by the sign of `a`
/// (negative leans right going up the image → left lane) and, among peaks
/// with at least `peak_fraction` of the side's top vote count, combined by a
/// vote-weighted mean of `(a, b)`. Each side spans from the bottom row up to
/// `extent_fraction·(h − 1)`.
pub fn peaks_to_lanes(peaks: &[HoughPeak], config: &PipelineConfig, width: usize, height: usize) -> LaneLines {
    let [l, r] = side_peaks(peaks, config, width).map(|v| weighted_mean(&v).map(|(a, b)| span(a, b, config, height)));
    LaneLines { left: l, right: r }
}
