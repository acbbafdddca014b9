//! Synthetic corpora with ground truth known by construction.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::{write_image, Image, PixelFormat};
use crate::lane::{rasterize_segment, LaneLines, LineSegment, RoiPolygon};
use crate::rng::Prng;

pub const SYNTH_SIGN_CLASSES: usize = 10;
pub const SIGN_SIZE: usize = 32;
pub const VEHICLE_SIZE: usize = 32;
pub const SEG_SIZE: usize = 128;
pub const LANE_WIDTH: usize = 320;
pub const LANE_HEIGHT: usize = 180;
/// Ground-truth lane segments end at this fraction of `h − 1`, matching the
/// default lane extent of the detector.
pub const LANE_EXTENT: f64 = 0.6;
pub const LANE_SIDECAR: &str = "lanes.txt";
pub const WHITE_LINE: [u8; 3] = [250, 250, 250];
pub const YELLOW_LINE: [u8; 3] = [255, 210, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTask {
    Signs,
    Vehicles,
    Segmentation,
    Lanes,
}

impl FromStr for SynthTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "signs" => SynthTask::Signs,
            "vehicles" => SynthTask::Vehicles,
            "segmentation" | "segment" => SynthTask::Segmentation,
            "lanes" => SynthTask::Lanes,
            _ => return Err(Error::param(format!("unknown synthetic task `{s}`"))),
        })
    }
}

fn jitter(p: &mut Prng, base: u8, spread: i32) -> u8 {
    (base as i32 + p.below(2 * spread as usize + 1) as i32 - spread).clamp(0, 255) as u8
}

fn noisy_fill(w: usize, h: usize, color: [u8; 3], spread: i32, p: &mut Prng) -> Image {
    let px = (0..w * h).flat_map(|_| color.map(|c| jitter(p, c, spread))).collect();
    Image::new(w, h, PixelFormat::Rgb8, px).expect("positive dims")
}

fn paint(img: &mut Image, color: [u8; 3], spread: i32, p: &mut Prng, inside: impl Fn(f64, f64) -> bool) {
    for y in 0..img.height() {
        for x in 0..img.width() {
            if inside(x as f64, y as f64) {
                let c = color.map(|c| jitter(p, c, spread));
                img.set_pixel(x, y, &c);
            }
        }
    }
}

fn random_color(p: &mut Prng, lo: usize, hi: usize) -> [u8; 3] {
    [0; 3].map(|_| (lo + p.below(hi - lo + 1)) as u8)
}

/// Glyph shapes by `class / 2`; colour (red or blue) by `class % 2`.
fn glyph_inside(shape: usize, dx: f64, dy: f64, r: f64) -> bool {
    match shape {
        0 => dx * dx + dy * dy <= r * r,
        1 => dx.abs() <= 0.8 * r && dy.abs() <= 0.8 * r,
        2 => dx.abs() + dy.abs() <= r,
        // Apex up: width grows linearly from the apex at −r to the base at 0.7r.
        3 => dy >= -r && dy <= 0.7 * r && dx.abs() <= (dy + r) / 1.7 * 1.1,
        _ => dy <= r && dy >= -0.7 * r && dx.abs() <= (r - dy) / 1.7 * 1.1,
    }
}

/// A 32×32 sign-like glyph of class `class` (< 10) on a noisy background.
pub fn synth_sign(class: usize, p: &mut Prng) -> Image {
    assert!(class < SYNTH_SIGN_CLASSES, "class {class} out of range");
    let s = SIGN_SIZE;
    let bg = random_color(p, 60, 190);
    let mut img = noisy_fill(s, s, bg, 12, p);
    let color = if class % 2 == 0 { [220, 30, 30] } else { [30, 60, 220] };
    let (cx, cy) = (15.5 + p.uniform(-3.0, 3.0), 15.5 + p.uniform(-3.0, 3.0));
    let r = p.uniform(8.5, 11.5);
    let shape = class / 2;
    paint(&mut img, color, 15, p, |x, y| glyph_inside(shape, x - cx, y - cy, r));
    // A white core keeps the silhouette readable on red/blue backgrounds.
    paint(&mut img, [240, 240, 240], 10, p, |x, y| glyph_inside(shape, x - cx, y - cy, r * 0.45));
    img
}

/// 32×32 scene: a car (body plus two dark wheels) when `vehicle`, otherwise
/// clutter of the same colours without the car layout.
pub fn synth_vehicle(vehicle: bool, p: &mut Prng) -> Image {
    let s = VEHICLE_SIZE;
    let bg = random_color(p, 70, 180);
    let mut img = noisy_fill(s, s, bg, 14, p);
    for _ in 0..3 {
        let c = random_color(p, 0, 255);
        let (x0, y0, rw, rh) = (p.uniform(0.0, 28.0), p.uniform(0.0, 28.0), p.uniform(2.0, 6.0), p.uniform(2.0, 6.0));
        paint(&mut img, c, 10, p, |x, y| x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh);
    }
    if vehicle {
        let c = random_color(p, 0, 255);
        let (w, h) = (p.uniform(16.0, 24.0), p.uniform(7.0, 10.0));
        let (x0, y0) = (p.uniform(2.0, 30.0 - w), p.uniform(6.0, 26.0 - h));
        paint(&mut img, c, 8, p, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h);
        // Cabin.
        paint(&mut img, c, 8, p, |x, y| {
            x >= x0 + 0.25 * w && x < x0 + 0.75 * w && y >= y0 - 0.5 * h && y < y0
        });
        let wr = 2.6;
        for wx in [x0 + 0.22 * w, x0 + 0.78 * w] {
            let wy = y0 + h;
            paint(&mut img, [20, 20, 20], 6, p, |x, y| (x - wx).powi(2) + (y - wy).powi(2) <= wr * wr);
        }
    } else {
        for _ in 0..3 {
            let c = random_color(p, 0, 255);
            let (cx, cy, r) = (p.uniform(0.0, 32.0), p.uniform(0.0, 32.0), p.uniform(2.0, 5.0));
            paint(&mut img, c, 8, p, |x, y| (x - cx).powi(2) + (y - cy).powi(2) <= r * r);
        }
    }
    img
}

/// A 128×128 road scene and its exact mask (`Gray8`, road = 255). The mask
/// is the pixel-centre rasterization of the road polygon, and the road is
/// painted on exactly those pixels.
pub fn synth_road(p: &mut Prng) -> (Image, Image) {
    let s = SEG_SIZE;
    let m = (s - 1) as f64;
    let horizon = p.uniform(40.0, 70.0);
    let centre = p.uniform(48.0, 80.0);
    let top_half = p.uniform(3.0, 12.0);
    let bl = p.uniform(0.0, 40.0);
    let br = p.uniform(88.0, m);
    let poly = RoiPolygon::new(vec![
        (bl, m),
        (centre - top_half, horizon),
        (centre + top_half, horizon),
        (br, m),
    ])
    .expect("non-degenerate road polygon");
    let ground = [p.below(60) as u8 + 40, p.below(80) as u8 + 100, p.below(50) as u8 + 30];
    let sky = [p.below(60) as u8 + 120, p.below(60) as u8 + 160, p.below(35) as u8 + 220];
    let asphalt = {
        let g = p.below(50) as u8 + 70;
        [g, g, g + 5]
    };
    let mut img = noisy_fill(s, s, ground, 18, p);
    paint(&mut img, sky, 8, p, |_, y| y < horizon);
    let mut mask = Image::filled(s, s, PixelFormat::Gray8, &[0]).expect("positive dims");
    for y in 0..s {
        for x in 0..s {
            if poly.contains(x as f64, y as f64) {
                mask.set_pixel(x, y, &[255]);
                let c = asphalt.map(|c| jitter(p, c, 10));
                img.set_pixel(x, y, &c);
            }
        }
    }
    (img, mask)
}

fn paint_segment(img: &mut Image, seg: &LineSegment, color: [u8; 3], thickness: i64) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let lo = -(thickness - 1) / 2;
    for (px, py) in rasterize_segment(seg) {
        for dy in lo..lo + thickness {
            for dx in lo..lo + thickness {
                let (x, y) = (px + dx, py + dy);
                if x >= 0 && y >= 0 && x < w && y < h {
                    img.set_pixel(x as usize, y as usize, &color);
                }
            }
        }
    }
}

/// Horizontal clearance (px) kept between a painted marking and the default
/// detector ROI boundary, and between the two markings.
const LANE_MARGIN: f64 = 3.0;
const LANE_THICKNESS: i64 = 5;

/// Whether both markings, dilated to their painted width plus
/// [`LANE_MARGIN`], stay inside the default ROI trapezoid and apart from
/// each other. Everything is linear in `y`, so the two end rows suffice.
fn lanes_fit_roi(left: &LineSegment, right: &LineSegment) -> bool {
    let roi = crate::lane::PipelineConfig::default().roi;
    let (mw, mh) = ((LANE_WIDTH - 1) as f64, (LANE_HEIGHT - 1) as f64);
    let edge = |a: [f64; 2], b: [f64; 2], y: f64| {
        let (ya, yb) = (a[1] * mh, b[1] * mh);
        a[0] * mw + (y - ya) / (yb - ya) * (b[0] - a[0]) * mw
    };
    let x_at = |s: &LineSegment, y: f64| s.x1 + (y - s.y1) * (s.x2 - s.x1) / (s.y2 - s.y1);
    // A square brush of side t widens a line x = a·y + b by (t−1)/2·(1 + |a|)
    // on each side, measured along a row.
    let half = |s: &LineSegment| {
        let a = (s.x2 - s.x1) / (s.y2 - s.y1);
        (LANE_THICKNESS - 1) as f64 / 2.0 * (1.0 + a.abs()) + 0.5
    };
    let (hl, hr) = (half(left), half(right));
    [left.y1, left.y2].into_iter().all(|y| {
        let (xl, xr) = (x_at(left, y), x_at(right, y));
        xl - hl - LANE_MARGIN >= edge(roi[0], roi[1], y)
            && xr + hr + LANE_MARGIN <= edge(roi[3], roi[2], y)
            && xl + hl + LANE_MARGIN <= xr - hr
    })
}

/// A 320×180 two-lane road with white or yellow markings and the painted
/// centre lines, which run from the bottom row up to `LANE_EXTENT·(h − 1)`.
/// Markings are redrawn until they sit inside the default detector ROI.
pub fn synth_lane_frame(yellow: bool, p: &mut Prng) -> (Image, LaneLines) {
    let (w, h) = (LANE_WIDTH, LANE_HEIGHT);
    let (yb, yt) = ((h - 1) as f64, LANE_EXTENT * (h - 1) as f64);
    let g = p.below(40) as u8 + 50;
    let mut img = noisy_fill(w, h, [g, g, g], 6, p);
    let (left, right) = loop {
        let left = LineSegment::new(p.uniform(45.0, 90.0), yb, p.uniform(145.0, 158.0), yt);
        let right = LineSegment::new(p.uniform(230.0, 275.0), yb, p.uniform(162.0, 175.0), yt);
        if lanes_fit_roi(&left, &right) {
            break (left, right);
        }
    };
    let color = if yellow { YELLOW_LINE } else { WHITE_LINE };
    for seg in [&left, &right] {
        paint_segment(&mut img, seg, color, LANE_THICKNESS);
    }
    (
        img,
        LaneLines {
            left: Some(left),
            right: Some(right),
        },
    )
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Stem of the `i`-th generated sample.
pub fn sample_stem(i: usize) -> String {
    format!("{i:05}")
}

/// Write `n` samples of `task` under `out_dir`:
///
/// * signs — `out_dir/<class>/<stem>.ppm`, classes cycling through 0‥9;
/// * vehicles — `out_dir/0` (clutter) and `out_dir/1` (vehicle), alternating;
/// * segmentation — `out_dir/images/<stem>.ppm` and `out_dir/masks/<stem>.pgm`;
/// * lanes — `out_dir/<stem>.ppm`, white then yellow alternating, and the
///   sidecar `out_dir/lanes.txt` with `stem x1 y1 x2 y2 x1 y1 x2 y2`.
///
/// Each sample draws from its own generator split off `seed` in order, so
/// the corpus is byte-identical for a given `(task, n, seed)`.
pub fn synth_generate(task: SynthTask, n: usize, seed: u64, out_dir: impl AsRef<Path>) -> Result<()> {
    if n == 0 {
        return Err(Error::param("synthetic corpus needs n > 0"));
    }
    let out = out_dir.as_ref();
    create_dir(out)?;
    let mut master = Prng::new(seed);
    let mut sidecar = String::new();
    match task {
        SynthTask::Signs | SynthTask::Vehicles => {
            let k = if task == SynthTask::Signs { SYNTH_SIGN_CLASSES } else { 2 };
            for c in 0..k.min(n) {
                create_dir(&out.join(c.to_string()))?;
            }
            for i in 0..n {
                let mut p = master.split();
                let class = i % k;
                let img = if task == SynthTask::Signs {
                    synth_sign(class, &mut p)
                } else {
                    synth_vehicle(class == 1, &mut p)
                };
                write_image(&img, out.join(class.to_string()).join(format!("{}.ppm", sample_stem(i))))?;
            }
        }
        SynthTask::Segmentation => {
            let (im, ma) = (out.join("images"), out.join("masks"));
            create_dir(&im)?;
            create_dir(&ma)?;
            for i in 0..n {
                let (img, mask) = synth_road(&mut master.split());
                write_image(&img, im.join(format!("{}.ppm", sample_stem(i))))?;
                write_image(&mask, ma.join(format!("{}.pgm", sample_stem(i))))?;
            }
        }
        SynthTask::Lanes => {
            for i in 0..n {
                let (img, lanes) = synth_lane_frame(i % 2 == 1, &mut master.split());
                let stem = sample_stem(i);
                write_image(&img, out.join(format!("{stem}.ppm")))?;
                sidecar.push_str(&stem);
                for seg in [lanes.left, lanes.right].into_iter().flatten() {
                    for v in [seg.x1, seg.y1, seg.x2, seg.y2] {
                        write!(sidecar, " {v:.4}").expect("writing to a String");
                    }
                }
                sidecar.push('\n');
            }
            write_text(&out.join(LANE_SIDECAR), &sidecar)?;
        }
    }
    Ok(())
}

/// Parse a lane sidecar into `(stem, lanes)` rows.
pub fn parse_lane_sidecar(text: &str) -> Result<Vec<(String, LaneLines)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let bad = |message: String| Error::Row { line: i + 1, message };
            if f.len() != 9 {
                return Err(bad(format!("expected 9 fields, found {}", f.len())));
            }
            let v = f[1..]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad coordinate `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((
                f[0].to_string(),
                LaneLines {
                    left: Some(LineSegment::new(v[0], v[1], v[2], v[3])),
                    right: Some(LineSegment::new(v[4], v[5], v[6], v[7])),
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{load_class_dirs, load_seg_pairs, load_mask};
    use crate::imaging::read_image;

    fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn same_seed_same_bytes() {
        for task in [SynthTask::Signs, SynthTask::Vehicles, SynthTask::Segmentation, SynthTask::Lanes] {
            let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
            synth_generate(task, 6, 7, a.path()).unwrap();
            synth_generate(task, 6, 7, b.path()).unwrap();
            assert_eq!(tree(a.path()), tree(b.path()), "{task:?}");
        }
    }

    #[test]
    fn layouts_load() {
        let d = tempfile::tempdir().unwrap();
        synth_generate(SynthTask::Signs, 25, 1, d.path().join("s")).unwrap();
        let set = load_class_dirs(d.path().join("s")).unwrap();
        assert_eq!((set.samples.len(), set.class_count), (25, 10));
        synth_generate(SynthTask::Segmentation, 3, 1, d.path().join("g")).unwrap();
        assert_eq!(load_seg_pairs(d.path().join("g/images"), d.path().join("g/masks")).unwrap().pairs.len(), 3);
        assert!(synth_generate(SynthTask::Lanes, 0, 1, d.path().join("l")).is_err());
    }

    #[test]
    fn mask_is_the_rasterized_polygon() {
        let d = tempfile::tempdir().unwrap();
        synth_generate(SynthTask::Segmentation, 4, 3, d.path()).unwrap();
        // Replay the generator to recover each polygon's pixel set independently.
        let mut master = Prng::new(3);
        for i in 0..4 {
            let (img, mask) = synth_road(&mut master.split());
            let stem = sample_stem(i);
            assert_eq!(read_image(d.path().join(format!("images/{stem}.ppm"))).unwrap(), img);
            let m = load_mask(d.path().join(format!("masks/{stem}.pgm"))).unwrap();
            assert_eq!(m.data().iter().filter(|&&v| v == 1.0).count(), mask.pixels().iter().filter(|&&v| v == 255).count());
            // Road pixels are gray (r ≈ g), ground is green-dominant; the mask
            // boundary must separate the two exactly.
            for (k, px) in img.pixels().chunks(3).enumerate() {
                let road = m.data()[k] == 1.0;
                if road {
                    assert!((px[0] as i32 - px[1] as i32).abs() <= 20);
                }
            }
        }
    }

    #[test]
    fn sidecar_endpoints_lie_on_painted_lines() {
        let d = tempfile::tempdir().unwrap();
        synth_generate(SynthTask::Lanes, 4, 5, d.path()).unwrap();
        let rows = parse_lane_sidecar(&fs::read_to_string(d.path().join(LANE_SIDECAR)).unwrap()).unwrap();
        assert_eq!(rows.len(), 4);
        for (i, (stem, lanes)) in rows.iter().enumerate() {
            let img = read_image(d.path().join(format!("{stem}.ppm"))).unwrap();
            let want = if i % 2 == 1 { YELLOW_LINE } else { WHITE_LINE };
            for seg in [lanes.left.unwrap(), lanes.right.unwrap()] {
                for (x, y) in [(seg.x1, seg.y1), (seg.x2, seg.y2)] {
                    // The painted pixel nearest the endpoint is within 1 px.
                    let near = (0..img.height())
                        .flat_map(|py| (0..img.width()).map(move |px| (px, py)))
                        .filter(|&(px, py)| img.pixel(px, py) == want)
                        .map(|(px, py)| (px as f64 - x).hypot(py as f64 - y))
                        .fold(f64::INFINITY, f64::min);
                    assert!(near <= 1.0, "{stem}: {near}");
                }
            }
        }
    }

    #[test]
    fn sign_classes_differ() {
        let mut p = Prng::new(0);
        let a = synth_sign(0, &mut p);
        let b = synth_sign(1, &mut p);
        assert_ne!(a, b);
        assert_eq!((a.width(), a.height()), (32, 32));
    }
}
