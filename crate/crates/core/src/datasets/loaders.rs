use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};
use crate::imaging::{read_image, Image, PixelFormat};
use crate::rng::Prng;
use crate::tensor::Tensor;

const IMAGE_EXTENSIONS: [&str; 4] = ["ppm", "pgm", "pnm", "png"];
/// Mask pixels at or above this value are foreground.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct DrivingRecord {
    pub center: String,
    pub left: String,
    pub right: String,
    pub steering: f64,
    pub throttle: f64,
    pub reverse: u8,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifiedImageSet {
    pub samples: Vec<(PathBuf, usize)>,
    pub class_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationPairSet {
    /// `(image, mask)` paths, ordered by stem.
    pub pairs: Vec<(PathBuf, PathBuf)>,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
    out.sort();
    Ok(out)
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Samples from numeric class directories `root/0 … root/K−1`, classes in
/// numeric order and files in lexicographic order within each class.
pub fn load_class_dirs(root: impl AsRef<Path>) -> Result<ClassifiedImageSet> {
    let root = root.as_ref();
    let mut classes: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in read_dir_sorted(root)? {
        if !entry.is_dir() {
            continue;
        }
        let name = entry.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        match name.parse::<usize>() {
            Ok(k) if name.chars().all(|c| c.is_ascii_digit()) => {
                if classes.insert(k, entry.clone()).is_some() {
                    return Err(Error::Dataset(format!("class {k} appears twice under {}", root.display())));
                }
            }
            _ => warn!("skipping non-numeric directory {}", entry.display()),
        }
    }
    if let Some((i, (&k, _))) = classes.iter().enumerate().find(|(i, (&k, _))| *i != k) {
        return Err(Error::Dataset(format!(
            "class indices under {} are not contiguous: expected {i}, found {k}",
            root.display()
        )));
    }
    let mut samples = Vec::new();
    for (&k, dir) in &classes {
        let files: Vec<PathBuf> = read_dir_sorted(dir)?.into_iter().filter(|p| is_image(p)).collect();
        if files.is_empty() {
            warn!("class directory {} has no images", dir.display());
        }
        samples.extend(files.into_iter().map(|p| (p, k)));
    }
    Ok(ClassifiedImageSet {
        samples,
        class_count: classes.len(),
    })
}

/// Pair images with masks by file stem. Every unmatched file on either side
/// is reported in one error.
pub fn load_seg_pairs(images_dir: impl AsRef<Path>, masks_dir: impl AsRef<Path>) -> Result<SegmentationPairSet> {
    let by_stem = |dir: &Path| -> Result<BTreeMap<String, PathBuf>> {
        Ok(read_dir_sorted(dir)?
            .into_iter()
            .filter(|p| is_image(p))
            .map(|p| (stem(&p), p))
            .collect())
    };
    let images = by_stem(images_dir.as_ref())?;
    let mut masks = by_stem(masks_dir.as_ref())?;
    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    for (s, img) in images {
        match masks.remove(&s) {
            Some(m) => pairs.push((img, m)),
            None => missing.push(format!("image `{s}` has no mask")),
        }
    }
    missing.extend(masks.keys().map(|s| format!("mask `{s}` has no image")));
    if !missing.is_empty() {
        return Err(Error::Dataset(missing.join("; ")));
    }
    Ok(SegmentationPairSet { pairs })
}

/// Binarize a mask image: `1` where the (first channel) value is at least
/// [`MASK_THRESHOLD`]. Returns `1×H×W`.
pub fn binarize_mask(mask: &Image) -> Tensor {
    let c = mask.channels();
    let data = mask
        .pixels()
        .chunks(c)
        .map(|p| f64::from(u8::from(p[0] >= MASK_THRESHOLD)))
        .collect();
    Tensor::new(vec![1, mask.height(), mask.width()], data).expect("image dims are positive")
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Tensor> {
    Ok(binarize_mask(&read_image(path)?))
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, line: usize) -> Result<T> {
    field.parse().map_err(|_| Error::Row {
        line,
        message: format!("cannot parse {name} from `{field}`"),
    })
}

/// Parse a comma-separated driving log with columns
/// `center,left,right,steering,throttle,reverse,speed`. A first row whose
/// steering field is not numeric is taken as a header. Blank lines are
/// ignored; quoting is not supported.
pub fn parse_driving_log(csv_path: impl AsRef<Path>) -> Result<Vec<DrivingRecord>> {
    let path = csv_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_driving_log_str(&text)
}

pub fn parse_driving_log_str(text: &str) -> Result<Vec<DrivingRecord>> {
    let mut out = Vec::new();
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(Error::Row {
                line,
                message: format!("expected 7 fields, found {}", f.len()),
            });
        }
        if std::mem::take(&mut first) && f[3].parse::<f64>().is_err() {
            continue;
        }
        let reverse: f64 = parse_field(f[5], "reverse", line)?;
        if reverse != 0.0 && reverse != 1.0 {
            return Err(Error::Row {
                line,
                message: format!("reverse must be 0 or 1, found `{}`", f[5]),
            });
        }
        out.push(DrivingRecord {
            center: f[0].to_string(),
            left: f[1].to_string(),
            right: f[2].to_string(),
            steering: parse_field(f[3], "steering", line)?,
            throttle: parse_field(f[4], "throttle", line)?,
            reverse: reverse as u8,
            speed: parse_field(f[6], "speed", line)?,
        });
    }
    Ok(out)
}

/// Seeded Fisher–Yates shuffle, then the first `floor(ratio·n)` samples go to
/// training and the rest to test.
pub fn split_train_test<T: Clone>(samples: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if samples.is_empty() {
        return Err(Error::param("cannot split an empty sample list"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::param(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    Prng::new(seed).shuffle(&mut order);
    let cut = (ratio * samples.len() as f64).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

/// Load images as normalized `N×3×H×W` inputs with one-hot targets, resizing
/// to `size × size` when needed.
pub fn load_classification(set: &ClassifiedImageSet, size: usize, classes: usize) -> Result<(Tensor, Tensor)> {
    let n = set.samples.len();
    let mut x = Vec::with_capacity(n * 3 * size * size);
    let mut y = vec![0.0; n * classes];
    for (i, (path, k)) in set.samples.iter().enumerate() {
        if *k >= classes {
            return Err(Error::Dataset(format!("class {k} does not fit a {classes}-way head")));
        }
        x.extend(load_rgb_tensor(path, size, size)?.into_data());
        y[i * classes + k] = 1.0;
    }
    Ok((Tensor::new(vec![n, 3, size, size], x)?, Tensor::new(vec![n, classes], y)?))
}

/// An RGB image scaled to `[0, 1]`, resized to `w × h` if needed. Gray
/// images are replicated across channels.
pub fn load_rgb_tensor(path: &Path, w: usize, h: usize) -> Result<Tensor> {
    let wrap = |e: Error| Error::Sample {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut img = read_image(path).map_err(wrap)?;
    if img.format() == PixelFormat::Gray8 {
        let px = img.pixels().iter().flat_map(|&v| [v, v, v]).collect();
        img = Image::new(img.width(), img.height(), PixelFormat::Rgb8, px).map_err(wrap)?;
    }
    if (img.width(), img.height()) != (w, h) {
        img = crate::imaging::resize_bilinear(&img, w, h).map_err(wrap)?;
    }
    Ok(img.normalize())
}

/// Segmentation inputs `N×3×S×S` and binary masks `N×1×S×S`. Masks are
/// resized with nearest sampling so they stay binary.
pub fn load_segmentation(set: &SegmentationPairSet, size: usize) -> Result<(Tensor, Tensor)> {
    let n = set.pairs.len();
    let mut x = Vec::with_capacity(n * 3 * size * size);
    let mut y = Vec::with_capacity(n * size * size);
    for (img, mask) in &set.pairs {
        x.extend(load_rgb_tensor(img, size, size)?.into_data());
        let m = load_mask(mask)?;
        let (mh, mw) = (m.shape()[1], m.shape()[2]);
        for r in 0..size {
            for c in 0..size {
                y.push(m.data()[(r * mh / size) * mw + c * mw / size]);
            }
        }
    }
    Ok((Tensor::new(vec![n, 3, size, size], x)?, Tensor::new(vec![n, 1, size, size], y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::write_image;

    fn touch_image(path: &Path, v: u8) {
        let img = Image::filled(4, 4, PixelFormat::Rgb8, &[v, v, v]).unwrap();
        write_image(&img, path).unwrap();
    }

    #[test]
    fn class_dirs_count_and_order() {
        let d = tempfile::tempdir().unwrap();
        for k in ["0", "1"] {
            fs::create_dir(d.path().join(k)).unwrap();
            for f in ["b.ppm", "a.ppm"] {
                touch_image(&d.path().join(k).join(f), 1);
            }
        }
        fs::create_dir(d.path().join("notes")).unwrap();
        let set = load_class_dirs(d.path()).unwrap();
        assert_eq!(set.class_count, 2);
        assert_eq!(set.samples.len(), 4);
        assert!(set.samples[0].0.ends_with("0/a.ppm"));
        assert_eq!(set.samples.iter().map(|s| s.1).collect::<Vec<_>>(), vec![0, 0, 1, 1]);
        assert_eq!(load_class_dirs(d.path()).unwrap(), set);
    }

    #[test]
    fn gap_in_class_dirs_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        for k in ["0", "2"] {
            fs::create_dir(d.path().join(k)).unwrap();
        }
        assert!(matches!(load_class_dirs(d.path()), Err(Error::Dataset(_))));
    }

    #[test]
    fn numeric_order_not_lexicographic() {
        let d = tempfile::tempdir().unwrap();
        for k in 0..11 {
            fs::create_dir(d.path().join(k.to_string())).unwrap();
            touch_image(&d.path().join(k.to_string()).join("x.ppm"), 0);
        }
        let set = load_class_dirs(d.path()).unwrap();
        assert_eq!(set.samples.iter().map(|s| s.1).collect::<Vec<_>>(), (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn seg_pairs_match_and_report() {
        let d = tempfile::tempdir().unwrap();
        let (im, ma) = (d.path().join("images"), d.path().join("masks"));
        fs::create_dir(&im).unwrap();
        fs::create_dir(&ma).unwrap();
        for s in ["a", "b", "c"] {
            touch_image(&im.join(format!("{s}.ppm")), 0);
            touch_image(&ma.join(format!("{s}.ppm")), 255);
        }
        assert_eq!(load_seg_pairs(&im, &ma).unwrap().pairs.len(), 3);
        touch_image(&im.join("lonely.ppm"), 0);
        match load_seg_pairs(&im, &ma) {
            Err(Error::Dataset(m)) => assert!(m.contains("lonely")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mask_threshold() {
        let m = Image::new(4, 1, PixelFormat::Gray8, vec![0, 127, 128, 255]).unwrap();
        assert_eq!(binarize_mask(&m).data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn driving_log_rows() {
        let text = "center,left,right,steering,throttle,reverse,speed\n\
            center_2022_04_10_12_44_27_913.jpg,left_2022_04_10_12_44_27_913.jpg,right_2022_04_10_12_44_27_913.jpg,0.00,1.0,0,21.69468\n";
        let rows = parse_driving_log_str(text).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.steering, r.throttle, r.reverse, r.speed), (0.0, 1.0, 0, 21.69468));
        assert_eq!(r.left, "left_2022_04_10_12_44_27_913.jpg");
        assert!(parse_driving_log_str("").unwrap().is_empty());
        match parse_driving_log_str("a,b,c,0.1,1,0,3\na,b,c,0.1,1,0\n") {
            Err(Error::Row { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_driving_log_str("a,b,c,0.1,x,0,3"), Err(Error::Row { line: 1, .. })));
    }

    #[test]
    fn split_counts_and_determinism() {
        let v: Vec<usize> = (0..10).collect();
        let (a, b) = split_train_test(&v, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut all = [a.clone(), b.clone()].concat();
        all.sort();
        assert_eq!(all, v);
        assert_eq!(split_train_test(&v, 0.8, 3).unwrap(), (a, b));
        let big: Vec<u32> = (0..17760).collect();
        let (tr, te) = split_train_test(&big, 0.8, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (14208, 3552));
        assert!(split_train_test::<u8>(&[], 0.8, 0).is_err());
    }
}
