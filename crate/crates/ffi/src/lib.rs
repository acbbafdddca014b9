//! C ABI over `driveperc`.
//!
//! Every function returns a [`DpStatus`]; on failure a message describing
//! the last error on the calling thread is available from
//! [`dp_last_error_message`]. Objects are opaque handles created by a
//! `*_new`/`*_load`/`*_read` function and released with the matching
//! `*_free`. Panics never cross the boundary: they are reported as
//! `DP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use driveperc::imaging::{read_image, write_image, Image, PixelFormat};
use driveperc::lane::{run_pipeline, LineSegment, PipelineConfig};
use driveperc::metrics::{rmse, roc_auc};
use driveperc::models::load_checkpoint;
use driveperc::nn::ModelGraph;
use driveperc::{Error, Tensor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Format = 4,
    Io = 5,
    Unsupported = 6,
    Panic = 7,
}

impl From<&Error> for DpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) | Error::Layer { .. } | Error::Bounds(_) => DpStatus::Dimension,
            Error::Parameter(_) | Error::Config(_) | Error::Dataset(_) | Error::Row { .. } => DpStatus::InvalidArgument,
            Error::Parse { .. } | Error::Format { .. } => DpStatus::Format,
            Error::UnsupportedFormat(_) | Error::UnsupportedVersion { .. } => DpStatus::Unsupported,
            Error::Io { .. } => DpStatus::Io,
            Error::Sample { .. } | Error::Stage { .. } => match std::error::Error::source(e) {
                Some(inner) => inner.downcast_ref::<Error>().map_or(DpStatus::InvalidArgument, DpStatus::from),
                None => DpStatus::InvalidArgument,
            },
        }
    }
}

/// An 8-bit RGB or grayscale image.
pub struct DpImage(Image);

/// Lane pipeline parameters.
pub struct DpPipelineConfig(PipelineConfig);

/// A trained model loaded from a checkpoint.
pub struct DpModel(ModelGraph);

/// One lane segment from the bottom row upwards.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpSegment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

/// Detected lanes; `has_left`/`has_right` are 0 when a side is absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpLanes {
    pub has_left: u8,
    pub left: DpSegment,
    pub has_right: u8,
    pub right: DpSegment,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DpStatus, msg: impl Into<String>) -> DpStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> DpStatus {
    let status = DpStatus::from(&e);
    fail(status, e.to_string())
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), DpStatus>) -> DpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(DpStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, DpStatus>;
}

impl<T> OrStatus<T> for driveperc::Result<T> {
    fn or_status(self) -> Result<T, DpStatus> {
        self.map_err(from_error)
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, DpStatus> {
    p.as_ref().ok_or_else(|| fail(DpStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DpStatus> {
    p.as_mut().ok_or_else(|| fail(DpStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, DpStatus> {
    if p.is_null() {
        return Err(fail(DpStatus::NullPointer, "path is NULL"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DpStatus::InvalidArgument, "path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DpStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DpStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len − 1` bytes). Returns the full message length excluding
/// the NUL, or 0 when there is no message.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn dp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Read a PPM/PGM/PNG image.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_image_read(path: *const c_char, out: *mut *mut DpImage) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let img = read_image(path_arg(path)?).or_status()?;
        *out = into_handle(DpImage(img));
        Ok(())
    })
}

/// Wrap `width × height` interleaved RGB bytes (`len == width·height·3`).
///
/// # Safety
/// `pixels` must point to `len` readable bytes; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_image_from_rgb(
    width: usize,
    height: usize,
    pixels: *const u8,
    len: usize,
    out: *mut *mut DpImage,
) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let px = slice_arg(pixels, len, "pixels")?;
        let img = Image::new(width, height, PixelFormat::Rgb8, px.to_vec()).or_status()?;
        *out = into_handle(DpImage(img));
        Ok(())
    })
}

/// Write an image as PPM (RGB) or PGM (gray).
///
/// # Safety
/// `image` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn dp_image_write(image: *const DpImage, path: *const c_char) -> DpStatus {
    guard(|| {
        let img = non_null(image, "image")?;
        write_image(&img.0, path_arg(path)?).or_status()
    })
}

/// Width, height and channel count (1 or 3).
///
/// # Safety
/// `image` must come from this library; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dp_image_dims(
    image: *const DpImage,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
) -> DpStatus {
    guard(|| {
        let img = &non_null(image, "image")?.0;
        for (p, v) in [(width, img.width()), (height, img.height()), (channels, img.channels())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copy the interleaved pixel bytes into `buf`, which must hold exactly
/// `width·height·channels` bytes.
///
/// # Safety
/// `image` must come from this library; `buf` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dp_image_pixels(image: *const DpImage, buf: *mut u8, len: usize) -> DpStatus {
    guard(|| {
        let px = non_null(image, "image")?.0.pixels();
        if len != px.len() {
            return Err(fail(DpStatus::Dimension, format!("buffer holds {len} bytes, image has {}", px.len())));
        }
        if buf.is_null() {
            return Err(fail(DpStatus::NullPointer, "buf is NULL"));
        }
        ptr::copy_nonoverlapping(px.as_ptr(), buf, len);
        Ok(())
    })
}

/// # Safety
/// `image` must come from this library (or be NULL) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dp_image_free(image: *mut DpImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Default lane pipeline parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_pipeline_config_new(out: *mut *mut DpPipelineConfig) -> DpStatus {
    guard(|| {
        *out_ptr(out, "out")? = into_handle(DpPipelineConfig(PipelineConfig::default()));
        Ok(())
    })
}

/// Parameters from the body of a `[pipeline]` TOML table; unset keys keep
/// their defaults and unknown keys are rejected.
///
/// # Safety
/// `toml` must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_pipeline_config_from_toml(toml: *const c_char, out: *mut *mut DpPipelineConfig) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if toml.is_null() {
            return Err(fail(DpStatus::NullPointer, "toml is NULL"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| fail(DpStatus::InvalidArgument, "toml is not UTF-8"))?;
        let cfg = driveperc::cli::Config::from_toml(&format!("[pipeline]\n{text}")).or_status()?;
        *out = into_handle(DpPipelineConfig(cfg.pipeline));
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library (or be NULL) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dp_pipeline_config_free(config: *mut DpPipelineConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

fn segment(seg: Option<LineSegment>) -> (u8, DpSegment) {
    seg.map_or((0, DpSegment::default()), |s| {
        (
            1,
            DpSegment {
                x1: s.x1,
                y1: s.y1,
                x2: s.x2,
                y2: s.y2,
            },
        )
    })
}

/// Run the lane pipeline on an RGB image. `config` may be NULL for the
/// defaults; `overlay`, when not NULL, receives a new annotated image.
///
/// # Safety
/// Handles must come from this library; `lanes` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_detect_lanes(
    image: *const DpImage,
    config: *const DpPipelineConfig,
    lanes: *mut DpLanes,
    overlay: *mut *mut DpImage,
) -> DpStatus {
    guard(|| {
        let img = non_null(image, "image")?;
        let lanes = out_ptr(lanes, "lanes")?;
        let default_cfg;
        let cfg = match config.as_ref() {
            Some(c) => &c.0,
            None => {
                default_cfg = PipelineConfig::default();
                &default_cfg
            }
        };
        let out = run_pipeline(&img.0, cfg, false).or_status()?;
        let (has_left, left) = segment(out.lanes.left);
        let (has_right, right) = segment(out.lanes.right);
        *lanes = DpLanes {
            has_left,
            left,
            has_right,
            right,
        };
        if let Some(o) = overlay.as_mut() {
            *o = into_handle(DpImage(out.annotated));
        }
        Ok(())
    })
}

/// Load an `NNW1` checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_model_load(path: *const c_char, out: *mut *mut DpModel) -> DpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = load_checkpoint(path_arg(path)?).or_status()?;
        *out = into_handle(DpModel(model));
        Ok(())
    })
}

/// Per-sample input and output element counts.
///
/// # Safety
/// `model` must come from this library; output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn dp_model_sizes(model: *const DpModel, input_len: *mut usize, output_len: *mut usize) -> DpStatus {
    guard(|| {
        let m = &non_null(model, "model")?.0;
        if let Some(p) = input_len.as_mut() {
            *p = m.input_shape().iter().product();
        }
        if let Some(p) = output_len.as_mut() {
            *p = m.output_shape().iter().product();
        }
        Ok(())
    })
}

/// Inference on `batch` samples laid out contiguously (channels first).
/// `input_len` and `output_len` are total element counts and must equal
/// `batch` times the per-sample sizes.
///
/// # Safety
/// `input` must point to `input_len` doubles, `output` to `output_len`.
#[no_mangle]
pub unsafe extern "C" fn dp_model_predict(
    model: *const DpModel,
    batch: usize,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> DpStatus {
    guard(|| {
        let m = &non_null(model, "model")?.0;
        let (per_in, per_out): (usize, usize) =
            (m.input_shape().iter().product(), m.output_shape().iter().product());
        if batch == 0 || input_len != batch * per_in || output_len != batch * per_out {
            return Err(fail(
                DpStatus::Dimension,
                format!(
                    "batch {batch} needs {} inputs and {} outputs, got {input_len} and {output_len}",
                    batch * per_in,
                    batch * per_out
                ),
            ));
        }
        let x = slice_arg(input, input_len, "input")?;
        if output.is_null() {
            return Err(fail(DpStatus::NullPointer, "output is NULL"));
        }
        let mut shape = vec![batch];
        shape.extend_from_slice(m.input_shape());
        let y = m.predict(&Tensor::new(shape, x.to_vec()).or_status()?).or_status()?;
        ptr::copy_nonoverlapping(y.data().as_ptr(), output, output_len);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library (or be NULL) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dp_model_free(model: *mut DpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve; `labels` are 0/1.
///
/// # Safety
/// `scores` and `labels` must point to `n` elements; `auc` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_roc_auc(scores: *const f64, labels: *const u8, n: usize, auc: *mut f64) -> DpStatus {
    guard(|| {
        let out = out_ptr(auc, "auc")?;
        let s = slice_arg(scores, n, "scores")?;
        let l = slice_arg(labels, n, "labels")?;
        if l.iter().any(|&v| v > 1) {
            return Err(fail(DpStatus::InvalidArgument, "labels must be 0 or 1"));
        }
        let labels: Vec<bool> = l.iter().map(|&v| v == 1).collect();
        *out = roc_auc(s, &labels).or_status()?.1;
        Ok(())
    })
}

/// Root mean squared error of `n` predictions.
///
/// # Safety
/// `y_true` and `y_pred` must point to `n` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_rmse(y_true: *const f64, y_pred: *const f64, n: usize, out: *mut f64) -> DpStatus {
    guard(|| {
        let o = out_ptr(out, "out")?;
        *o = rmse(slice_arg(y_true, n, "y_true")?, slice_arg(y_pred, n, "y_pred")?).or_status()?;
        Ok(())
    })
}
