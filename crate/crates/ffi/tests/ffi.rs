use std::ffi::{CStr, CString};
use std::ptr;

use driveperc::datasets::synth_lane_frame;
use driveperc::imaging::write_image;
use driveperc::lane::{run_pipeline, PipelineConfig};
use driveperc::models::save_checkpoint;
use driveperc::nn::{LayerSpec, ModelGraph};
use driveperc::{Prng, Tensor};
use driveperc_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { dp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(dp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn lanes_match_the_rust_pipeline() {
    let (frame, _) = synth_lane_frame(true, &mut Prng::new(4));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.ppm");
    write_image(&frame, &path).unwrap();

    let mut img = ptr::null_mut();
    assert_eq!(unsafe { dp_image_read(cpath(&path).as_ptr(), &mut img) }, DpStatus::Ok);
    let (mut w, mut h, mut c) = (0, 0, 0);
    assert_eq!(unsafe { dp_image_dims(img, &mut w, &mut h, &mut c) }, DpStatus::Ok);
    assert_eq!((w, h, c), (frame.width(), frame.height(), 3));

    let mut lanes = DpLanes::default();
    let mut overlay = ptr::null_mut();
    assert_eq!(unsafe { dp_detect_lanes(img, ptr::null(), &mut lanes, &mut overlay) }, DpStatus::Ok);
    let expected = run_pipeline(&frame, &PipelineConfig::default(), false).unwrap();
    let l = expected.lanes.left.unwrap();
    assert_eq!(lanes.has_left, 1);
    assert_eq!((lanes.left.x1, lanes.left.y1, lanes.left.x2, lanes.left.y2), (l.x1, l.y1, l.x2, l.y2));
    assert_eq!(lanes.has_right, expected.lanes.right.is_some() as u8);

    let mut px = vec![0u8; w * h * 3];
    assert_eq!(unsafe { dp_image_pixels(overlay, px.as_mut_ptr(), px.len()) }, DpStatus::Ok);
    assert_eq!(px, expected.annotated.pixels());
    assert_eq!(unsafe { dp_image_pixels(overlay, px.as_mut_ptr(), px.len() - 1) }, DpStatus::Dimension);

    unsafe {
        dp_image_free(overlay);
        dp_image_free(img);
    }
}

#[test]
fn config_from_toml() {
    let mut cfg = ptr::null_mut();
    let text = CString::new("canny_low = 40.0\n").unwrap();
    assert_eq!(unsafe { dp_pipeline_config_from_toml(text.as_ptr(), &mut cfg) }, DpStatus::Ok);
    unsafe { dp_pipeline_config_free(cfg) };

    let bad = CString::new("cany_low = 40.0\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { dp_pipeline_config_from_toml(bad.as_ptr(), &mut cfg) }, DpStatus::InvalidArgument);
    assert!(cfg.is_null());
    assert!(last_error().contains("cany_low"));
}

#[test]
fn image_from_rgb_checks_length() {
    let px = [0u8; 12];
    let mut img = ptr::null_mut();
    assert_eq!(unsafe { dp_image_from_rgb(2, 2, px.as_ptr(), 12, &mut img) }, DpStatus::Ok);
    // Gray-sized buffer for an RGB image.
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { dp_image_from_rgb(2, 2, px.as_ptr(), 4, &mut bad) }, DpStatus::Dimension);
    // The pipeline needs more than 2×2 pixels of road but must fail cleanly.
    let mut lanes = DpLanes::default();
    let s = unsafe { dp_detect_lanes(img, ptr::null(), &mut lanes, ptr::null_mut()) };
    assert!(s == DpStatus::Ok || s == DpStatus::Dimension || s == DpStatus::InvalidArgument, "{s:?}");
    unsafe { dp_image_free(img) };
}

#[test]
fn model_predict_matches_rust() {
    let mut p = Prng::new(8);
    let model = ModelGraph::new(&[3], vec![LayerSpec::dense(2)], &mut p).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.nnw");
    save_checkpoint(&model, &path).unwrap();

    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { dp_model_load(cpath(&path).as_ptr(), &mut handle) }, DpStatus::Ok);
    let (mut i, mut o) = (0, 0);
    assert_eq!(unsafe { dp_model_sizes(handle, &mut i, &mut o) }, DpStatus::Ok);
    assert_eq!((i, o), (3, 2));

    let x = [0.5, -1.0, 2.0, 1.0, 0.0, -0.25];
    let mut y = [0.0; 4];
    assert_eq!(unsafe { dp_model_predict(handle, 2, x.as_ptr(), 6, y.as_mut_ptr(), 4) }, DpStatus::Ok);
    let expected = model.predict(&Tensor::new(vec![2, 3], x.to_vec()).unwrap()).unwrap();
    assert_eq!(&y[..], expected.data());
    assert_eq!(unsafe { dp_model_predict(handle, 2, x.as_ptr(), 5, y.as_mut_ptr(), 4) }, DpStatus::Dimension);
    unsafe { dp_model_free(handle) };

    std::fs::write(&path, b"JUNK").unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { dp_model_load(cpath(&path).as_ptr(), &mut handle) }, DpStatus::Format);
    assert!(last_error().contains("magic"));
    assert!(handle.is_null());
}

#[test]
fn metrics() {
    let scores = [0.9, 0.8, 0.4, 0.4];
    let labels = [1u8, 0, 1, 0];
    let mut auc = 0.0;
    assert_eq!(unsafe { dp_roc_auc(scores.as_ptr(), labels.as_ptr(), 4, &mut auc) }, DpStatus::Ok);
    assert_eq!(auc, 0.625);
    let ones = [1u8; 4];
    assert_eq!(unsafe { dp_roc_auc(scores.as_ptr(), ones.as_ptr(), 4, &mut auc) }, DpStatus::InvalidArgument);

    let mut r = 0.0;
    let (a, b) = ([0.0, 0.0], [1.0, 1.0]);
    assert_eq!(unsafe { dp_rmse(a.as_ptr(), b.as_ptr(), 2, &mut r) }, DpStatus::Ok);
    assert_eq!(r, 1.0);
}

#[test]
fn null_pointers_are_reported() {
    let mut img = ptr::null_mut();
    assert_eq!(unsafe { dp_image_read(ptr::null(), &mut img) }, DpStatus::NullPointer);
    assert!(last_error().contains("NULL"));
    assert_eq!(unsafe { dp_rmse(ptr::null(), ptr::null(), 1, ptr::null_mut()) }, DpStatus::NullPointer);
    let mut lanes = DpLanes::default();
    assert_eq!(
        unsafe { dp_detect_lanes(ptr::null(), ptr::null(), &mut lanes, ptr::null_mut()) },
        DpStatus::NullPointer
    );
    unsafe {
        dp_image_free(ptr::null_mut());
        dp_model_free(ptr::null_mut());
        dp_pipeline_config_free(ptr::null_mut());
    }
    // NULL buffer just reports the length.
    assert!(unsafe { dp_last_error_message(ptr::null_mut(), 0) } > 0);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut img = ptr::null_mut();
    let p = cpath(&dir.path().join("absent.ppm"));
    assert_eq!(unsafe { dp_image_read(p.as_ptr(), &mut img) }, DpStatus::Io);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/driveperc.h")).unwrap();
    for name in [
        "dp_version",
        "dp_last_error_message",
        "dp_image_read",
        "dp_image_from_rgb",
        "dp_image_write",
        "dp_image_dims",
        "dp_image_pixels",
        "dp_image_free",
        "dp_pipeline_config_new",
        "dp_pipeline_config_from_toml",
        "dp_pipeline_config_free",
        "dp_detect_lanes",
        "dp_model_load",
        "dp_model_sizes",
        "dp_model_predict",
        "dp_model_free",
        "dp_roc_auc",
        "dp_rmse",
        "DP_STATUS_OK",
        "typedef struct DpImage DpImage",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/driveperc.h");
    let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
