//! End-to-end runs of the `driveperc` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use driveperc::datasets::{synth_lane_frame, synth_generate, SynthTask};
use driveperc::imaging::{write_image, Image, PixelFormat};
use driveperc::metrics::{parse_report_csv, REPORT_COLUMNS};
use driveperc::models::decode_tensor;
use driveperc::Prng;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_driveperc"));
    c.env_remove("DRIVEPERC_SEED").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

/// Every file under `dir` with its bytes, in path order.
fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn lane_detect_directory_preserves_order() {
    let d = tempfile::tempdir().unwrap();
    let frames = d.path().join("frames");
    synth_generate(SynthTask::Lanes, 3, 7, &frames).unwrap();
    let out = d.path().join("out");
    let o = run(&["lane-detect", "--input", s(&frames), "--output", s(&out), "--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        names(&out),
        [
            "00000.lanes.txt",
            "00000.overlay.ppm",
            "00001.lanes.txt",
            "00001.overlay.ppm",
            "00002.lanes.txt",
            "00002.overlay.ppm"
        ]
    );
    let text = fs::read_to_string(out.join("00001.lanes.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("left ") && lines[1].starts_with("right "));

    // One worker and four workers give byte-identical outputs.
    let serial = d.path().join("serial");
    assert_eq!(code(&run(&["lane-detect", "--input", s(&frames), "--output", s(&serial), "--jobs", "1"])), 0);
    assert_eq!(tree(&out), tree(&serial));
}

#[test]
fn lane_detect_stages_writes_six_files() {
    let d = tempfile::tempdir().unwrap();
    let (img, _) = synth_lane_frame(false, &mut Prng::new(1));
    let frame = d.path().join("road.ppm");
    write_image(&img, &frame).unwrap();
    let out = d.path().join("out");
    let o = run(&["lane-detect", "--input", s(&frame), "--output", s(&out), "--stages"]);
    assert_eq!(code(&o), 0);
    let all = names(&out);
    for stage in ["gray", "blur", "canny", "roi", "hough", "overlay"] {
        assert!(all.iter().any(|n| n.starts_with(&format!("road.{stage}."))), "{stage} missing: {all:?}");
    }
    assert!(all.contains(&"road.lanes.txt".to_string()));
}

#[test]
fn lane_detect_usage_and_partial_failures() {
    let d = tempfile::tempdir().unwrap();
    let missing = d.path().join("nope");
    let o = run(&["lane-detect", "--input", s(&missing), "--output", s(&d.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--help"));
    assert_eq!(code(&run(&["lane-detect", "--output", "x"])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);

    // A grayscale frame fails the pipeline; the colour frame still goes through.
    let frames = d.path().join("frames");
    fs::create_dir(&frames).unwrap();
    let (img, _) = synth_lane_frame(false, &mut Prng::new(2));
    write_image(&img, frames.join("a.ppm")).unwrap();
    write_image(&Image::filled(8, 8, PixelFormat::Gray8, &[9]).unwrap(), frames.join("b.pgm")).unwrap();
    let out = d.path().join("out");
    let o = run(&["lane-detect", "--input", s(&frames), "--output", s(&out)]);
    assert_eq!(code(&o), 2);
    assert_eq!(names(&out), ["a.lanes.txt", "a.overlay.ppm"]);
}

#[test]
fn config_validation_and_dump() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.toml");
    fs::write(&bad, "[pipeline]\nthreshold = 3\n").unwrap();
    let o = run(&["lane-detect", "--input", ".", "--output", ".", "--config", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));

    let o = run(&["lane-detect", "--dump-config"]);
    assert_eq!(code(&o), 0);
    let dumped = d.path().join("dumped.toml");
    fs::write(&dumped, &o.stdout).unwrap();
    let again = run(&["lane-detect", "--dump-config", "--config", s(&dumped)]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn train_is_deterministic_and_dump_config_reproduces_it() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("veh");
    synth_generate(SynthTask::Vehicles, 12, 3, &data).unwrap();
    let train = |out: &Path, extra: &[&str]| {
        let mut args = vec!["train", "--task", "vehicles", "--data", s(&data), "--out", s(out)];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    let (a, b) = (d.path().join("a.nnw"), d.path().join("b.nnw"));
    let o = train(&a, &["--epochs", "2", "--batch-size", "4", "--seed", "9"]);
    let stderr = String::from_utf8_lossy(&o.stderr);
    let epochs: Vec<&str> = stderr.lines().filter(|l| l.starts_with("epoch ")).collect();
    assert_eq!(epochs.len(), 2);
    for (i, l) in epochs.iter().enumerate() {
        let f: Vec<&str> = l.split(' ').collect();
        assert_eq!((f.len(), f[1], f[2]), (4, (i + 1).to_string().as_str(), "loss"));
        assert!(f[3].parse::<f64>().unwrap().is_finite());
    }
    bin()
        .args(["train", "--task", "vehicles", "--data", s(&data), "--out", s(&b), "--epochs", "2", "--batch-size", "4"])
        .env("DRIVEPERC_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let dump = run(&["train", "--task", "vehicles", "--epochs", "2", "--batch-size", "4", "--dump-config"]);
    let cfg = d.path().join("train.toml");
    fs::write(&cfg, &dump.stdout).unwrap();
    let c = d.path().join("c.nnw");
    train(&c, &["--config", s(&cfg), "--seed", "9"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let other = d.path().join("other.nnw");
    train(&other, &["--epochs", "2", "--batch-size", "4", "--seed", "10"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&other).unwrap());
}

#[test]
fn sign_task_defaults_are_reported() {
    let o = run(&["train", "--task", "signs", "--dump-config"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for line in ["epochs = 20", "batch_size = 64", "learning_rate = 0.001"] {
        assert!(text.contains(line), "{line} missing in\n{text}");
    }
    let o = run(&["train", "--task", "clone", "--dump-config"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for line in ["epochs = 50", "batch_size = 64", "learning_rate = 0.001"] {
        assert!(text.contains(line), "{line} missing in\n{text}");
    }
}

#[test]
fn eval_of_an_overfit_model_and_bad_checkpoints() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("veh");
    synth_generate(SynthTask::Vehicles, 10, 5, &data).unwrap();
    let ckpt = d.path().join("m.nnw");
    let o = run(&[
        "train", "--task", "vehicles", "--data", s(&data), "--out", s(&ckpt), "--epochs", "120", "--batch-size", "8",
        "--seed", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let report = d.path().join("r.csv");
    let roc = d.path().join("roc.csv");
    let o = run(&[
        "eval", "--task", "vehicles", "--data", s(&data), "--ckpt", s(&ckpt), "--report", s(&report), "--format",
        "csv", "--split", "train", "--roc", s(&roc),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    let rows = parse_report_csv(&text).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].model, "vehicles");
    assert_eq!(rows[0].accuracy, Some(1.0));
    assert_eq!(rows[0].auc, Some(1.0));
    let roc = fs::read_to_string(&roc).unwrap();
    assert_eq!(roc.lines().nth(1), Some("0.000000,0.000000"));
    assert_eq!(roc.lines().last(), Some("1.000000,1.000000"));

    let bad = d.path().join("bad.nnw");
    fs::write(&bad, b"NOPE\x01\x00\x00\x00").unwrap();
    let o = run(&["eval", "--task", "vehicles", "--data", s(&data), "--ckpt", s(&bad), "--report", s(&report)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("format error"));
}

#[test]
fn gradcheck_passes() {
    let o = run(&["gradcheck", "--seeds", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.lines().count() >= 20);
    assert!(out.lines().all(|l| l.ends_with("PASS")));
}

#[test]
fn preprocess_writes_one_tensor_per_row() {
    let d = tempfile::tempdir().unwrap();
    let img_dir = d.path().join("IMG");
    fs::create_dir(&img_dir).unwrap();
    let mut p = Prng::new(4);
    let mut log = String::from("center,left,right,steering,throttle,reverse,speed\n");
    for (i, steer) in [0.25, -0.1].iter().enumerate() {
        for cam in ["center", "left", "right"] {
            let (img, _) = synth_lane_frame(false, &mut p);
            write_image(&img, img_dir.join(format!("{cam}_{i}.ppm"))).unwrap();
        }
        log.push_str(&format!(
            "C:\\sim\\IMG\\center_{i}.ppm,/abs/IMG/left_{i}.ppm,right_{i}.ppm,{steer},0.5,0,20.1\n"
        ));
    }
    let csv = d.path().join("driving_log.csv");
    fs::write(&csv, log).unwrap();
    let out = d.path().join("pre");
    let o = run(&["preprocess", "--task", "clone", "--log", s(&csv), "--images", s(&img_dir), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let entries: Vec<(&str, f64)> = manifest
        .lines()
        .map(|l| {
            let (f, v) = l.split_once(' ').unwrap();
            (f, v.parse().unwrap())
        })
        .collect();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0].1, 0.25);
    assert_eq!(entries[1].1, -0.1);
    let t = decode_tensor(&fs::read(out.join(entries[0].0)).unwrap()).unwrap();
    assert_eq!(t.shape(), [3, 66, 200]);

    // A missing frame is a partial failure; the other row is still written.
    fs::remove_file(img_dir.join("center_1.ppm")).unwrap();
    let out2 = d.path().join("pre2");
    let o = run(&["preprocess", "--task", "clone", "--log", s(&csv), "--images", s(&img_dir), "--out", s(&out2)]);
    assert_eq!(code(&o), 2);
    assert_eq!(fs::read_to_string(out2.join("manifest.txt")).unwrap().lines().count(), 1);
}

#[test]
fn clone_training_from_a_driving_log() {
    let d = tempfile::tempdir().unwrap();
    let img_dir = d.path().join("IMG");
    fs::create_dir(&img_dir).unwrap();
    let mut p = Prng::new(6);
    let mut log = String::new();
    for i in 0..3 {
        for cam in ["c", "l", "r"] {
            let (img, _) = synth_lane_frame(i == 1, &mut p);
            write_image(&img, img_dir.join(format!("{cam}{i}.ppm"))).unwrap();
        }
        log.push_str(&format!("IMG/c{i}.ppm,IMG/l{i}.ppm,IMG/r{i}.ppm,{},0.3,0,15\n", 0.1 * i as f64));
    }
    fs::write(d.path().join("driving_log.csv"), log).unwrap();
    let ckpt = d.path().join("clone.nnw");
    let o = run(&[
        "train", "--task", "clone", "--data", s(d.path()), "--out", s(&ckpt), "--epochs", "1", "--batch-size", "4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = d.path().join("r.txt");
    let o = run(&[
        "eval", "--task", "clone", "--data", s(d.path()), "--ckpt", s(&ckpt), "--report", s(&report), "--split", "all",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&report).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, REPORT_COLUMNS);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(row[0], "clone");
    assert!(row[6].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn synth_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert_eq!(code(&run(&["synth", "--task", "signs", "--n", "10", "--seed", "7", "--out", s(&a)])), 0);
    let o = bin()
        .args(["synth", "--task", "signs", "--n", "10", "--out", s(&b)])
        .env("DRIVEPERC_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 10);
    assert_eq!(ta, tb);
    assert_eq!(code(&run(&["synth", "--task", "unicorns", "--n", "1", "--out", s(&a)])), 1);
}
