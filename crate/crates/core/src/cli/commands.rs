use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use super::config::{Config, TrainConfig};
use super::tasks::{evaluate_task, load_task_data, select, split_indices, train_task, Split, Task};
use crate::datasets::{parse_driving_log, preprocess_driving, sample_stem, synth_generate, Camera, SynthTask};
use crate::error::{Error, Result};
use crate::imaging::{read_image, write_image, PixelFormat};
use crate::lane::{run_pipeline, PipelineConfig, PipelineOutput};
use crate::metrics::{write_report, ReportFormat};
use crate::models::{encode_tensor, load_checkpoint, save_checkpoint};
use crate::nn::{run_gradcheck, GradcheckConfig};
use crate::rng::Prng;

pub const SEED_ENV: &str = "DRIVEPERC_SEED";
pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Parser)]
#[command(name = "driveperc", version, about = "Lane detection and driving-perception CNN toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect lane lines in a frame or a directory of frames.
    LaneDetect(LaneDetectArgs),
    /// Train a factory model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a metrics report.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients for every layer and loss.
    Gradcheck(GradcheckArgs),
    /// Materialize preprocessed driving tensors and a manifest.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML file with [pipeline], [train], [augment] and [data] sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct LaneDetectArgs {
    /// Image file, or a directory of .ppm/.pgm/.pnm/.png frames.
    #[arg(long, required_unless_present = "dump_config")]
    pub input: Option<PathBuf>,
    /// Output directory for overlays, lane files and stage images.
    #[arg(long, required_unless_present = "dump_config")]
    pub output: Option<PathBuf>,
    /// Also write every intermediate stage image.
    #[arg(long)]
    pub stages: bool,
    /// Frames processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Dataset directory.
    #[arg(long, required_unless_present = "dump_config")]
    pub data: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long, required_unless_present = "dump_config")]
    pub out: Option<PathBuf>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Overrides [train] epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Overrides [train] batch_size.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Overrides [train] learning_rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Report path.
    #[arg(long)]
    pub report: PathBuf,
    /// text or csv.
    #[arg(long, default_value = "text")]
    pub format: ReportFormat,
    /// Which part of the seeded train/test split to evaluate.
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Model name in the report (defaults to the task name).
    #[arg(long)]
    pub name: Option<String>,
    /// Also write ROC points as CSV.
    #[arg(long)]
    pub roc: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// First seed; each case runs `--seeds` consecutive seeds.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Seeds per case.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Driving log CSV.
    #[arg(long, required_unless_present = "dump_config")]
    pub log: Option<PathBuf>,
    /// Directory holding the logged frames (matched by file name).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output directory for tensors and manifest.txt.
    #[arg(long, required_unless_present = "dump_config")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// signs, vehicles, segmentation or lanes.
    #[arg(long)]
    pub task: SynthTask,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some inputs failed; the rest were processed.
    Partial,
    /// The command ran but its check did not pass.
    Failed,
}

impl Outcome {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Outcome::Success => ExitCode::SUCCESS,
            Outcome::Failed => ExitCode::from(1),
            Outcome::Partial => ExitCode::from(2),
        }
    }
}

/// Parse arguments, run, and map the result onto exit codes 0 / 1 / 2.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            eprintln!("run `driveperc --help` for usage");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::LaneDetect(a) => lane_detect(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Synth(a) => {
            synth_generate(a.task, a.n, a.seed, &a.out)?;
            log::info!("wrote {} {:?} samples to {}", a.n, a.task, a.out.display());
            Ok(Outcome::Success)
        }
    }
}

fn dump(cfg: &Config) -> Result<Outcome> {
    let mut out = std::io::stdout().lock();
    out.write_all(cfg.to_toml().as_bytes()).map_err(|e| Error::io("writing config", e))?;
    Ok(Outcome::Success)
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

const FRAME_EXTENSIONS: [&str; 4] = ["ppm", "pgm", "pnm", "png"];

/// The input file itself, or the frames of a directory sorted by name.
pub fn list_frames(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if !input.is_dir() {
        return Err(Error::Config(format!("input {} does not exist", input.display())));
    }
    let rd = fs::read_dir(input).map_err(|e| Error::io(format!("listing {}", input.display()), e))?;
    let mut frames = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(format!("listing {}", input.display()), e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| FRAME_EXTENSIONS.contains(&e.as_str())) {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| "frame".into(), |s| s.to_string_lossy().into_owned())
}

fn detect_frame(path: &Path, config: &PipelineConfig, stages: bool) -> Result<PipelineOutput> {
    let wrap = |e: Error| Error::Sample {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let image = read_image(path).map_err(wrap)?;
    run_pipeline(&image, config, stages).map_err(wrap)
}

fn write_frame(out_dir: &Path, stem: &str, out: &PipelineOutput) -> Result<()> {
    write_image(&out.annotated, out_dir.join(format!("{stem}.overlay.ppm")))?;
    write_text(&out_dir.join(format!("{stem}.lanes.txt")), &out.lanes.to_text())?;
    if let Some(stages) = &out.stages {
        for (name, img) in stages.iter() {
            let ext = if img.format() == PixelFormat::Gray8 { "pgm" } else { "ppm" };
            write_image(img, out_dir.join(format!("{stem}.{name}.{ext}")))?;
        }
    }
    Ok(())
}

fn lane_detect(a: LaneDetectArgs) -> Result<Outcome> {
    let cfg = Config::load_or_default(a.cfg.config.as_deref())?;
    if a.cfg.dump_config {
        return dump(&cfg);
    }
    let (input, output) = (required(&a.input, "input")?, required(&a.output, "output")?);
    if a.jobs == 0 {
        return Err(Error::Config("--jobs must be ≥ 1".into()));
    }
    let frames = list_frames(input)?;
    if frames.is_empty() {
        return Err(Error::Config(format!("no frames found in {}", input.display())));
    }
    create_dir(output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<PipelineOutput>> =
        pool.install(|| frames.par_iter().map(|f| detect_frame(f, &cfg.pipeline, a.stages)).collect());

    let mut failed = 0;
    for (frame, result) in frames.iter().zip(results) {
        let stem = stem_of(frame);
        match result.and_then(|out| write_frame(output, &stem, &out)) {
            Ok(()) => log::info!("{}: done", frame.display()),
            Err(e) => {
                failed += 1;
                log::error!("{e}");
            }
        }
    }
    log::info!("{} of {} frames processed", frames.len() - failed, frames.len());
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

/// Config file overlaid with command-line flags; train defaults resolved
/// for `task`.
fn train_config(a: &TrainArgs) -> Result<Config> {
    let mut cfg = Config::load_or_default(a.cfg.config.as_deref())?;
    let flags = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        ..Default::default()
    };
    cfg.train = flags.or(cfg.train).or(TrainConfig::for_task(a.task));
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<Outcome> {
    let cfg = train_config(&a)?;
    if a.cfg.dump_config {
        return dump(&cfg);
    }
    let (data_dir, out) = (required(&a.data, "data")?, required(&a.out, "out")?);
    let data = load_task_data(a.task, data_dir, &cfg)?;
    let (tr, va, te) = split_indices(data.len(), &cfg)?;
    log::info!("{} samples: {} train, {} validation, {} test", data.len(), tr.len(), va.len(), te.len());
    if tr.is_empty() {
        return Err(Error::Dataset("the training split is empty".into()));
    }
    let train_set = data.gather(&tr)?;
    let val_set = if va.is_empty() { None } else { Some(data.gather(&va)?) };
    let mut hook = |epoch: usize, loss: f64, val: Option<f64>| {
        eprintln!("epoch {} loss {loss:.6}", epoch + 1);
        if let Some(v) = val {
            log::info!("epoch {} validation {v:.6}", epoch + 1);
        }
    };
    let model = train_task(a.task, &train_set, val_set.as_ref(), &cfg.train, &cfg, a.seed, &mut hook)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_checkpoint(&model, out)?;
    log::info!("checkpoint written to {}", out.display());
    Ok(Outcome::Success)
}

fn eval(a: EvalArgs) -> Result<Outcome> {
    let cfg = Config::load_or_default(a.cfg.config.as_deref())?;
    if a.cfg.dump_config {
        return dump(&cfg);
    }
    let model = load_checkpoint(&a.ckpt)?;
    let data = load_task_data(a.task, &a.data, &cfg)?;
    let subset = select(&data, a.split, &cfg)?;
    let name = a.name.as_deref().unwrap_or(a.task.name());
    let (row, curve) = evaluate_task(a.task, &model, &subset, name)?;
    write_report(&[row], &a.report, a.format)?;
    if let Some(path) = &a.roc {
        let curve = curve.ok_or_else(|| Error::Config(format!("no ROC curve for the {} task", a.task.name())))?;
        write_text(path, &curve.to_csv())?;
    }
    log::info!("report written to {}", a.report.display());
    Ok(Outcome::Success)
}

fn gradcheck(a: GradcheckArgs) -> Result<Outcome> {
    let config = GradcheckConfig {
        seeds: a.seeds,
        base_seed: a.seed,
        ..Default::default()
    };
    let report = run_gradcheck(&config)?;
    print!("{}", report.to_text());
    Ok(if report.passed() { Outcome::Success } else { Outcome::Failed })
}

fn preprocess(a: PreprocessArgs) -> Result<Outcome> {
    let cfg = Config::load_or_default(a.cfg.config.as_deref())?;
    if a.cfg.dump_config {
        return dump(&cfg);
    }
    if a.task != Task::Clone {
        return Err(Error::Config("preprocess supports --task clone only".into()));
    }
    let (log_path, out) = (required(&a.log, "log")?, required(&a.out, "out")?);
    let records = parse_driving_log(log_path)?;
    create_dir(out)?;
    let mut manifest = String::new();
    let mut failed = 0;
    let mut unused = Prng::new(0);
    for (i, r) in records.iter().enumerate() {
        match preprocess_driving(r, Camera::Center, &mut unused, false, &cfg.augment, a.images.as_deref()) {
            Ok((x, steering)) => {
                let file = format!("{}.nnt", sample_stem(i));
                fs::write(out.join(&file), encode_tensor(&x))
                    .map_err(|e| Error::io(format!("writing {}", out.join(&file).display()), e))?;
                manifest.push_str(&format!("{file} {steering}\n"));
            }
            Err(e) => {
                failed += 1;
                log::error!("row {}: {e}", i + 1);
            }
        }
    }
    write_text(&out.join(MANIFEST), &manifest)?;
    log::info!("{} of {} rows preprocessed", records.len() - failed, records.len());
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "[train]\nepochs = 7\nbatch_size = 16\n").unwrap();
        let cli = Cli::try_parse_from([
            "driveperc", "train", "--task", "signs", "--dump-config", "--epochs", "3", "--config",
            p.to_str().unwrap(),
        ])
        .unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        let cfg = train_config(&a).unwrap();
        assert_eq!(cfg.train.epochs, Some(3));
        assert_eq!(cfg.train.batch_size, Some(16));
        assert_eq!(cfg.train.learning_rate, Some(0.001));
    }

    #[test]
    fn frame_listing_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.ppm", "a.PNG", "c.txt", "d.pgm"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        let names: Vec<String> = list_frames(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["a.PNG", "b.ppm", "d.pgm"]);
        assert!(list_frames(&dir.path().join("missing")).is_err());
    }
}
