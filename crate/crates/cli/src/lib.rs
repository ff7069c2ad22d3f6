//! The `wunet` command line: scene generation, augmentation, dataset
//! building, training, denoising, evaluation and reports.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use wunet_core::datasets::{
    build_validation_sets, cropify_dataset, extend_dataset, generate_corpus, validation_set_names, ClassTable,
    CorpusSpec, Split, MANIFEST_NAME,
};
use wunet_core::detect::{
    emit_report, evaluate_set, read_detections, DetectionSource, DetectorRegistry, SetReport,
};
use wunet_core::imaging::{read_ppm, write_ppm};
use wunet_core::rng::derive;
use wunet_core::weathergen::{apply_weather, Condition, WeatherSpec};
use wunet_core::wunet::{build_model, load_checkpoint, load_samples, train, TrainConfig, WUNetConfig};
use wunet_core::{CropGrid, Error};

/// Exit code for data and I/O failures.
pub const EXIT_DATA: i32 = 1;
/// Exit code for configuration and usage errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(name = "wunet", version, about = "Weather removal and detection evaluation pipeline")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for dataset and evaluation maps (training is single-threaded).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory that receives every artifact of the run.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Synthetic road scenes with KITTI-format labels and a clear manifest.
    SceneGen(SceneGenArgs),
    /// Applies one weather condition to every PPM in a directory.
    Augment(AugmentArgs),
    /// Builds weather, validation or crop datasets from a manifest.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Trains a WUNet and writes checkpoints plus a loss log.
    Train(TrainArgs),
    /// Runs a checkpoint over every PPM in a directory.
    Denoise(DenoiseArgs),
    /// Scores validation sets with and without denoising.
    Eval(EvalArgs),
    /// Concatenates the reports of several eval runs.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SceneGenArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    #[arg(long, default_value_t = 3)]
    pub max_objects: usize,
    #[arg(long, default_value = "train")]
    pub split: String,
    #[arg(long, default_value = "scene")]
    pub prefix: String,
}

#[derive(Debug, Args, Serialize)]
pub struct AugmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub condition: String,
    #[arg(long)]
    pub intensity: f64,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum DatasetCommand {
    /// Clear manifest to clear + fog + rain + snow.
    Extend {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Clear test manifest to the ten validation sets.
    Valsets {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Splits every record into a grid of crops.
    Cropify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        rows: usize,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// JSON file with optional `model` and `train` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to `<out-dir>/denoised`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Directory holding one sub-directory per validation set.
    #[arg(long)]
    pub sets: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSONL detections to score instead of running a detector.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long, default_value = "blob")]
    pub detector: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Directory whose sub-directories are eval runs.
    #[arg(long)]
    pub runs: PathBuf,
}

/// Contents of the `train --config` file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub model: WUNetConfig,
    pub train: TrainConfig,
}

/// Parses `argv`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return if err.is_config() { EXIT_CONFIG } else { EXIT_DATA };
        }
        if cause.downcast_ref::<UsageError>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_CONFIG;
        }
    }
    EXIT_DATA
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Runs an already-parsed command line.
pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let config = serde_json::to_string_pretty(cli)?;
    let config_path = cli.out_dir.join("config.json");
    std::fs::write(&config_path, config + "\n").with_context(|| format!("writing {}", config_path.display()))?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::SceneGen(a) => scene_gen(a, out, cli.seed),
        Command::Augment(a) => augment(a, out, cli.seed),
        Command::Dataset(d) => dataset(d, out, cli.seed),
        Command::Train(a) => train_cmd(a, out, cli.seed),
        Command::Denoise(a) => denoise(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn scene_gen(a: &SceneGenArgs, out: &Path, seed: u64) -> anyhow::Result<()> {
    let split: Split = a.split.parse()?;
    let spec = CorpusSpec {
        count: a.count,
        width: a.width,
        height: a.height,
        max_objects: a.max_objects,
        seed,
        id_prefix: a.prefix.clone(),
        split,
    };
    let m = generate_corpus(&spec, out)?;
    log::info!("wrote {} scenes to {}", m.records.len(), out.display());
    Ok(())
}

/// Sorted `*.ppm` files of a directory.
fn ppm_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "ppm") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn file_name(p: &Path) -> &str {
    p.file_name().and_then(|s| s.to_str()).unwrap_or("image.ppm")
}

fn augment(a: &AugmentArgs, out: &Path, seed: u64) -> anyhow::Result<()> {
    let condition: Condition = a.condition.parse()?;
    WeatherSpec::new(condition, a.intensity, seed)?;
    for src in ppm_files(&a.input)? {
        let img = read_ppm(&src)?;
        let spec = WeatherSpec::new(condition, a.intensity, derive(seed, file_name(&src)))?;
        write_ppm(&apply_weather(&img, &spec)?, out.join(file_name(&src)))?;
    }
    Ok(())
}

fn dataset(d: &DatasetCommand, out: &Path, seed: u64) -> anyhow::Result<()> {
    match d {
        DatasetCommand::Extend { manifest } => {
            let m = extend_dataset(manifest, out, seed)?;
            log::info!("{} records", m.records.len());
        }
        DatasetCommand::Valsets { manifest } => {
            for (name, path) in build_validation_sets(manifest, out, seed)? {
                log::info!("{name}: {}", path.display());
            }
        }
        DatasetCommand::Cropify { manifest, cols, rows } => {
            let first = wunet_core::datasets::read_manifest(manifest)?;
            let Some(r) = first.records.first() else {
                wunet_core::datasets::write_manifest(&out.join(MANIFEST_NAME), &[])?;
                return Ok(());
            };
            let img = read_ppm(first.image(r))?;
            let grid = CropGrid::for_image(img.width(), img.height(), *cols, *rows)?;
            let m = cropify_dataset(manifest, &grid, out)?;
            log::info!("{} crop records", m.records.len());
        }
    }
    Ok(())
}

fn read_train_file(path: &Path) -> anyhow::Result<TrainFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
}

fn train_cmd(a: &TrainArgs, out: &Path, seed: u64) -> anyhow::Result<()> {
    let file = match &a.config {
        Some(p) => read_train_file(p)?,
        None => TrainFile::default(),
    };
    let mut tcfg = file.train;
    tcfg.seed = seed;
    tcfg.checkpoint_dir = Some(out.to_path_buf());
    tcfg.validate()?;
    let mut model = build_model(&file.model, derive(seed, "init"))?;
    let train_set = load_samples(&a.train)?;
    let test_set = load_samples(&a.test)?;
    let outcome = train(&mut model, &train_set, &test_set, &tcfg)?;
    log::info!(
        "best epoch {} with test MSE {:.6}",
        outcome.best_epoch,
        outcome.log[outcome.best_epoch - 1].test_mse
    );
    Ok(())
}

fn denoise(a: &DenoiseArgs, out: &Path) -> anyhow::Result<()> {
    let model = load_checkpoint(&a.model)?;
    let dest = a.output.clone().unwrap_or_else(|| out.join("denoised"));
    for src in ppm_files(&a.input)? {
        let img = read_ppm(&src)?;
        write_ppm(&model.forward_image(&img)?, dest.join(file_name(&src)))?;
    }
    Ok(())
}

/// Validation-set manifests present under `dir`, in canonical order.
fn set_manifests(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let found: Vec<PathBuf> = validation_set_names()
        .into_iter()
        .map(|s| dir.join(s).join(MANIFEST_NAME))
        .filter(|p| p.exists())
        .collect();
    if found.is_empty() {
        bail!(Error::Data(format!("no validation sets under {}", dir.display())));
    }
    Ok(found)
}

fn eval(a: &EvalArgs, out: &Path) -> anyhow::Result<()> {
    let table = ClassTable::default();
    let registry = DetectorRegistry::default();
    let detector = registry.get(&a.detector)?;
    let model = a.model.as_deref().map(load_checkpoint).transpose()?;
    let external = a.detections.as_deref().map(read_detections).transpose()?;
    let mut reports = Vec::new();
    for manifest in set_manifests(&a.sets)? {
        if let Some(dets) = &external {
            reports.push(evaluate_set(&manifest, None, DetectionSource::Precomputed(dets), &table, "external")?);
            continue;
        }
        reports.push(evaluate_set(&manifest, None, DetectionSource::Detector(detector.as_ref()), &table, "raw")?);
        if let Some(m) = &model {
            reports.push(evaluate_set(
                &manifest,
                Some(m),
                DetectionSource::Detector(detector.as_ref()),
                &table,
                "wunet",
            )?);
        }
    }
    write_reports(&reports, out)
}

fn write_reports(reports: &[SetReport], out: &Path) -> anyhow::Result<()> {
    emit_report(reports, &out.join("report.csv"))?;
    let json = serde_json::to_string_pretty(reports)?;
    let path = out.join("reports.json");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn report(a: &ReportArgs, out: &Path) -> anyhow::Result<()> {
    let entries = std::fs::read_dir(&a.runs).map_err(|e| Error::io(&a.runs, e))?;
    let mut runs: Vec<PathBuf> = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(&a.runs, e))?.path();
        if p.join("reports.json").is_file() {
            runs.push(p);
        }
    }
    runs.sort();
    if runs.is_empty() {
        bail!(Error::Data(format!("no eval runs under {}", a.runs.display())));
    }
    let mut combined = Vec::new();
    for run in runs {
        let path = run.join("reports.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let reports: Vec<SetReport> =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let name = file_name(&run).to_string();
        combined.extend(reports.into_iter().map(|r| SetReport {
            variant: format!("{name}:{}", r.variant),
            ..r
        }));
    }
    write_reports(&combined, out)
}
