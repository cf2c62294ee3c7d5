//! Command-line front end. Each subcommand reads and writes the file formats in
//! [`crate::io`] so every pipeline stage can be run and inspected on its own.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::adaptation::{
    generate_pseudo_labels, pseudo_label_entries, run_loop, sequence_files, CommandTrainer,
    LoopConfig, Metric, Schedule, TrackingValidator,
};
use crate::config::{load_config, PipelineConfig};
use crate::detection::{Detection, SourceTier};
use crate::evaluation::{evaluate, format_csv, format_table, parse_csv, EvalReport, ReportRow};
use crate::fusion::{fuse_multiscale, TierSet};
use crate::gsi::apply_gsi;
use crate::io::{
    parse_detections, parse_ground_truth, parse_results, write_detections, write_ground_truth,
    write_results,
};
use crate::result::SequenceResult;
use crate::sim::{generate_scenario, ScenarioConfig};
use crate::tracker::{run_sequence_with, StageTwoPool};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "bytefuse", version, about = "Multi-object tracking pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse six multi-scale detection files into one.
    Fuse(FuseArgs),
    /// Track detections into a result file.
    Track(TrackArgs),
    /// Fill gaps and smooth tracks of a result file.
    Gsi(GsiArgs),
    /// Score results against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scenario.
    Simulate(SimulateArgs),
    /// Threshold detections into pseudo-labels.
    PseudoLabel(PseudoLabelArgs),
    /// Run the pseudo-label self-training loop.
    Adapt(AdaptArgs),
    /// Aggregate eval reports into one table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Directory holding `<seq>.<low|medium|high>.<orig|flip>.txt`.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub seq: String,
    #[arg(long)]
    pub image_width: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Detection file, or a directory of `<seq>.txt` files.
    #[arg(long)]
    pub dets: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Result file, or a directory when `--dets` is a directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Exclude lost tracks from the low-score association stage.
    #[arg(long)]
    pub no_lost_in_stage2: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GsiArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_gap: Option<u32>,
    #[arg(long)]
    pub length_scale: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth file, or a directory of `<seq>.txt` files.
    #[arg(long)]
    pub gt: PathBuf,
    /// Result file, or a directory matching `--gt`.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Method name shown in the report row.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_gt: PathBuf,
    #[arg(long)]
    pub out_dets: PathBuf,
}

#[derive(Debug, Args)]
pub struct PseudoLabelArgs {
    #[arg(long)]
    pub dets: PathBuf,
    /// Confidence threshold; defaults to the schedule value for `--iteration`.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub iteration: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Directory of initial detections, one `<seq>.txt` per sequence.
    #[arg(long)]
    pub initial_dets: PathBuf,
    /// Directory of validation ground truth, one `<seq>.txt` per sequence.
    #[arg(long)]
    pub gt_dir: PathBuf,
    #[arg(long)]
    pub work_dir: PathBuf,
    /// Trainer command line; `--labels`, `--epochs` and `--out` are appended.
    #[arg(long)]
    pub trainer: String,
    #[arg(long, default_value_t = 10)]
    pub max_iterations: u32,
    #[arg(long, default_value = "mota")]
    pub metric: String,
    #[arg(long, default_value_t = 0.0)]
    pub min_delta: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `name=path` of an eval CSV report; repeatable, rows keep this order.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Written next to each run's primary output as `<output>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub version: String,
}

fn init_logging() {
    let _ = tracing_subscriber::fmt()
        .json()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .try_init();
}

/// Parses `argv` (including the program name), runs the command and returns the exit status.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                1
            } else {
                code
            };
        }
    };
    init_logging();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            tracing::error!(error = %e, "command failed");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(io_at(path))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_at(path))?))
}

fn pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(load_config(open(p)?)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn read_dets(path: &Path) -> Result<BTreeMap<u32, Vec<Detection>>> {
    Ok(parse_detections(open(path)?)?)
}

fn seq_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sequence")
        .to_string()
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn write_manifest(
    subcommand: &str,
    config: impl Serialize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        subcommand: subcommand.to_string(),
        config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
        inputs,
        outputs: outputs.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match outputs.first() {
        Some(primary) => {
            let mut name = primary.as_os_str().to_owned();
            name.push(".manifest.json");
            let path = PathBuf::from(name);
            let mut w = create(&path)?;
            writeln!(w, "{json}").map_err(io_at(&path))?;
            w.flush().map_err(io_at(&path))
        }
        None => {
            tracing::info!(manifest = %json, "run manifest");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    let started = Instant::now();
    match command {
        Command::Fuse(a) => fuse(a, started),
        Command::Track(a) => track(a, started),
        Command::Gsi(a) => gsi(a, started),
        Command::Eval(a) => eval(a, started),
        Command::Simulate(a) => simulate(a, started),
        Command::PseudoLabel(a) => pseudo_label(a, started),
        Command::Adapt(a) => adapt(a, started),
        Command::Report(a) => report(a, started),
    }
}

/// Path of one fusion input: `<dir>/<seq>.<tier>.<orig|flip>.txt`.
pub fn tier_file(dir: &Path, seq: &str, tier: SourceTier, flipped: bool) -> PathBuf {
    let kind = if flipped { "flip" } else { "orig" };
    dir.join(format!("{seq}.{tier}.{kind}.txt"))
}

fn fuse(a: FuseArgs, started: Instant) -> Result<()> {
    let cfg = pipeline_config(a.config.as_deref())?;
    let mut sets = Vec::with_capacity(6);
    let mut inputs = Vec::with_capacity(6);
    for tier in SourceTier::TAGGED {
        for flipped in [false, true] {
            let path = tier_file(&a.dir, &a.seq, tier, flipped);
            let dets = read_dets(&path)?;
            sets.push(TierSet::new(tier, flipped, dets, a.image_width));
            inputs.push(path);
        }
    }
    let fused = fuse_multiscale(sets, &cfg)?;
    let mut w = create(&a.out)?;
    write_detections(&fused, &mut w).map_err(io_at(&a.out))?;
    tracing::info!(
        frames = fused.len(),
        detections = fused.values().map(Vec::len).sum::<usize>(),
        "fused"
    );
    write_manifest("fuse", &cfg, inputs, vec![a.out], started)
}

fn track_one(dets: &Path, out: &Path, cfg: &PipelineConfig, pool: StageTwoPool) -> Result<()> {
    let name = seq_name(dets);
    let result = run_sequence_with(&read_dets(dets)?, cfg, pool, &name)?;
    let mut w = create(out)?;
    write_results(&result, &mut w).map_err(io_at(out))?;
    tracing::info!(sequence = %name, tracks = result.track_ids().len(), boxes = result.box_count(), "tracked");
    Ok(())
}

fn track(a: TrackArgs, started: Instant) -> Result<()> {
    let cfg = pipeline_config(a.config.as_deref())?;
    let pool = if a.no_lost_in_stage2 {
        StageTwoPool::TrackedOnly
    } else {
        StageTwoPool::TrackedAndLost
    };
    let (inputs, outputs) = if a.dets.is_dir() {
        let seqs = sequence_files(&a.dets)?;
        fs::create_dir_all(&a.out).map_err(io_at(&a.out))?;
        let outputs: Vec<PathBuf> = seqs
            .iter()
            .map(|(name, _)| a.out.join(format!("{name}.txt")))
            .collect();
        thread_pool(a.jobs)?.install(|| {
            seqs.par_iter()
                .zip(&outputs)
                .map(|((_, input), out)| track_one(input, out, &cfg, pool))
                .collect::<Result<Vec<()>>>()
        })?;
        (seqs.into_iter().map(|(_, p)| p).collect(), outputs)
    } else {
        track_one(&a.dets, &a.out, &cfg, pool)?;
        (vec![a.dets.clone()], vec![a.out.clone()])
    };
    #[derive(Serialize)]
    struct TrackRun<'a> {
        pipeline: &'a PipelineConfig,
        lost_in_stage2: bool,
        jobs: usize,
    }
    let run = TrackRun {
        pipeline: &cfg,
        lost_in_stage2: !a.no_lost_in_stage2,
        jobs: a.jobs,
    };
    let manifest_outputs = if a.dets.is_dir() {
        let mut v = vec![a.out.join("track")];
        v.extend(outputs);
        v
    } else {
        outputs
    };
    write_manifest("track", run, inputs, manifest_outputs, started)
}

fn gsi(a: GsiArgs, started: Instant) -> Result<()> {
    let mut cfg = pipeline_config(a.config.as_deref())?;
    if let Some(g) = a.max_gap {
        cfg.gsi_max_gap = g;
    }
    if let Some(t) = a.length_scale {
        cfg.gsi_length_scale = t;
    }
    cfg.validate()?;
    let result = parse_results(open(&a.input)?, &seq_name(&a.input))?;
    let smoothed = apply_gsi(&result, &cfg)?;
    let mut w = create(&a.out)?;
    write_results(&smoothed, &mut w).map_err(io_at(&a.out))?;
    tracing::info!(
        before = result.box_count(),
        after = smoothed.box_count(),
        "gap filling done"
    );
    write_manifest("gsi", &cfg, vec![a.input], vec![a.out], started)
}

fn eval_one(gt: &Path, result: &Path, name: &str) -> Result<EvalReport> {
    let gt = parse_ground_truth(open(gt)?)?;
    let result = parse_results(open(result)?, name)?;
    Ok(evaluate(&gt.evaluation_frames(), &result)?)
}

fn eval(a: EvalArgs, started: Instant) -> Result<()> {
    let (rows, inputs) = if a.gt.is_dir() {
        let seqs = sequence_files(&a.gt)?;
        let reports = thread_pool(a.jobs)?.install(|| {
            seqs.par_iter()
                .map(|(name, gt)| eval_one(gt, &a.result.join(format!("{name}.txt")), name))
                .collect::<Result<Vec<_>>>()
        })?;
        let combined_name = a.name.clone().unwrap_or_else(|| "combined".to_string());
        let combined = EvalReport::combine(&combined_name, &reports)?;
        let mut rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
        rows.push(ReportRow::from(&combined));
        (rows, vec![a.gt.clone(), a.result.clone()])
    } else {
        let name = a.name.clone().unwrap_or_else(|| seq_name(&a.result));
        let report = eval_one(&a.gt, &a.result, &name)?;
        debug_assert!((report.mota - report.mota_from_counts()).abs() < 1e-12);
        (
            vec![ReportRow::from(&report)],
            vec![a.gt.clone(), a.result.clone()],
        )
    };
    let text = match a.report {
        ReportFormat::Csv => format_csv(&rows),
        ReportFormat::Text => format_table(&rows),
    };
    emit(&text, a.out.as_deref())?;
    write_manifest(
        "eval",
        serde_json::json!({ "match_iou": crate::evaluation::MATCH_IOU }),
        inputs,
        a.out.into_iter().collect(),
        started,
    )
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(text.as_bytes()).map_err(io_at(path))?;
            w.flush().map_err(io_at(path))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|()| lock.flush())
                .map_err(io_at(Path::new("<stdout>")))
        }
    }
}

fn simulate(a: SimulateArgs, started: Instant) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(io_at(&a.config))?;
    let cfg = ScenarioConfig::from_kv_text(&text)?;
    let scenario = generate_scenario(&cfg)?;
    let mut w = create(&a.out_gt)?;
    write_ground_truth(&scenario.gt, &mut w).map_err(io_at(&a.out_gt))?;
    let mut w = create(&a.out_dets)?;
    write_detections(&scenario.dets, &mut w).map_err(io_at(&a.out_dets))?;
    tracing::info!(
        frames = scenario.gt.len(),
        dropped = scenario.dropped,
        "scenario generated"
    );
    write_manifest("simulate", &cfg, vec![a.config], vec![a.out_gt, a.out_dets], started)
}

fn pseudo_label(a: PseudoLabelArgs, started: Instant) -> Result<()> {
    let threshold = a
        .threshold
        .unwrap_or_else(|| Schedule::default().threshold(a.iteration));
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Usage(format!("threshold {threshold} outside [0, 1]")));
    }
    let labels = generate_pseudo_labels(&read_dets(&a.dets)?, threshold);
    let mut w = create(&a.out)?;
    write_ground_truth(&pseudo_label_entries(&labels), &mut w).map_err(io_at(&a.out))?;
    tracing::info!(
        threshold,
        labels = labels.values().map(Vec::len).sum::<usize>(),
        "pseudo-labels written"
    );
    write_manifest(
        "pseudo-label",
        serde_json::json!({ "threshold": threshold, "iteration": a.iteration }),
        vec![a.dets],
        vec![a.out],
        started,
    )
}

fn adapt(a: AdaptArgs, started: Instant) -> Result<()> {
    let pipeline = pipeline_config(a.config.as_deref())?;
    let metric: Metric = a.metric.parse().map_err(Error::Usage)?;
    let mut loop_cfg = LoopConfig::new(&a.initial_dets, &a.work_dir);
    loop_cfg.max_iterations = a.max_iterations;
    loop_cfg.min_delta = a.min_delta;
    let mut trainer = CommandTrainer::parse(&a.trainer)?;
    let mut validator = TrackingValidator {
        gt_dir: a.gt_dir.clone(),
        pipeline: pipeline.clone(),
        metric,
    };
    let outcome = run_loop(&loop_cfg, &mut trainer, &mut validator)?;
    let manifest = loop_cfg.manifest_path();
    write_manifest(
        "adapt",
        serde_json::json!({
            "pipeline": pipeline,
            "schedule": loop_cfg.schedule,
            "metric": metric,
            "min_delta": a.min_delta,
            "max_iterations": a.max_iterations,
            "trainer": a.trainer,
            "baseline_score": outcome.baseline_score,
            "best_dets_dir": outcome.best_dets_dir,
        }),
        vec![a.initial_dets, a.gt_dir],
        vec![manifest],
        started,
    )?;
    match outcome.failure {
        Some(reason) => Err(Error::Adapt(crate::adaptation::AdaptError::TrainerFailed(reason))),
        None => Ok(()),
    }
}

fn report(a: ReportArgs, started: Instant) -> Result<()> {
    let mut rows = Vec::with_capacity(a.runs.len());
    let mut inputs = Vec::with_capacity(a.runs.len());
    for spec in &a.runs {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--run expects name=path, got {spec:?}")))?;
        let path = PathBuf::from(path);
        let text = fs::read_to_string(&path).map_err(io_at(&path))?;
        let parsed = parse_csv(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        // Directory-mode eval reports end with the pooled row.
        let mut row = parsed
            .last()
            .cloned()
            .ok_or_else(|| Error::Usage(format!("{}: no report rows", path.display())))?;
        row.method = name.to_string();
        rows.push(row);
        inputs.push(path);
    }
    let text = match a.format {
        ReportFormat::Csv => format_csv(&rows),
        ReportFormat::Text => format_table(&rows),
    };
    emit(&text, a.out.as_deref())?;
    write_manifest(
        "report",
        serde_json::json!({ "runs": a.runs }),
        inputs,
        a.out.into_iter().collect(),
        started,
    )
}

/// Result of a single sequence, for callers that build pipelines in code.
pub fn track_file(dets: &Path, cfg: &PipelineConfig, pool: StageTwoPool) -> Result<SequenceResult> {
    Ok(run_sequence_with(&read_dets(dets)?, cfg, pool, &seq_name(dets))?)
}
