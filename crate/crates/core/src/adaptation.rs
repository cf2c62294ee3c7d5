//! Self-training loop: pseudo-label the target-domain detections, hand the
//! labels to an external trainer, validate the detections it produces, and
//! repeat until the validation score stops improving.
//!
//! The first round keeps detections scoring at least 0.5 and trains for 40
//! epochs; later rounds keep detections scoring at least 0.1 and train for 20.
//! Training itself happens outside this crate, behind [`Trainer`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::detection::Detection;
use crate::evaluation::{evaluate, EvalError, EvalReport};
use crate::io::{parse_detections, parse_ground_truth, write_ground_truth, GtEntry, ParseError};
use crate::tracker::{run_sequence_with, StageTwoPool, TrackError};

pub const ITERATION_ENV: &str = "ADAPT_ITERATION";
pub const THRESHOLD_ENV: &str = "ADAPT_THRESHOLD";
pub const EPOCHS_ENV: &str = "ADAPT_EPOCHS";
pub const MANIFEST_HEADER: &str = "iter,threshold,epochs,label_count,score,verdict";

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("failed to launch trainer {program:?}: {source}")]
    TrainerSpawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trainer exited with {0}")]
    TrainerFailed(String),
    #[error("trainer produced no detections at {0}")]
    MissingDetections(PathBuf),
    #[error("no validation sequences found in {0}")]
    NoSequences(PathBuf),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid loop configuration: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AdaptError + '_ {
    move |source| AdaptError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Per-iteration confidence thresholds and epoch counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub initial_threshold: f64,
    pub later_threshold: f64,
    pub initial_epochs: u32,
    pub later_epochs: u32,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            initial_threshold: 0.5,
            later_threshold: 0.1,
            initial_epochs: 40,
            later_epochs: 20,
        }
    }
}

impl Schedule {
    pub fn threshold(&self, iteration: u32) -> f64 {
        if iteration == 0 {
            self.initial_threshold
        } else {
            self.later_threshold
        }
    }

    pub fn epochs(&self, iteration: u32) -> u32 {
        if iteration == 0 {
            self.initial_epochs
        } else {
            self.later_epochs
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Continue,
    Stop,
    Failed,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Continue => "continue",
            Verdict::Stop => "stop",
            Verdict::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub threshold: f64,
    pub epochs: u32,
    pub pseudo_label_count: usize,
    /// NaN when the iteration failed before validation.
    pub validation_score: f64,
    pub verdict: Verdict,
}

impl IterationRecord {
    pub fn manifest_line(&self) -> String {
        format!(
            "{},{:.2},{},{},{:.4},{}",
            self.iteration,
            self.threshold,
            self.epochs,
            self.pseudo_label_count,
            self.validation_score,
            self.verdict
        )
    }
}

/// Keeps exactly the detections scoring at least `threshold`. Every input frame
/// is present in the output, possibly empty.
pub fn generate_pseudo_labels(
    dets: &BTreeMap<u32, Vec<Detection>>,
    threshold: f64,
) -> BTreeMap<u32, Vec<Detection>> {
    dets.iter()
        .map(|(&f, list)| {
            (
                f,
                list.iter().filter(|d| d.score >= threshold).cloned().collect(),
            )
        })
        .collect()
}

/// Ground-truth-style entries with ids `1..=n` restarting in every frame.
pub fn pseudo_label_entries(labels: &BTreeMap<u32, Vec<Detection>>) -> BTreeMap<u32, Vec<GtEntry>> {
    labels
        .iter()
        .map(|(&frame, list)| {
            let entries = list
                .iter()
                .enumerate()
                .map(|(i, d)| GtEntry {
                    frame,
                    track_id: i as u32 + 1,
                    bbox: d.bbox,
                    active: true,
                    visibility: 1.0,
                })
                .collect();
            (frame, entries)
        })
        .collect()
}

/// Continue iff `new_score` beats every earlier score by more than `min_delta`.
pub fn decide_stop(previous_scores: &[f64], new_score: f64, min_delta: f64) -> Verdict {
    let best = previous_scores
        .iter()
        .copied()
        .filter(|s| !s.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if new_score > best + min_delta {
        Verdict::Continue
    } else {
        Verdict::Stop
    }
}

/// What the trainer is asked to do in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRequest {
    pub iteration: u32,
    pub threshold: f64,
    pub epochs: u32,
    pub labels_dir: PathBuf,
    pub out_dir: PathBuf,
}

pub trait Trainer {
    /// Fine-tunes on `labels_dir` and writes one detection file per validation
    /// sequence into `out_dir`.
    fn train(&mut self, request: &TrainRequest) -> Result<(), AdaptError>;
}

/// Runs `<program> [args..] --labels <dir> --epochs <N> --out <dir>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandTrainer {
    pub program: String,
    pub args: Vec<String>,
}

impl CommandTrainer {
    /// Splits a command line on whitespace.
    pub fn parse(command: &str) -> Result<Self, AdaptError> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| AdaptError::Invalid("empty trainer command".into()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }
}

impl Trainer for CommandTrainer {
    fn train(&mut self, req: &TrainRequest) -> Result<(), AdaptError> {
        tracing::info!(
            iteration = req.iteration,
            epochs = req.epochs,
            program = %self.program,
            "invoking trainer"
        );
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg("--labels")
            .arg(&req.labels_dir)
            .arg("--epochs")
            .arg(req.epochs.to_string())
            .arg("--out")
            .arg(&req.out_dir)
            .env(ITERATION_ENV, req.iteration.to_string())
            .env(THRESHOLD_ENV, format!("{}", req.threshold))
            .env(EPOCHS_ENV, req.epochs.to_string())
            .status()
            .map_err(|source| AdaptError::TrainerSpawn {
                program: self.program.clone(),
                source,
            })?;
        if status.success() {
            Ok(())
        } else {
            Err(AdaptError::TrainerFailed(status.to_string()))
        }
    }
}

pub trait Validator {
    /// Scores the detection files in `dets_dir`; higher is better.
    fn score(&mut self, dets_dir: &Path) -> Result<f64, AdaptError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// MOTA in percent.
    #[default]
    Mota,
    /// Fraction of ground-truth boxes matched, in percent.
    Recall,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mota" => Ok(Metric::Mota),
            "recall" => Ok(Metric::Recall),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Tracks every validation sequence and scores it against its labels.
/// Sequence `<name>` pairs `<gt_dir>/<name>.txt` with `<dets_dir>/<name>.txt`.
#[derive(Debug, Clone)]
pub struct TrackingValidator {
    pub gt_dir: PathBuf,
    pub pipeline: PipelineConfig,
    pub metric: Metric,
}

/// `*.txt` files of a directory as `(sequence name, path)`, sorted by name.
pub fn sequence_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, AdaptError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn read_detections(path: &Path) -> Result<BTreeMap<u32, Vec<Detection>>, AdaptError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    parse_detections(file).map_err(|source| AdaptError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

impl TrackingValidator {
    pub fn reports(&self, dets_dir: &Path) -> Result<Vec<EvalReport>, AdaptError> {
        let sequences = sequence_files(&self.gt_dir)?;
        if sequences.is_empty() {
            return Err(AdaptError::NoSequences(self.gt_dir.clone()));
        }
        let mut reports = Vec::with_capacity(sequences.len());
        for (name, gt_path) in sequences {
            let gt_file = fs::File::open(&gt_path).map_err(io_err(&gt_path))?;
            let gt = parse_ground_truth(gt_file).map_err(|source| AdaptError::Parse {
                path: gt_path.clone(),
                source,
            })?;
            let det_path = dets_dir.join(format!("{name}.txt"));
            if !det_path.is_file() {
                return Err(AdaptError::MissingDetections(det_path));
            }
            let dets = read_detections(&det_path)?;
            let result = run_sequence_with(&dets, &self.pipeline, StageTwoPool::default(), &name)?;
            reports.push(evaluate(&gt.evaluation_frames(), &result)?);
        }
        Ok(reports)
    }
}

impl Validator for TrackingValidator {
    fn score(&mut self, dets_dir: &Path) -> Result<f64, AdaptError> {
        let combined = EvalReport::combine("validation", &self.reports(dets_dir)?)?;
        Ok(match self.metric {
            Metric::Mota => combined.mota_percent(),
            Metric::Recall => 100.0 * combined.matches as f64 / combined.gt_count as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    /// Detections of the source-trained detector, one `<seq>.txt` per sequence.
    pub initial_dets_dir: PathBuf,
    /// Per-iteration labels and trainer outputs go under `work_dir/iter_<i>/`.
    pub work_dir: PathBuf,
    pub schedule: Schedule,
    pub min_delta: f64,
    pub max_iterations: u32,
}

impl LoopConfig {
    pub fn new(initial_dets_dir: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            initial_dets_dir: initial_dets_dir.into(),
            work_dir: work_dir.into(),
            schedule: Schedule::default(),
            min_delta: 0.0,
            max_iterations: 10,
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.work_dir.join("manifest.csv")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub baseline_score: f64,
    pub records: Vec<IterationRecord>,
    /// Set when an iteration failed and the loop aborted.
    pub failure: Option<String>,
    /// Detections directory of the best-scoring round (the initial one if none improved).
    pub best_dets_dir: PathBuf,
}

impl LoopOutcome {
    pub fn trainer_invocations(&self) -> usize {
        self.records.len()
    }
}

fn write_manifest(path: &Path, baseline: f64, records: &[IterationRecord]) -> Result<(), AdaptError> {
    let mut text = format!("# baseline_score={baseline:.4}\n{MANIFEST_HEADER}\n");
    for r in records {
        text.push_str(&r.manifest_line());
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Writes pseudo-labels for every sequence in `dets_dir` into `labels_dir`; returns the label count.
fn write_pseudo_labels(dets_dir: &Path, labels_dir: &Path, threshold: f64) -> Result<usize, AdaptError> {
    fs::create_dir_all(labels_dir).map_err(io_err(labels_dir))?;
    let mut count = 0;
    for (name, path) in sequence_files(dets_dir)? {
        let labels = generate_pseudo_labels(&read_detections(&path)?, threshold);
        count += labels.values().map(Vec::len).sum::<usize>();
        let out = labels_dir.join(format!("{name}.txt"));
        let file = fs::File::create(&out).map_err(io_err(&out))?;
        write_ground_truth(&pseudo_label_entries(&labels), std::io::BufWriter::new(file))
            .map_err(io_err(&out))?;
    }
    Ok(count)
}

/// Runs the adaptation loop until a stop verdict, a failure, or `max_iterations` rounds.
pub fn run_loop(
    cfg: &LoopConfig,
    trainer: &mut dyn Trainer,
    validator: &mut dyn Validator,
) -> Result<LoopOutcome, AdaptError> {
    if cfg.max_iterations == 0 {
        return Err(AdaptError::Invalid("max_iterations must be positive".into()));
    }
    fs::create_dir_all(&cfg.work_dir).map_err(io_err(&cfg.work_dir))?;
    let manifest = cfg.manifest_path();
    let baseline = validator.score(&cfg.initial_dets_dir)?;
    tracing::info!(score = baseline, "baseline validation");

    let mut scores = vec![baseline];
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut current = cfg.initial_dets_dir.clone();
    let mut best = (baseline, current.clone());
    let mut failure = None;
    write_manifest(&manifest, baseline, &records)?;

    for iteration in 0..cfg.max_iterations {
        let threshold = cfg.schedule.threshold(iteration);
        let epochs = cfg.schedule.epochs(iteration);
        let round = cfg.work_dir.join(format!("iter_{iteration}"));
        let labels_dir = round.join("labels");
        let out_dir = round.join("dets");
        let label_count = write_pseudo_labels(&current, &labels_dir, threshold)?;
        fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

        let request = TrainRequest {
            iteration,
            threshold,
            epochs,
            labels_dir,
            out_dir: out_dir.clone(),
        };
        let attempt = trainer
            .train(&request)
            .and_then(|()| validator.score(&out_dir));
        let mut record = IterationRecord {
            iteration,
            threshold,
            epochs,
            pseudo_label_count: label_count,
            validation_score: f64::NAN,
            verdict: Verdict::Failed,
        };
        match attempt {
            Ok(score) => {
                record.validation_score = score;
                record.verdict = decide_stop(&scores, score, cfg.min_delta);
                scores.push(score);
                if score > best.0 {
                    best = (score, out_dir.clone());
                }
            }
            Err(e) => {
                tracing::error!(iteration, error = %e, "iteration failed");
                failure = Some(e.to_string());
            }
        }
        tracing::info!(
            iteration,
            threshold,
            epochs,
            labels = label_count,
            score = record.validation_score,
            verdict = %record.verdict,
            "iteration complete"
        );
        let verdict = record.verdict;
        records.push(record);
        write_manifest(&manifest, baseline, &records)?;
        if verdict != Verdict::Continue {
            break;
        }
        current = out_dir;
    }

    Ok(LoopOutcome {
        baseline_score: baseline,
        records,
        failure,
        best_dets_dir: best.1,
    })
}
