use std::collections::BTreeMap;
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};

use bytefuse::adaptation::{
    decide_stop, generate_pseudo_labels, run_loop, CommandTrainer, LoopConfig, Metric,
    TrackingValidator, Verdict, MANIFEST_HEADER,
};
use bytefuse::io::{parse_ground_truth, write_detections, write_ground_truth};
use bytefuse::sim::{generate_scenario, ScenarioConfig};
use bytefuse::{BBox, Detection, PipelineConfig};
use proptest::prelude::*;

/// Trainer stub: logs its invocation and copies `<root>/round_<iteration>/*.txt` to `--out`.
/// Exits 3 when `<root>/fail_<iteration>` exists.
const TRAINER: &str = r#"#!/bin/sh
root=$1; shift
while [ $# -gt 0 ]; do
  case "$1" in
    --labels) labels=$2; shift 2 ;;
    --epochs) epochs=$2; shift 2 ;;
    --out) out=$2; shift 2 ;;
    *) shift ;;
  esac
done
echo "$ADAPT_ITERATION $ADAPT_THRESHOLD $ADAPT_EPOCHS $epochs $(ls "$labels" | tr '\n' ' ')" >> "$root/log"
[ -e "$root/fail_$ADAPT_ITERATION" ] && exit 3
[ -d "$root/round_$ADAPT_ITERATION" ] && cp "$root/round_$ADAPT_ITERATION/"*.txt "$out/"
exit 0
"#;

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    clean: BTreeMap<u32, Vec<Detection>>,
    sparse: BTreeMap<u32, Vec<Detection>>,
}

fn write_dets(dir: &Path, dets: &BTreeMap<u32, Vec<Detection>>) {
    fs::create_dir_all(dir).unwrap();
    write_detections(dets, fs::File::create(dir.join("seq.txt")).unwrap()).unwrap();
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let s = generate_scenario(&ScenarioConfig { n_tracks: 3, n_frames: 60, seed: 5, ..ScenarioConfig::default() }).unwrap();
        fs::create_dir_all(root.join("gt")).unwrap();
        write_ground_truth(&s.gt, fs::File::create(root.join("gt/seq.txt")).unwrap()).unwrap();
        // Every second frame missing: no track ever confirms.
        let sparse = s.dets.iter().filter(|(f, _)| **f % 2 == 0).map(|(f, d)| (*f, d.clone())).collect();
        let script = root.join("trainer.sh");
        fs::write(&script, TRAINER).unwrap();
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
        Self { _tmp: tmp, root, clean: s.dets, sparse }
    }

    fn round(&self, i: u32, dets: &BTreeMap<u32, Vec<Detection>>) {
        write_dets(&self.root.join(format!("round_{i}")), dets);
    }

    fn run(&self, initial: &BTreeMap<u32, Vec<Detection>>, max_iterations: u32) -> (bytefuse::adaptation::LoopOutcome, Vec<String>, String) {
        write_dets(&self.root.join("init"), initial);
        let mut cfg = LoopConfig::new(self.root.join("init"), self.root.join("work"));
        cfg.max_iterations = max_iterations;
        let mut trainer = CommandTrainer::parse(&format!("{} {}", self.root.join("trainer.sh").display(), self.root.display())).unwrap();
        let mut validator = TrackingValidator {
            gt_dir: self.root.join("gt"),
            pipeline: PipelineConfig::default(),
            metric: Metric::Mota,
        };
        let outcome = run_loop(&cfg, &mut trainer, &mut validator).unwrap();
        let log = fs::read_to_string(self.root.join("log")).unwrap_or_default();
        let manifest = fs::read_to_string(cfg.manifest_path()).unwrap();
        (outcome, log.lines().map(str::to_string).collect(), manifest)
    }
}

#[test]
fn improves_once_then_plateaus() {
    let fx = Fixture::new();
    fx.round(0, &fx.clean);
    fx.round(1, &fx.clean);
    fx.round(2, &fx.clean);
    let (outcome, log, manifest) = fx.run(&fx.sparse, 10);
    let verdicts: Vec<Verdict> = outcome.records.iter().map(|r| r.verdict).collect();
    assert_eq!(verdicts, vec![Verdict::Continue, Verdict::Stop]);
    assert_eq!(log.len(), 2, "{log:?}");
    assert!(log[0].starts_with("0 0.5 40 40 seq.txt"), "{}", log[0]);
    assert!(log[1].starts_with("1 0.1 20 20 seq.txt"), "{}", log[1]);
    assert!(outcome.baseline_score < outcome.records[0].validation_score);
    assert_eq!(outcome.best_dets_dir, fx.root.join("work/iter_0/dets"));

    let lines: Vec<&str> = manifest.lines().collect();
    assert!(lines[0].starts_with("# baseline_score="));
    assert_eq!(lines[1], MANIFEST_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0,0.50,40,"));
    assert!(lines[3].starts_with("1,0.10,20,") && lines[3].ends_with(",stop"));
}

#[test]
fn always_degrading_stops_after_first_round() {
    let fx = Fixture::new();
    fx.round(0, &fx.sparse);
    fx.round(1, &fx.sparse);
    let (outcome, log, _) = fx.run(&fx.clean, 10);
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.records[0].verdict, Verdict::Stop);
    assert_eq!(log.len(), 1);
    assert_eq!(outcome.best_dets_dir, fx.root.join("init"));
}

#[test]
fn iteration_cap_limits_trainer_calls() {
    let fx = Fixture::new();
    fx.round(0, &fx.clean);
    let (outcome, log, _) = fx.run(&fx.sparse, 1);
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.records[0].verdict, Verdict::Continue);
    assert_eq!(log.len(), 1);
}

#[test]
fn trainer_failure_aborts_loop() {
    let fx = Fixture::new();
    fx.round(0, &fx.clean);
    fs::write(fx.root.join("fail_1"), "").unwrap();
    let (outcome, log, manifest) = fx.run(&fx.sparse, 10);
    assert_eq!(log.len(), 2);
    assert_eq!(outcome.records.len(), 2);
    assert_eq!(outcome.records[1].verdict, Verdict::Failed);
    assert!(outcome.failure.as_deref().is_some_and(|f| f.contains('3')));
    assert!(manifest.lines().last().unwrap().ends_with(",failed"));
}

#[test]
fn missing_output_counts_as_failure() {
    let fx = Fixture::new();
    // No round_0 directory: the trainer exits 0 without writing detections.
    let (outcome, _, _) = fx.run(&fx.sparse, 10);
    assert_eq!(outcome.records.len(), 1);
    assert_eq!(outcome.records[0].verdict, Verdict::Failed);
    assert!(outcome.failure.is_some());
}

#[test]
fn pseudo_labels_written_with_schedule_threshold() {
    let fx = Fixture::new();
    // Half the initial detections fall below 0.5.
    let mixed: BTreeMap<u32, Vec<Detection>> = fx
        .clean
        .iter()
        .map(|(f, ds)| {
            let ds = ds.iter().enumerate().map(|(i, d)| Detection { score: if i % 2 == 0 { 0.9 } else { 0.3 }, ..d.clone() }).collect();
            (*f, ds)
        })
        .collect();
    fx.round(0, &fx.clean);
    let (outcome, _, _) = fx.run(&mixed, 2);
    let labels = parse_ground_truth(fs::File::open(fx.root.join("work/iter_0/labels/seq.txt")).unwrap()).unwrap();
    let kept: usize = labels.frames.values().map(Vec::len).sum();
    assert_eq!(kept, outcome.records[0].pseudo_label_count);
    assert_eq!(kept, 60 * 2);
    for (f, entries) in &labels.frames {
        let ids: Vec<u32> = entries.iter().map(|e| e.track_id).collect();
        assert_eq!(ids, (1..=entries.len() as u32).collect::<Vec<_>>(), "frame {f}");
    }
}

proptest! {
    #[test]
    fn pseudo_labels_are_exact_filter(scores in prop::collection::vec(0.0..=1.0f64, 0..30), t in 0.0..=1.0f64) {
        let dets: BTreeMap<u32, Vec<Detection>> = BTreeMap::from([
            (1, scores.iter().map(|&s| Detection::new(1, BBox::new(0.0, 0.0, 5.0, 5.0), s)).collect()),
            (2, Vec::new()),
        ]);
        let kept = generate_pseudo_labels(&dets, t);
        prop_assert_eq!(kept.len(), 2);
        let expected: Vec<f64> = scores.iter().copied().filter(|&s| s >= t).collect();
        prop_assert_eq!(kept[&1].iter().map(|d| d.score).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn stop_rule_is_monotone(history in prop::collection::vec(0.0..100.0f64, 0..6), s in 0.0..100.0f64, lower in 0.0..50.0f64, delta in 0.0..2.0f64) {
        if decide_stop(&history, s, delta) == Verdict::Stop {
            prop_assert_eq!(decide_stop(&history, s - lower, delta), Verdict::Stop);
        }
    }
}

#[test]
fn stop_rule_examples() {
    assert_eq!(decide_stop(&[60.50], 63.9, 0.0), Verdict::Continue);
    assert_eq!(decide_stop(&[60.50, 63.9], 63.8, 0.0), Verdict::Stop);
    assert_eq!(decide_stop(&[], -5.0, 0.0), Verdict::Continue);
    let scores = [(0.6, 1), (0.4, 0)];
    let dets = BTreeMap::from([(1, scores.iter().map(|&(s, _)| Detection::new(1, BBox::new(0.0, 0.0, 5.0, 5.0), s)).collect::<Vec<_>>())]);
    assert_eq!(generate_pseudo_labels(&dets, 0.5)[&1].len(), 1);
    assert_eq!(generate_pseudo_labels(&dets, 0.1)[&1].len(), 2);
}
