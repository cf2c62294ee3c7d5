// Drive the pseudo-label self-training loop with an in-process trainer.
//
// The trainer here just re-emits the initial detections with slightly better
// boxes each round, so the validation score rises and then plateaus.
//
// Run with `cargo run --example adaptation_loop`.

use std::fs;

use bytefuse::adaptation::{
    run_loop, AdaptError, LoopConfig, Metric, TrainRequest, Trainer, TrackingValidator,
};
use bytefuse::io::{write_detections, write_ground_truth};
use bytefuse::sim::{generate_scenario, ScenarioConfig};
use bytefuse::{Detection, PipelineConfig};

struct ImprovingTrainer {
    clean: std::collections::BTreeMap<u32, Vec<Detection>>,
    rounds: u32,
}

impl Trainer for ImprovingTrainer {
    fn train(&mut self, req: &TrainRequest) -> Result<(), AdaptError> {
        self.rounds += 1;
        // Keep a fraction of frames: more each round until everything is back.
        let keep = (self.rounds * 2).min(4);
        let dets: std::collections::BTreeMap<_, _> = self
            .clean
            .iter()
            .filter(|(f, _)| **f % 4 < keep)
            .map(|(f, d)| (*f, d.clone()))
            .collect();
        let path = req.out_dir.join("seq.txt");
        let file = fs::File::create(&path).map_err(|source| AdaptError::Io { path: path.clone(), source })?;
        write_detections(&dets, file).map_err(|source| AdaptError::Io { path, source })
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let root = tempfile::tempdir()?;
    let scenario = generate_scenario(&ScenarioConfig {
        n_tracks: 3,
        n_frames: 60,
        seed: 11,
        ..ScenarioConfig::default()
    })?;
    let (gt_dir, init_dir) = (root.path().join("gt"), root.path().join("init"));
    fs::create_dir_all(&gt_dir)?;
    fs::create_dir_all(&init_dir)?;
    write_ground_truth(&scenario.gt, fs::File::create(gt_dir.join("seq.txt"))?)?;
    // The source detector misses every other frame.
    let sparse: std::collections::BTreeMap<_, _> = scenario
        .dets
        .iter()
        .filter(|(f, _)| **f % 2 == 0)
        .map(|(f, d)| (*f, d.clone()))
        .collect();
    write_detections(&sparse, fs::File::create(init_dir.join("seq.txt"))?)?;

    let cfg = LoopConfig::new(&init_dir, root.path().join("work"));
    let mut trainer = ImprovingTrainer { clean: scenario.dets, rounds: 0 };
    let mut validator = TrackingValidator {
        gt_dir,
        pipeline: PipelineConfig::default(),
        metric: Metric::Mota,
    };
    let outcome = run_loop(&cfg, &mut trainer, &mut validator)?;
    print!("{}", fs::read_to_string(cfg.manifest_path())?);
    println!("best detections: {}", outcome.best_dets_dir.display());
    assert!(outcome.failure.is_none());
    assert_eq!(outcome.trainer_invocations() as u32, trainer.rounds);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
