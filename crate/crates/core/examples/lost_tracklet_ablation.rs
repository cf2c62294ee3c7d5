// Compare recovering an occluded track with and without lost tracks in the
// low-score association stage.
//
// Run with `cargo run --example lost_tracklet_ablation`.

use bytefuse::evaluation::evaluate;
use bytefuse::sim::{occlusion_scenario, Motion, OcclusionSpec, ScenarioConfig};
use bytefuse::tracker::run_sequence_with;
use bytefuse::{PipelineConfig, StageTwoPool};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::default();
    println!("{:>4} {:>12} {:>12}", "seed", "FN+IDs with", "FN+IDs w/o");
    let (mut with_total, mut without_total) = (0, 0);
    for seed in 0..5 {
        let scenario = occlusion_scenario(&ScenarioConfig {
            motion: Motion::Occlusion,
            n_tracks: 3,
            n_frames: 100,
            seed,
            occlusion: OcclusionSpec {
                len: 10,
                ..OcclusionSpec::default()
            },
            ..ScenarioConfig::default()
        })?;
        let mut cost = [0; 2];
        for (slot, pool) in [StageTwoPool::TrackedAndLost, StageTwoPool::TrackedOnly]
            .into_iter()
            .enumerate()
        {
            let result = run_sequence_with(&scenario.dets, &cfg, pool, "occlusion")?;
            let report = evaluate(&scenario.gt, &result)?;
            cost[slot] = report.fn_ + report.id_switches;
        }
        println!("{seed:>4} {:>12} {:>12}", cost[0], cost[1]);
        with_total += cost[0];
        without_total += cost[1];
    }
    assert!(with_total <= without_total);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
