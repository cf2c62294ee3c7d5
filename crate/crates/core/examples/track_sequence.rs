// Simulate a clean scene, track it and score the result.
//
// Run with `cargo run --example track_sequence`.

use bytefuse::evaluation::evaluate;
use bytefuse::sim::{generate_scenario, ScenarioConfig};
use bytefuse::{run_sequence, PipelineConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = generate_scenario(&ScenarioConfig {
        n_tracks: 5,
        n_frames: 200,
        noise_px: 1.0,
        seed: 7,
        ..ScenarioConfig::default()
    })?;
    let result = run_sequence(&scenario.dets, &PipelineConfig::default())?;
    let report = evaluate(&scenario.gt, &result)?;
    println!(
        "tracks={} boxes={} MOTA={:.2}% FP={} FN={} IDs={}",
        result.track_ids().len(),
        result.box_count(),
        report.mota_percent(),
        report.fp,
        report.fn_,
        report.id_switches
    );
    assert_eq!(report.id_switches, 0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
