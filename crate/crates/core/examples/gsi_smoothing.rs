// Fill a gap in a noisy track and smooth it.
//
// Run with `cargo run --example gsi_smoothing`.

use bytefuse::gsi::apply_gsi;
use bytefuse::result::INTERPOLATED_CONFIDENCE;
use bytefuse::{BBox, PipelineConfig, SequenceResult, TrackBox};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut result = SequenceResult::new("demo");
    for frame in (1..=30).filter(|f| !(12..=16).contains(f)) {
        let wobble = if frame % 2 == 0 { 1.5 } else { -1.5 };
        let x = 10.0 + 4.0 * f64::from(frame) + wobble;
        let tb = TrackBox {
            bbox: BBox::new(x, 200.0, 40.0, 100.0),
            confidence: 1.0,
        };
        result.insert(frame, 1, tb);
    }

    let smoothed = apply_gsi(&result, &PipelineConfig::default())?;
    println!("boxes: {} -> {}", result.box_count(), smoothed.box_count());
    for frame in 10..=18 {
        let tb = smoothed.get(frame, 1).expect("gap is filled");
        let marker = if tb.confidence == INTERPOLATED_CONFIDENCE { "filled" } else { "" };
        println!("  frame {frame:>2}: x={:7.2} {marker}", tb.bbox.x);
    }
    assert_eq!(smoothed.box_count(), 30);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
