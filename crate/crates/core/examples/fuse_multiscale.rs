// Fuse three input resolutions and their horizontal flips into one detection set.
//
// Run with `cargo run --example fuse_multiscale`.

use std::collections::BTreeMap;

use bytefuse::fusion::{fuse_multiscale, TierSet};
use bytefuse::{hflip_box, BBox, Detection, PipelineConfig, SourceTier};

const WIDTH: f64 = 1920.0;

fn frame_of(boxes: &[(BBox, f64)]) -> BTreeMap<u32, Vec<Detection>> {
    let dets = boxes.iter().map(|&(b, s)| Detection::new(1, b, s)).collect();
    BTreeMap::from([(1, dets)])
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::default();
    let small = BBox::new(100.0, 100.0, 20.0, 40.0); // 800 px², too small for the low tier
    let large = BBox::new(900.0, 300.0, 120.0, 240.0); // 28800 px², too large for the high tier

    let mut sets = Vec::new();
    for tier in SourceTier::TAGGED {
        let orig = frame_of(&[(small, 0.8), (large, 0.9)]);
        // The flipped pass sees mirrored boxes, slightly shifted.
        let flip = frame_of(&[
            (hflip_box(&small.translated(1.0, 0.0), WIDTH)?, 0.75),
            (hflip_box(&large.translated(-2.0, 1.0), WIDTH)?, 0.85),
        ]);
        sets.push(TierSet::new(tier, false, orig, WIDTH));
        sets.push(TierSet::new(tier, true, flip, WIDTH));
    }

    let fused = fuse_multiscale(sets, &cfg)?;
    let frame = &fused[&1];
    println!("{} detections after gating and NMS:", frame.len());
    for d in frame {
        println!(
            "  x={:.1} y={:.1} w={:.1} h={:.1} score={:.2}",
            d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.score
        );
    }
    assert_eq!(frame.len(), 2, "one box per object survives");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
