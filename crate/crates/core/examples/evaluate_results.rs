// Score a tracker result against ground truth, including an identity swap.
//
// Run with `cargo run --example evaluate_results`.

use bytefuse::evaluation::{evaluate, format_table, ReportRow};
use bytefuse::io::GtEntry;
use bytefuse::{BBox, SequenceResult, TrackBox};
use std::collections::BTreeMap;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let a = |f: u32| BBox::new(10.0 * f64::from(f), 0.0, 50.0, 100.0);
    let b = |f: u32| BBox::new(10.0 * f64::from(f), 300.0, 50.0, 100.0);
    let mut gt = BTreeMap::new();
    let mut result = SequenceResult::new("swap");
    for f in 1..=20 {
        gt.insert(
            f,
            vec![
                GtEntry { frame: f, track_id: 1, bbox: a(f), active: true, visibility: 1.0 },
                GtEntry { frame: f, track_id: 2, bbox: b(f), active: true, visibility: 1.0 },
            ],
        );
        // The two predicted identities trade places from frame 11 on.
        let (ida, idb) = if f <= 10 { (7, 8) } else { (8, 7) };
        result.insert(f, ida, TrackBox { bbox: a(f), confidence: 1.0 });
        result.insert(f, idb, TrackBox { bbox: b(f), confidence: 1.0 });
    }
    let report = evaluate(&gt, &result)?;
    print!("{}", format_table(&[ReportRow::from(&report)]));
    assert_eq!(report.id_switches, 2);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
