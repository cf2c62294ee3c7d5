// The two combinatorial building blocks: gated assignment and greedy NMS.
//
// Run with `cargo run --example assignment_and_nms`.

use bytefuse::assignment::solve_assignment;
use bytefuse::{nms, BBox, Detection};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Rows are tracks, columns detections; costs above the gate never match.
    let cost = vec![vec![0.1, 0.9, 0.6], vec![0.2, 0.3, 0.95]];
    let a = solve_assignment(&cost, 3, 0.8);
    println!("pairs={:?} unmatched tracks={:?} detections={:?}", a.pairs, a.unmatched_rows, a.unmatched_cols);
    assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);

    let dets = vec![
        Detection::new(1, BBox::new(0.0, 0.0, 100.0, 100.0), 0.9),
        Detection::new(1, BBox::new(5.0, 5.0, 100.0, 100.0), 0.8),
        Detection::new(1, BBox::new(300.0, 0.0, 100.0, 100.0), 0.7),
    ];
    let kept = nms(&dets, 0.7);
    println!("nms kept {} of {}", kept.len(), dets.len());
    assert_eq!(kept.len(), 2);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
