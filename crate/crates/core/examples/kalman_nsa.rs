// Show how detection confidence scales the measurement noise of the motion model.
//
// Run with `cargo run --example kalman_nsa`.

use bytefuse::kalman::KalmanState;
use bytefuse::BBox;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let start = BBox::new(100.0, 100.0, 40.0, 100.0);
    let observed = BBox::new(120.0, 100.0, 40.0, 100.0);
    let prior = KalmanState::init(&start).predict();

    println!("prior x = {:.3}", prior.to_bbox().x);
    let mut last = f64::NEG_INFINITY;
    for confidence in [0.0, 0.3, 0.6, 0.9, 1.0] {
        let post = prior.update_nsa(&observed, confidence)?;
        let x = post.to_bbox().x;
        println!("confidence {confidence:.1}: posterior x = {x:.3}");
        assert!(x >= last, "higher confidence pulls harder toward the measurement");
        last = x;
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
