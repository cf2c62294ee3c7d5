//! Every cargo example doubles as a smoke test.

macro_rules! example_test {
    ($module:ident, $file:literal, $test:ident) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example_test!(fuse_example, "fuse_multiscale.rs", fuse_multiscale_example_runs);
example_test!(track_example, "track_sequence.rs", track_sequence_example_runs);
example_test!(ablation_example, "lost_tracklet_ablation.rs", lost_tracklet_ablation_example_runs);
example_test!(gsi_example, "gsi_smoothing.rs", gsi_smoothing_example_runs);
example_test!(kalman_example, "kalman_nsa.rs", kalman_nsa_example_runs);
example_test!(eval_example, "evaluate_results.rs", evaluate_results_example_runs);
example_test!(adapt_example, "adaptation_loop.rs", adaptation_loop_example_runs);
example_test!(assign_example, "assignment_and_nms.rs", assignment_and_nms_example_runs);
