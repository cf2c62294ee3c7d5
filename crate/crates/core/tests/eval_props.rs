use std::collections::BTreeMap;

use bytefuse::evaluation::{evaluate, gt_as_result, match_frame, MATCH_IOU};
use bytefuse::io::GtEntry;
use bytefuse::sim::{generate_scenario, Motion, ScenarioConfig};
use bytefuse::{iou, BBox, SequenceResult, TrackBox};
use proptest::prelude::*;

fn gt_entry(frame: u32, id: u32, bbox: BBox) -> GtEntry {
    GtEntry { frame, track_id: id, bbox, active: true, visibility: 1.0 }
}

fn grid_box() -> impl Strategy<Value = BBox> {
    (0..8u8, 0..4u8).prop_map(|(x, y)| BBox::new(f64::from(x) * 15.0, f64::from(y) * 40.0, 30.0, 60.0))
}

/// Largest number of gt/pred pairs with IoU ≥ 0.5 that can be matched at once.
fn max_matching(gts: &[BBox], preds: &[BBox]) -> usize {
    fn rec(i: usize, gts: &[BBox], preds: &[BBox], used: &mut Vec<bool>) -> usize {
        if i == gts.len() {
            return 0;
        }
        let mut best = rec(i + 1, gts, preds, used);
        for j in 0..preds.len() {
            if !used[j] && iou(&gts[i], &preds[j]) >= MATCH_IOU {
                used[j] = true;
                best = best.max(1 + rec(i + 1, gts, preds, used));
                used[j] = false;
            }
        }
        best
    }
    rec(0, gts, preds, &mut vec![false; preds.len()])
}

proptest! {
    #[test]
    fn gt_as_result_is_perfect(seed in any::<u64>(), motion in prop_oneof![Just(Motion::ConstantVelocity), Just(Motion::Crossing)]) {
        let s = generate_scenario(&ScenarioConfig { seed, motion, n_frames: 60, ..ScenarioConfig::default() }).unwrap();
        let r = evaluate(&s.gt, &gt_as_result(&s.gt, "gt")).unwrap();
        prop_assert_eq!((r.mota, r.fp, r.fn_, r.id_switches), (1.0, 0, 0, 0));
    }

    #[test]
    fn counts_balance_per_frame(
        frames in prop::collection::vec((prop::collection::vec(grid_box(), 0..5), prop::collection::vec((1..6u32, grid_box()), 0..5)), 1..12)
    ) {
        let mut gt = BTreeMap::new();
        let mut result = SequenceResult::new("p");
        for (i, (g, p)) in frames.iter().enumerate() {
            let f = i as u32 + 1;
            gt.insert(f, g.iter().enumerate().map(|(k, b)| gt_entry(f, k as u32 + 1, *b)).collect::<Vec<_>>());
            for (id, b) in p {
                result.insert(f, *id, TrackBox { bbox: *b, confidence: 1.0 });
            }
        }
        if gt.values().all(Vec::is_empty) {
            return Ok(());
        }
        let report = evaluate(&gt, &result).unwrap();
        let mut fp = 0;
        for st in &report.per_frame {
            prop_assert_eq!(st.fp + st.matches, st.predictions);
            prop_assert_eq!(st.fn_ + st.matches, st.gt);
            fp += st.fp;
        }
        prop_assert_eq!(fp, report.fp);
        prop_assert_eq!(report.mota, report.mota_from_counts());
        let expected = 1.0 - (report.fp + report.fn_ + report.id_switches) as f64 / report.gt_count as f64;
        prop_assert!((report.mota - expected).abs() < 1e-12);
    }

    #[test]
    fn fresh_frame_matches_maximum(g in prop::collection::vec(grid_box(), 0..6), p in prop::collection::vec(grid_box(), 0..6)) {
        let gts: Vec<GtEntry> = g.iter().enumerate().map(|(k, b)| gt_entry(1, k as u32 + 1, *b)).collect();
        let preds: Vec<(u32, BBox)> = p.iter().enumerate().map(|(k, b)| (k as u32 + 1, *b)).collect();
        let m = match_frame(&gts, &preds, &mut BTreeMap::new());
        prop_assert_eq!(m.pairs.len(), max_matching(&g, &p));
        prop_assert_eq!(m.id_switches, 0);
    }
}

#[test]
fn frame_examples() {
    let b = BBox::new(0.0, 0.0, 10.0, 10.0);
    let mut last = BTreeMap::new();
    let m = match_frame(&[gt_entry(1, 1, b)], &[(1, b)], &mut last);
    assert_eq!((m.fp, m.fn_, m.id_switches), (0, 0, 0));
    let m = match_frame(&[gt_entry(2, 1, b)], &[], &mut last);
    assert_eq!(m.fn_, 1);
    let m = match_frame(&[gt_entry(3, 1, b)], &[(2, b)], &mut last);
    assert_eq!(m.id_switches, 1);
}

#[test]
fn continuity_beats_better_overlap() {
    // gt 1 was matched to pred 5; pred 6 now overlaps more, but 5 still clears the gate.
    let g = BBox::new(0.0, 0.0, 10.0, 10.0);
    let mut last = BTreeMap::from([(1, 5)]);
    let m = match_frame(&[gt_entry(2, 1, g)], &[(5, BBox::new(2.0, 0.0, 10.0, 10.0)), (6, g)], &mut last);
    assert_eq!(m.pairs, vec![(1, 5)]);
    assert_eq!((m.fp, m.id_switches), (1, 0));
}

#[test]
fn one_miss_in_ten() {
    let b = BBox::new(0.0, 0.0, 10.0, 10.0);
    let gt: BTreeMap<u32, Vec<GtEntry>> = (1..=10).map(|f| (f, vec![gt_entry(f, 1, b)])).collect();
    let mut r = SequenceResult::new("m");
    for f in (1..=10).filter(|&f| f != 4) {
        r.insert(f, 1, TrackBox { bbox: b, confidence: 1.0 });
    }
    let rep = evaluate(&gt, &r).unwrap();
    assert_eq!(rep.fn_, 1);
    assert!((rep.mota - 0.9).abs() < 1e-12);
    assert!(evaluate(&BTreeMap::new(), &r).is_err());
}
