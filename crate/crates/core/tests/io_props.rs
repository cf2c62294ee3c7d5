use std::collections::BTreeMap;

use bytefuse::io::{
    parse_detections, parse_ground_truth, parse_results, write_detections, write_ground_truth,
    write_results, GtEntry, ParseError,
};
use bytefuse::{BBox, Detection, SequenceResult, TrackBox};
use proptest::prelude::*;

fn result() -> impl Strategy<Value = SequenceResult> {
    prop::collection::btree_map(
        (1..200u32, 1..50u32),
        (-50.0..2000.0f64, -50.0..1100.0f64, 1.0..300.0f64, 1.0..500.0f64, prop::bool::ANY),
        0..60,
    )
    .prop_map(|m| {
        let mut r = SequenceResult::new("r");
        for ((f, id), (x, y, w, h, interp)) in m {
            let confidence = if interp { 0.99 } else { 1.0 };
            r.insert(f, id, TrackBox { bbox: BBox::new(x, y, w, h), confidence });
        }
        r
    })
}

fn write_r(r: &SequenceResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_results(r, &mut buf).unwrap();
    buf
}

/// Text built from mostly valid lines with random corruption.
fn near_valid_text() -> impl Strategy<Value = String> {
    let field = prop_oneof![
        Just("1".to_string()),
        Just("-1".to_string()),
        Just("0".to_string()),
        Just("nan".to_string()),
        Just("inf".to_string()),
        Just("".to_string()),
        Just("1e400".to_string()),
        Just("4294967296".to_string()),
        (-1e3..1e3f64).prop_map(|v| format!("{v}")),
        "[ -~]{0,6}",
    ];
    prop::collection::vec(prop::collection::vec(field, 0..12).prop_map(|f| f.join(",")), 0..8)
        .prop_map(|lines| lines.join("\n"))
}

proptest! {
    #[test]
    fn results_round_trip_byte_identical(r in result()) {
        let first = write_r(&r);
        let parsed = parse_results(first.as_slice(), "r").unwrap();
        prop_assert_eq!(write_r(&parsed), first);
    }

    #[test]
    fn parsers_survive_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = parse_detections(bytes.as_slice());
        let _ = parse_ground_truth(bytes.as_slice());
        let _ = parse_results(bytes.as_slice(), "fuzz");
    }

    #[test]
    fn parsers_survive_near_valid_text(text in near_valid_text()) {
        for r in [
            parse_detections(text.as_bytes()).err(),
            parse_ground_truth(text.as_bytes()).err(),
            parse_results(text.as_bytes(), "fuzz").err(),
        ].into_iter().flatten() {
            prop_assert!(!r.to_string().is_empty());
        }
    }

    #[test]
    fn detections_round_trip(frames in prop::collection::btree_map(1..100u32, prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64, 1.0..100.0f64, 1.0..100.0f64, 0.0..=1.0f64), 1..5), 0..20)) {
        let dets: BTreeMap<u32, Vec<Detection>> = frames
            .into_iter()
            .map(|(f, v)| (f, v.into_iter().map(|(x, y, w, h, s)| Detection::new(f, BBox::new(x, y, w, h), s)).collect()))
            .collect();
        let mut a = Vec::new();
        write_detections(&dets, &mut a).unwrap();
        let parsed = parse_detections(a.as_slice()).unwrap();
        let mut b = Vec::new();
        write_detections(&parsed, &mut b).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn detection_line_examples() {
    let d = parse_detections("1,-1,10,20,30,40,0.9\n".as_bytes()).unwrap();
    assert_eq!(d[&1][0].bbox, BBox::new(10.0, 20.0, 30.0, 40.0));
    assert_eq!(d[&1][0].score, 0.9);
    let err = parse_detections("1,-1,10,20,-5,40,0.9".as_bytes()).unwrap_err();
    assert!(matches!(err, ParseError::Line { line: 1, .. }));
    assert!(parse_detections("1,-1,10,20,5,40".as_bytes()).is_err());
    assert!(parse_detections("1,-1,10,20,5,40,1.5".as_bytes()).is_err());
    assert!(parse_detections([0xff, 0xfe].as_slice()).is_err());
    assert!(parse_detections("".as_bytes()).unwrap().is_empty());
}

#[test]
fn ground_truth_filters_classes_and_duplicates() {
    let text = "1,1,0,0,10,10,1,1,1.0\n1,2,0,0,10,10,0,1,0.5\n1,3,0,0,10,10,1,7,1.0\n1,4,0,0,10,10,1,99,1.0\n";
    let gt = parse_ground_truth(text.as_bytes()).unwrap();
    assert_eq!(gt.frames[&1].len(), 2);
    assert_eq!(gt.evaluation_frames()[&1].len(), 1);
    assert_eq!(gt.other_class_count, 1);
    assert_eq!(gt.unknown_class_count, 1);
    let dup = "1,1,0,0,10,10,1,1,1\n1,1,5,5,10,10,1,1,1\n";
    assert!(matches!(
        parse_ground_truth(dup.as_bytes()),
        Err(ParseError::Duplicate { line: 2, frame: 1, id: 1 })
    ));
}

#[test]
fn ground_truth_round_trip() {
    let gt: BTreeMap<u32, Vec<GtEntry>> = (1..=3)
        .map(|f| {
            (
                f,
                vec![GtEntry { frame: f, track_id: 2, bbox: BBox::new(1.5, 2.25, 10.0, 20.0), active: true, visibility: 0.5 }],
            )
        })
        .collect();
    let mut a = Vec::new();
    write_ground_truth(&gt, &mut a).unwrap();
    let parsed = parse_ground_truth(a.as_slice()).unwrap();
    assert_eq!(parsed.frames, gt);
}

#[test]
fn results_reject_duplicate_pairs() {
    let text = "1,1,0,0,10,10,1,-1,-1,-1\n1,1,0,0,10,10,1,-1,-1,-1\n";
    assert!(matches!(parse_results(text.as_bytes(), "d"), Err(ParseError::Duplicate { .. })));
}
