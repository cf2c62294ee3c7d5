//! CLEAR-MOT scoring: MOTA, false positives, false negatives and identity switches.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::assignment::solve_assignment;
use crate::geometry::{iou, BBox};
use crate::io::GtEntry;
use crate::result::SequenceResult;

/// Minimum IoU for a prediction to count as covering a ground-truth box.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("ground truth contains no boxes; MOTA is undefined")]
    EmptyGroundTruth,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameStats {
    pub frame: u32,
    pub gt: usize,
    pub predictions: usize,
    pub matches: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub id_switches: usize,
}

/// Result of matching one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    /// `(gt id, prediction id)` pairs.
    pub pairs: Vec<(u32, u32)>,
    pub fp: usize,
    pub fn_: usize,
    pub id_switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub name: String,
    pub mota: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub id_switches: usize,
    pub gt_count: usize,
    pub matches: usize,
    pub per_frame: Vec<FrameStats>,
}

impl EvalReport {
    pub fn mota_percent(&self) -> f64 {
        self.mota * 100.0
    }

    /// Recomputes MOTA from the error counts.
    pub fn mota_from_counts(&self) -> f64 {
        1.0 - (self.fp + self.fn_ + self.id_switches) as f64 / self.gt_count as f64
    }

    /// Pools several sequences into one report, summing the counts.
    pub fn combine(name: &str, reports: &[EvalReport]) -> Result<EvalReport, EvalError> {
        let gt_count: usize = reports.iter().map(|r| r.gt_count).sum();
        if gt_count == 0 {
            return Err(EvalError::EmptyGroundTruth);
        }
        let mut out = EvalReport {
            name: name.to_string(),
            mota: 0.0,
            fp: reports.iter().map(|r| r.fp).sum(),
            fn_: reports.iter().map(|r| r.fn_).sum(),
            id_switches: reports.iter().map(|r| r.id_switches).sum(),
            gt_count,
            matches: reports.iter().map(|r| r.matches).sum(),
            per_frame: Vec::new(),
        };
        out.mota = out.mota_from_counts();
        Ok(out)
    }
}

/// Matches one frame's predictions to its ground truth.
///
/// Correspondences from earlier frames are kept while they still overlap by
/// at least [`MATCH_IOU`]; the rest are matched by an assignment that takes
/// as many pairs as possible at minimum total `1 - IoU`. `last_match` maps each gt id to the prediction id it was last
/// matched to and is updated in place.
pub fn match_frame(
    gts: &[GtEntry],
    preds: &[(u32, BBox)],
    last_match: &mut BTreeMap<u32, u32>,
) -> FrameMatch {
    let pred_index: BTreeMap<u32, usize> =
        preds.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
    let mut gt_taken = vec![false; gts.len()];
    let mut pred_taken = vec![false; preds.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();

    for (gi, g) in gts.iter().enumerate() {
        let Some(&pid) = last_match.get(&g.track_id) else {
            continue;
        };
        let Some(&pi) = pred_index.get(&pid) else {
            continue;
        };
        if !pred_taken[pi] && iou(&g.bbox, &preds[pi].1) >= MATCH_IOU {
            gt_taken[gi] = true;
            pred_taken[pi] = true;
            pairs.push((gi, pi));
        }
    }

    let free_gt: Vec<usize> = (0..gts.len()).filter(|&i| !gt_taken[i]).collect();
    let free_pred: Vec<usize> = (0..preds.len()).filter(|&i| !pred_taken[i]).collect();
    // Every admissible pair is worth far more than any cost difference, so the
    // assignment maximises the number of matches first and total cost second.
    const ADMIT_GATE: f64 = 5.0;
    let cost: Vec<Vec<f64>> = free_gt
        .iter()
        .map(|&gi| {
            free_pred
                .iter()
                .map(|&pi| {
                    let overlap = iou(&gts[gi].bbox, &preds[pi].1);
                    if overlap >= MATCH_IOU {
                        1.0 - overlap
                    } else {
                        2.0 * ADMIT_GATE
                    }
                })
                .collect()
        })
        .collect();
    let assignment = solve_assignment(&cost, free_pred.len(), ADMIT_GATE);
    for (r, c) in assignment.pairs {
        pairs.push((free_gt[r], free_pred[c]));
    }

    let mut id_switches = 0;
    let mut out_pairs = Vec::with_capacity(pairs.len());
    for &(gi, pi) in &pairs {
        let gid = gts[gi].track_id;
        let pid = preds[pi].0;
        if let Some(prev) = last_match.insert(gid, pid) {
            if prev != pid {
                id_switches += 1;
            }
        }
        out_pairs.push((gid, pid));
    }
    out_pairs.sort_unstable();
    FrameMatch {
        fp: preds.len() - pairs.len(),
        fn_: gts.len() - pairs.len(),
        id_switches,
        pairs: out_pairs,
    }
}

/// Scores a result against ground truth (already filtered to the evaluation set).
pub fn evaluate(
    gt: &BTreeMap<u32, Vec<GtEntry>>,
    result: &SequenceResult,
) -> Result<EvalReport, EvalError> {
    let gt_count: usize = gt.values().map(Vec::len).sum();
    if gt_count == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let frames: BTreeSet<u32> = gt.keys().chain(result.frames().keys()).copied().collect();
    let mut last_match = BTreeMap::new();
    let mut per_frame = Vec::with_capacity(frames.len());
    let (mut fp, mut fn_, mut ids, mut matches) = (0, 0, 0, 0);
    for frame in frames {
        let gts = gt.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        let preds: Vec<(u32, BBox)> = result
            .frame(frame)
            .map(|m| m.iter().map(|(id, tb)| (*id, tb.bbox)).collect())
            .unwrap_or_default();
        let m = match_frame(gts, &preds, &mut last_match);
        fp += m.fp;
        fn_ += m.fn_;
        ids += m.id_switches;
        matches += m.pairs.len();
        per_frame.push(FrameStats {
            frame,
            gt: gts.len(),
            predictions: preds.len(),
            matches: m.pairs.len(),
            fp: m.fp,
            fn_: m.fn_,
            id_switches: m.id_switches,
        });
    }
    let mut report = EvalReport {
        name: result.name.clone(),
        mota: 0.0,
        fp,
        fn_,
        id_switches: ids,
        gt_count,
        matches,
        per_frame,
    };
    report.mota = report.mota_from_counts();
    Ok(report)
}

/// Converts ground truth into a result with gt ids as track ids.
pub fn gt_as_result(gt: &BTreeMap<u32, Vec<GtEntry>>, name: &str) -> SequenceResult {
    let mut r = SequenceResult::new(name);
    for (frame, entries) in gt {
        for e in entries {
            r.insert(
                *frame,
                e.track_id,
                crate::result::TrackBox {
                    bbox: e.bbox,
                    confidence: 1.0,
                },
            );
        }
    }
    r
}

/// One row of an ablation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub mota: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub id_switches: usize,
    pub gt_count: usize,
}

impl From<&EvalReport> for ReportRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            method: r.name.clone(),
            mota: r.mota,
            fp: r.fp,
            fn_: r.fn_,
            id_switches: r.id_switches,
            gt_count: r.gt_count,
        }
    }
}

pub const CSV_HEADER: &str = "method,HOTA,MOTA,FP,FN,IDs,GT";

/// CSV with columns `method,HOTA,MOTA,FP,FN,IDs,GT`; HOTA is not computed and printed as `n/a`.
pub fn format_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},n/a,{:.2},{},{},{},{}\n",
            r.method,
            r.mota * 100.0,
            r.fp,
            r.fn_,
            r.id_switches,
            r.gt_count
        ));
    }
    s
}

/// Parses rows written by [`format_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == CSV_HEADER) {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(format!("line {}: expected 7 columns", i + 1));
        }
        let num = |s: &str| -> Result<usize, String> {
            s.parse().map_err(|_| format!("line {}: bad count {s:?}", i + 1))
        };
        let mota: f64 = f[2]
            .parse()
            .map_err(|_| format!("line {}: bad MOTA {:?}", i + 1, f[2]))?;
        rows.push(ReportRow {
            method: f[0].to_string(),
            mota: mota / 100.0,
            fp: num(f[3])?,
            fn_: num(f[4])?,
            id_switches: num(f[5])?,
            gt_count: num(f[6])?,
        });
    }
    Ok(rows)
}

/// Fixed-width table with columns `Method HOTA MOTA FP FN IDs`.
pub fn format_table(rows: &[ReportRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.method.len())
        .chain(std::iter::once("Method".len()))
        .max()
        .unwrap_or(6);
    let mut s = format!(
        "{:<width$}  {:>6}  {:>7}  {:>8}  {:>8}  {:>6}\n",
        "Method", "HOTA", "MOTA", "FP", "FN", "IDs"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<width$}  {:>6}  {:>7.2}  {:>8}  {:>8}  {:>6}\n",
            r.method,
            "n/a",
            r.mota * 100.0,
            r.fp,
            r.fn_,
            r.id_switches
        ));
    }
    s
}
