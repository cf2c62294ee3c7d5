//! MOTChallenge text formats: detections, ground truth and tracker results.
//!
//! All formats are comma-separated, one record per line, no header. Parsers
//! accept `\n` or `\r\n` line endings and skip blank lines; writers emit `\n`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::detection::Detection;
use crate::geometry::BBox;
use crate::result::{SequenceResult, TrackBox};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("input is not valid UTF-8 (first bad byte at offset {0})")]
    Encoding(usize),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: duplicate entry for frame {frame}, id {id}")]
    Duplicate { line: usize, frame: u32, id: u32 },
}

fn line_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line {
        line,
        message: message.into(),
    }
}

fn read_all(mut reader: impl Read) -> Result<String, ParseError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|e| ParseError::Encoding(e.utf8_error().valid_up_to()))
}

/// Yields `(line_number, fields)` for every non-blank line.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.split('\n').enumerate().filter_map(|(i, raw)| {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            None
        } else {
            Some((i + 1, raw.split(',').map(str::trim).collect()))
        }
    })
}

fn field_f64(fields: &[&str], idx: usize, name: &str, line: usize) -> Result<f64, ParseError> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| line_err(line, format!("missing column {} ({name})", idx + 1)))?;
    let v: f64 = raw
        .parse()
        .map_err(|_| line_err(line, format!("{name} {raw:?} is not a number")))?;
    if !v.is_finite() {
        return Err(line_err(line, format!("{name} {raw:?} is not finite")));
    }
    Ok(v)
}

/// Integers may be written as `3` or `3.0`.
fn field_int(fields: &[&str], idx: usize, name: &str, line: usize) -> Result<i64, ParseError> {
    let v = field_f64(fields, idx, name, line)?;
    if v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(line_err(line, format!("{name} {v} is not an integer")));
    }
    Ok(v as i64)
}

fn field_frame(fields: &[&str], line: usize) -> Result<u32, ParseError> {
    let v = field_int(fields, 0, "frame", line)?;
    u32::try_from(v)
        .ok()
        .filter(|&f| f >= 1)
        .ok_or_else(|| line_err(line, format!("frame {v} must be a positive integer")))
}

fn field_bbox(fields: &[&str], line: usize) -> Result<BBox, ParseError> {
    let x = field_f64(fields, 2, "x", line)?;
    let y = field_f64(fields, 3, "y", line)?;
    let w = field_f64(fields, 4, "width", line)?;
    let h = field_f64(fields, 5, "height", line)?;
    if w <= 0.0 {
        return Err(line_err(line, format!("non-positive width {w}")));
    }
    if h <= 0.0 {
        return Err(line_err(line, format!("non-positive height {h}")));
    }
    Ok(BBox::new(x, y, w, h))
}

fn field_unit(fields: &[&str], idx: usize, name: &str, line: usize) -> Result<f64, ParseError> {
    let v = field_f64(fields, idx, name, line)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(line_err(line, format!("{name} {v} outside [0, 1]")));
    }
    Ok(v)
}

/// Parses `frame,id,x,y,w,h,conf[,...]`. The id column is ignored.
pub fn parse_detections(reader: impl Read) -> Result<BTreeMap<u32, Vec<Detection>>, ParseError> {
    let text = read_all(reader)?;
    let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for (line, fields) in records(&text) {
        if fields.len() < 7 {
            return Err(line_err(
                line,
                format!("expected at least 7 columns, found {}", fields.len()),
            ));
        }
        let frame = field_frame(&fields, line)?;
        let bbox = field_bbox(&fields, line)?;
        let score = field_unit(&fields, 6, "confidence", line)?;
        out.entry(frame)
            .or_default()
            .push(Detection::new(frame, bbox, score));
    }
    Ok(out)
}

/// One ground-truth annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct GtEntry {
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BBox,
    pub active: bool,
    pub visibility: f64,
}

pub const PEDESTRIAN_CLASS: i64 = 1;
/// Largest class label defined by the MOT16/17 annotation scheme.
const MAX_KNOWN_CLASS: i64 = 13;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    /// Pedestrian entries by frame, active or not.
    pub frames: BTreeMap<u32, Vec<GtEntry>>,
    /// Entries of known non-pedestrian classes.
    pub other_class_count: usize,
    /// Entries skipped because their class label is not recognised.
    pub unknown_class_count: usize,
}

impl GroundTruth {
    /// Active pedestrian entries only; the set evaluation is scored against.
    pub fn evaluation_frames(&self) -> BTreeMap<u32, Vec<GtEntry>> {
        self.frames
            .iter()
            .map(|(&f, es)| (f, es.iter().filter(|e| e.active).cloned().collect()))
            .collect()
    }
}

/// Parses `frame,id,x,y,w,h,active,class,visibility`.
pub fn parse_ground_truth(reader: impl Read) -> Result<GroundTruth, ParseError> {
    let text = read_all(reader)?;
    let mut gt = GroundTruth::default();
    let mut seen: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (line, fields) in records(&text) {
        if fields.len() < 9 {
            return Err(line_err(
                line,
                format!("expected 9 columns, found {}", fields.len()),
            ));
        }
        let frame = field_frame(&fields, line)?;
        let id = field_int(&fields, 1, "id", line)?;
        let track_id = u32::try_from(id)
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| line_err(line, format!("track id {id} must be positive")))?;
        let bbox = field_bbox(&fields, line)?;
        let active = match field_int(&fields, 6, "active flag", line)? {
            0 => false,
            1 => true,
            v => return Err(line_err(line, format!("active flag {v} must be 0 or 1"))),
        };
        let class = field_int(&fields, 7, "class", line)?;
        let visibility = field_unit(&fields, 8, "visibility", line)?;
        if seen.insert((frame, track_id), line).is_some() {
            return Err(ParseError::Duplicate {
                line,
                frame,
                id: track_id,
            });
        }
        if !(1..=MAX_KNOWN_CLASS).contains(&class) {
            gt.unknown_class_count += 1;
            continue;
        }
        if class != PEDESTRIAN_CLASS {
            gt.other_class_count += 1;
            continue;
        }
        gt.frames.entry(frame).or_default().push(GtEntry {
            frame,
            track_id,
            bbox,
            active,
            visibility,
        });
    }
    if gt.unknown_class_count > 0 {
        tracing::warn!(
            skipped = gt.unknown_class_count,
            "ground truth entries with unknown class skipped"
        );
    }
    Ok(gt)
}

/// Parses a result file `frame,id,x,y,w,h,conf,...` back into a [`SequenceResult`].
pub fn parse_results(reader: impl Read, name: &str) -> Result<SequenceResult, ParseError> {
    let text = read_all(reader)?;
    let mut result = SequenceResult::new(name);
    for (line, fields) in records(&text) {
        if fields.len() < 7 {
            return Err(line_err(
                line,
                format!("expected at least 7 columns, found {}", fields.len()),
            ));
        }
        let frame = field_frame(&fields, line)?;
        let id = field_int(&fields, 1, "id", line)?;
        let id = u32::try_from(id)
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| line_err(line, format!("track id {id} must be positive")))?;
        let bbox = field_bbox(&fields, line)?;
        let confidence = field_unit(&fields, 6, "confidence", line)?;
        if result
            .insert(frame, id, TrackBox { bbox, confidence })
            .is_some()
        {
            return Err(ParseError::Duplicate { line, frame, id });
        }
    }
    Ok(result)
}

/// Writes `frame,id,x,y,w,h,conf,-1,-1,-1` lines ordered by frame then id.
pub fn write_results(result: &SequenceResult, mut sink: impl Write) -> std::io::Result<()> {
    for (frame, boxes) in result.frames() {
        for (id, tb) in boxes {
            let b = &tb.bbox;
            writeln!(
                sink,
                "{frame},{id},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
                b.x, b.y, b.w, b.h, tb.confidence
            )?;
        }
    }
    sink.flush()
}

/// Writes detections as `frame,-1,x,y,w,h,conf,-1,-1,-1`.
pub fn write_detections(
    dets: &BTreeMap<u32, Vec<Detection>>,
    mut sink: impl Write,
) -> std::io::Result<()> {
    for (frame, list) in dets {
        for d in list {
            let b = &d.bbox;
            writeln!(
                sink,
                "{frame},-1,{:.2},{:.2},{:.2},{:.2},{:.4},-1,-1,-1",
                b.x, b.y, b.w, b.h, d.score
            )?;
        }
    }
    sink.flush()
}

/// Writes ground truth as `frame,id,x,y,w,h,active,1,visibility`.
pub fn write_ground_truth(
    gt: &BTreeMap<u32, Vec<GtEntry>>,
    mut sink: impl Write,
) -> std::io::Result<()> {
    for (frame, list) in gt {
        let mut list: Vec<&GtEntry> = list.iter().collect();
        list.sort_by_key(|e| e.track_id);
        for e in list {
            let b = &e.bbox;
            writeln!(
                sink,
                "{frame},{},{:.2},{:.2},{:.2},{:.2},{},{PEDESTRIAN_CLASS},{:.2}",
                e.track_id,
                b.x,
                b.y,
                b.w,
                b.h,
                u8::from(e.active),
                e.visibility
            )?;
        }
    }
    sink.flush()
}
