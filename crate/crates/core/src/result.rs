use std::collections::BTreeMap;

use crate::geometry::BBox;

/// Confidence written for boxes the tracker observed directly.
pub const TRACKED_CONFIDENCE: f64 = 1.0;
/// Confidence marker for boxes synthesized by gap interpolation.
pub const INTERPOLATED_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackBox {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Per-frame track boxes of one sequence, keyed by frame then track id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceResult {
    pub name: String,
    pub frame_count: u32,
    frames: BTreeMap<u32, BTreeMap<u32, TrackBox>>,
}

impl SequenceResult {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            frame_count: 0,
            frames: BTreeMap::new(),
        }
    }

    /// Inserts a box; returns the previous entry if `(frame, id)` was already present.
    pub fn insert(&mut self, frame: u32, id: u32, tb: TrackBox) -> Option<TrackBox> {
        self.frame_count = self.frame_count.max(frame);
        self.frames.entry(frame).or_default().insert(id, tb)
    }

    pub fn get(&self, frame: u32, id: u32) -> Option<&TrackBox> {
        self.frames.get(&frame).and_then(|m| m.get(&id))
    }

    pub fn frames(&self) -> &BTreeMap<u32, BTreeMap<u32, TrackBox>> {
        &self.frames
    }

    pub fn frame(&self, frame: u32) -> Option<&BTreeMap<u32, TrackBox>> {
        self.frames.get(&frame)
    }

    pub fn is_empty(&self) -> bool {
        self.frames.values().all(|m| m.is_empty())
    }

    pub fn box_count(&self) -> usize {
        self.frames.values().map(|m| m.len()).sum()
    }

    /// Regroups boxes by track id, each track's entries in frame order.
    pub fn tracks(&self) -> BTreeMap<u32, Vec<(u32, TrackBox)>> {
        let mut out: BTreeMap<u32, Vec<(u32, TrackBox)>> = BTreeMap::new();
        for (&frame, boxes) in &self.frames {
            for (&id, tb) in boxes {
                out.entry(id).or_default().push((frame, *tb));
            }
        }
        out
    }

    pub fn track_ids(&self) -> Vec<u32> {
        self.tracks().into_keys().collect()
    }
}
