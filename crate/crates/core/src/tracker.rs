//! Two-stage confidence-split association with track lifecycle management.
//!
//! Each frame, high-score detections are matched first against every live
//! track (tentative, tracked and lost). Remaining low-score detections are then
//! matched against the tracks still unmatched. By default lost tracks stay
//! eligible in that second stage too, so a track that vanished behind an
//! occluder can be picked up again by a weak detection.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assignment::solve_assignment;
use crate::config::PipelineConfig;
use crate::detection::Detection;
use crate::geometry::{iou, BBox};
use crate::kalman::{KalmanError, KalmanState};
use crate::result::{SequenceResult, TrackBox, TRACKED_CONFIDENCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("detection belongs to frame {found}, expected frame {expected}")]
    WrongFrame { expected: u32, found: u32 },
    #[error("frame {frame} is not after the previous frame {previous}")]
    FrameOrder { frame: u32, previous: u32 },
    #[error(transparent)]
    Kalman(#[from] KalmanError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Tracked,
    Lost,
    Removed,
}

/// Which tracks the second (low-score) association stage may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageTwoPool {
    /// Tracked and lost tracks.
    #[default]
    TrackedAndLost,
    /// Tracked tracks only; lost tracks are recoverable in stage one alone.
    TrackedOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub frame: u32,
    pub bbox: BBox,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub state: TrackState,
    pub kstate: KalmanState,
    pub last_frame: u32,
    pub frames_lost: u32,
    /// Frames where the track was matched, including its birth frame.
    pub history: Vec<HistoryEntry>,
    confirmed: bool,
}

impl Track {
    fn spawn(id: u32, det: &Detection) -> Self {
        Self {
            id,
            state: TrackState::Tentative,
            kstate: KalmanState::init(&det.bbox),
            last_frame: det.frame,
            frames_lost: 0,
            history: vec![HistoryEntry {
                frame: det.frame,
                bbox: det.bbox,
                confidence: det.score,
            }],
            confirmed: false,
        }
    }

    /// True once the track has been matched after its birth frame.
    pub fn is_confirmed(&self) -> bool {
        self.confirmed
    }

    pub fn predicted_box(&self) -> BBox {
        self.kstate.to_bbox()
    }

    fn apply_match(&mut self, det: &Detection) -> Result<(), KalmanError> {
        self.kstate = self.kstate.update_nsa(&det.bbox, det.score)?;
        self.state = TrackState::Tracked;
        self.confirmed = true;
        self.frames_lost = 0;
        self.last_frame = det.frame;
        self.history.push(HistoryEntry {
            frame: det.frame,
            bbox: self.kstate.to_bbox(),
            confidence: det.score,
        });
        Ok(())
    }
}

/// Matches made in one frame, as `(track id, detection index)` into the frame's input list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatches {
    pub stage_one: Vec<(u32, usize)>,
    pub stage_two: Vec<(u32, usize)>,
    pub spawned: Vec<u32>,
}

impl FrameMatches {
    pub fn matched_detections(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .stage_one
            .iter()
            .chain(&self.stage_two)
            .map(|&(_, d)| d)
            .collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: PipelineConfig,
    pool: StageTwoPool,
    live: Vec<Track>,
    finished: Vec<Track>,
    next_id: u32,
    last_frame: u32,
}

fn cost_matrix(tracks: &[&Track], dets: &[&Detection]) -> Vec<Vec<f64>> {
    tracks
        .iter()
        .map(|t| {
            let pred = t.predicted_box();
            dets.iter().map(|d| 1.0 - iou(&pred, &d.bbox)).collect()
        })
        .collect()
}

impl Tracker {
    pub fn new(cfg: PipelineConfig) -> Self {
        Self::with_pool(cfg, StageTwoPool::default())
    }

    pub fn with_pool(cfg: PipelineConfig, pool: StageTwoPool) -> Self {
        Self {
            cfg,
            pool,
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: 0,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn pool(&self) -> StageTwoPool {
        self.pool
    }

    /// Switches the stage-two policy; with [`Clone`] this lets both variants
    /// continue from one shared state.
    pub fn set_pool(&mut self, pool: StageTwoPool) {
        self.pool = pool;
    }

    /// Tracks that are not removed.
    pub fn live_tracks(&self) -> &[Track] {
        &self.live
    }

    pub fn live_tracks_mut(&mut self) -> &mut Vec<Track> {
        &mut self.live
    }

    /// Removed tracks, in removal order.
    pub fn finished_tracks(&self) -> &[Track] {
        &self.finished
    }

    /// Advances the tracker by one frame.
    pub fn step_frame(&mut self, frame: u32, dets: &[Detection]) -> Result<FrameMatches, TrackError> {
        if frame <= self.last_frame {
            return Err(TrackError::FrameOrder {
                frame,
                previous: self.last_frame,
            });
        }
        if let Some(d) = dets.iter().find(|d| d.frame != frame) {
            return Err(TrackError::WrongFrame {
                expected: frame,
                found: d.frame,
            });
        }
        self.last_frame = frame;
        let cfg = &self.cfg;

        for t in &mut self.live {
            t.kstate = t.kstate.predict();
        }

        let high: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].score >= cfg.det_high_thresh)
            .collect();
        let low: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].score >= cfg.det_low_thresh && dets[i].score < cfg.det_high_thresh)
            .collect();

        let mut out = FrameMatches::default();
        let mut track_matched = vec![false; self.live.len()];

        // Stage one: high detections against every live track.
        let pool1: Vec<usize> = (0..self.live.len()).collect();
        let a1 = {
            let tracks: Vec<&Track> = pool1.iter().map(|&i| &self.live[i]).collect();
            let ds: Vec<&Detection> = high.iter().map(|&i| &dets[i]).collect();
            solve_assignment(&cost_matrix(&tracks, &ds), ds.len(), cfg.match_thresh_stage1)
        };
        for &(r, c) in &a1.pairs {
            let (ti, di) = (pool1[r], high[c]);
            track_matched[ti] = true;
            out.stage_one.push((self.live[ti].id, di));
        }
        let unmatched_high: Vec<usize> = a1.unmatched_cols.iter().map(|&c| high[c]).collect();

        // Stage two: low detections against the remaining confirmed tracks.
        let pool2: Vec<usize> = (0..self.live.len())
            .filter(|&i| !track_matched[i])
            .filter(|&i| match self.live[i].state {
                TrackState::Tracked => true,
                TrackState::Lost => self.pool == StageTwoPool::TrackedAndLost,
                TrackState::Tentative | TrackState::Removed => false,
            })
            .collect();
        let a2 = {
            let tracks: Vec<&Track> = pool2.iter().map(|&i| &self.live[i]).collect();
            let ds: Vec<&Detection> = low.iter().map(|&i| &dets[i]).collect();
            solve_assignment(&cost_matrix(&tracks, &ds), ds.len(), cfg.match_thresh_stage2)
        };
        for &(r, c) in &a2.pairs {
            let (ti, di) = (pool2[r], low[c]);
            track_matched[ti] = true;
            out.stage_two.push((self.live[ti].id, di));
        }

        let by_id: BTreeMap<u32, usize> = self
            .live
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id, i))
            .collect();
        for &(id, di) in out.stage_one.iter().chain(&out.stage_two) {
            self.live[by_id[&id]].apply_match(&dets[di])?;
        }

        let max_lost = cfg.max_lost_age;
        for (t, matched) in self.live.iter_mut().zip(&track_matched) {
            if *matched {
                continue;
            }
            match t.state {
                TrackState::Tentative => t.state = TrackState::Removed,
                TrackState::Tracked => {
                    t.state = TrackState::Lost;
                    t.frames_lost = 1;
                }
                TrackState::Lost => t.frames_lost += 1,
                TrackState::Removed => {}
            }
            if t.state == TrackState::Lost && t.frames_lost > max_lost {
                t.state = TrackState::Removed;
            }
        }
        let (removed, live): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| t.state == TrackState::Removed);
        self.live = live;
        self.finished.extend(removed);

        for di in unmatched_high {
            if dets[di].score >= cfg.new_track_thresh {
                let id = self.next_id;
                self.next_id += 1;
                self.live.push(Track::spawn(id, &dets[di]));
                out.spawned.push(id);
            }
        }
        Ok(out)
    }

    /// Builds the result from every confirmed track's matched frames.
    pub fn result(&self, name: &str) -> SequenceResult {
        let mut result = SequenceResult::new(name);
        for t in self.finished.iter().chain(&self.live) {
            if !t.confirmed {
                continue;
            }
            for h in &t.history {
                if h.bbox.area() > self.cfg.min_box_area {
                    result.insert(
                        h.frame,
                        t.id,
                        TrackBox {
                            bbox: h.bbox,
                            confidence: TRACKED_CONFIDENCE,
                        },
                    );
                }
            }
        }
        result.frame_count = result.frame_count.max(self.last_frame);
        result
    }
}

/// Tracks a whole sequence. Frames without detections are stepped as empty.
pub fn run_sequence(
    dets_by_frame: &BTreeMap<u32, Vec<Detection>>,
    cfg: &PipelineConfig,
) -> Result<SequenceResult, TrackError> {
    run_sequence_with(dets_by_frame, cfg, StageTwoPool::default(), "")
}

pub fn run_sequence_with(
    dets_by_frame: &BTreeMap<u32, Vec<Detection>>,
    cfg: &PipelineConfig,
    pool: StageTwoPool,
    name: &str,
) -> Result<SequenceResult, TrackError> {
    let mut tracker = Tracker::with_pool(cfg.clone(), pool);
    let last = dets_by_frame.keys().next_back().copied().unwrap_or(0);
    for frame in 1..=last {
        let dets = dets_by_frame.get(&frame).map(Vec::as_slice).unwrap_or(&[]);
        tracker.step_frame(frame, dets)?;
    }
    Ok(tracker.result(name))
}
