//! Multi-scale, flip-augmented detection fusion.
//!
//! Detections arrive from three input resolutions, each run on the original and
//! the horizontally flipped image. Flipped predictions are mapped back to
//! original coordinates, each tier is restricted to the box sizes it is trusted
//! for, and the surviving boxes of a frame are suppressed together in one NMS
//! pass. All boxes are expressed in original-image pixels.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::PipelineConfig;
use crate::detection::{Detection, SourceTier};
use crate::geometry::{hflip_box, nms, GeometryError};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("set ({tier}, flipped={flipped}) is not flipped; nothing to undo")]
    NotFlipped { tier: SourceTier, flipped: bool },
    #[error("detection in frame {frame} has an unspecified source tier")]
    UntaggedDetection { frame: u32 },
    #[error("detection in frame {frame} is tagged ({found_tier}, {found_flipped}) but its set is ({tier}, {flipped})")]
    TagMismatch {
        frame: u32,
        tier: SourceTier,
        flipped: bool,
        found_tier: SourceTier,
        found_flipped: bool,
    },
    #[error("duplicate input set for ({tier}, flipped={flipped})")]
    DuplicateSet { tier: SourceTier, flipped: bool },
    #[error("missing input set for ({tier}, flipped={flipped})")]
    MissingSet { tier: SourceTier, flipped: bool },
    #[error("input sets disagree on image width ({0} vs {1})")]
    WidthMismatch(f64, f64),
    #[error("image width {0} must be positive")]
    InvalidWidth(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Predictions of one (tier, flipped) input over a whole sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TierSet {
    pub tier: SourceTier,
    pub flipped: bool,
    pub detections: BTreeMap<u32, Vec<Detection>>,
    pub image_width: f64,
}

impl TierSet {
    /// Wraps untagged detections, stamping each with this set's tier and flip flag.
    pub fn new(
        tier: SourceTier,
        flipped: bool,
        mut detections: BTreeMap<u32, Vec<Detection>>,
        image_width: f64,
    ) -> Self {
        for d in detections.values_mut().flatten() {
            d.source_tier = tier;
            d.flipped = flipped;
        }
        Self {
            tier,
            flipped,
            detections,
            image_width,
        }
    }

    pub fn len(&self) -> usize {
        self.detections.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_tags(&self) -> Result<(), FusionError> {
        for d in self.detections.values().flatten() {
            if d.source_tier != self.tier || d.flipped != self.flipped {
                return Err(FusionError::TagMismatch {
                    frame: d.frame,
                    tier: self.tier,
                    flipped: self.flipped,
                    found_tier: d.source_tier,
                    found_flipped: d.flipped,
                });
            }
        }
        Ok(())
    }
}

/// Maps a flipped set back into original image coordinates.
pub fn deflip(set: TierSet) -> Result<TierSet, FusionError> {
    if !set.flipped {
        return Err(FusionError::NotFlipped {
            tier: set.tier,
            flipped: set.flipped,
        });
    }
    let width = set.image_width;
    let mut detections = BTreeMap::new();
    for (frame, list) in set.detections {
        let mapped = list
            .into_iter()
            .map(|mut d| {
                d.bbox = hflip_box(&d.bbox, width)?;
                d.flipped = false;
                Ok(d)
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        detections.insert(frame, mapped);
    }
    Ok(TierSet {
        tier: set.tier,
        flipped: false,
        detections,
        image_width: width,
    })
}

/// Size gate: low tier keeps only large boxes, high tier only small ones.
pub fn scale_gate(d: &Detection, cfg: &PipelineConfig) -> Result<bool, FusionError> {
    let area = d.bbox.area();
    match d.source_tier {
        SourceTier::Low => Ok(area > cfg.gate_small_area),
        SourceTier::Medium => Ok(true),
        SourceTier::High => Ok(area < cfg.gate_large_area),
        SourceTier::Unspecified => Err(FusionError::UntaggedDetection { frame: d.frame }),
    }
}

/// Fuses exactly six sets (three tiers × original/flipped) into one detection list per frame.
pub fn fuse_multiscale(
    sets: Vec<TierSet>,
    cfg: &PipelineConfig,
) -> Result<BTreeMap<u32, Vec<Detection>>, FusionError> {
    let mut by_key: BTreeMap<(SourceTier, bool), TierSet> = BTreeMap::new();
    let mut width: Option<f64> = None;
    for set in sets {
        if !(set.image_width > 0.0 && set.image_width.is_finite()) {
            return Err(FusionError::InvalidWidth(set.image_width));
        }
        match width {
            Some(w) if w != set.image_width => {
                return Err(FusionError::WidthMismatch(w, set.image_width))
            }
            _ => width = Some(set.image_width),
        }
        if set.tier == SourceTier::Unspecified {
            return Err(FusionError::UntaggedDetection {
                frame: set.detections.keys().next().copied().unwrap_or(0),
            });
        }
        set.check_tags()?;
        let key = (set.tier, set.flipped);
        if by_key.insert(key, set).is_some() {
            return Err(FusionError::DuplicateSet {
                tier: key.0,
                flipped: key.1,
            });
        }
    }
    for tier in SourceTier::TAGGED {
        for flipped in [false, true] {
            if !by_key.contains_key(&(tier, flipped)) {
                return Err(FusionError::MissingSet { tier, flipped });
            }
        }
    }

    // Pool in canonical (tier, flipped) order so NMS tie-breaking does not
    // depend on the order the caller supplied the sets in.
    let mut pooled: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for (_, set) in by_key {
        let set = if set.flipped { deflip(set)? } else { set };
        for (frame, list) in set.detections {
            let slot = pooled.entry(frame).or_default();
            for d in list {
                if scale_gate(&d, cfg)? {
                    slot.push(d);
                }
            }
        }
    }

    Ok(pooled
        .into_iter()
        .map(|(frame, pool)| {
            let kept = nms(&pool, cfg.nms_iou)
                .into_iter()
                .map(|d| d.with_source(SourceTier::Unspecified, false))
                .collect();
            (frame, kept)
        })
        .filter(|(_, kept): &(u32, Vec<Detection>)| !kept.is_empty())
        .collect())
}
