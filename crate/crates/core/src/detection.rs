use std::fmt;
use std::str::FromStr;

use crate::geometry::BBox;

/// Resolution tier a detection was predicted at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum SourceTier {
    Low,
    Medium,
    High,
    #[default]
    Unspecified,
}

impl SourceTier {
    pub const TAGGED: [SourceTier; 3] = [SourceTier::Low, SourceTier::Medium, SourceTier::High];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTier::Low => "low",
            SourceTier::Medium => "medium",
            SourceTier::High => "high",
            SourceTier::Unspecified => "unspecified",
        }
    }
}

impl fmt::Display for SourceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(SourceTier::Low),
            "medium" => Ok(SourceTier::Medium),
            "high" => Ok(SourceTier::High),
            "unspecified" => Ok(SourceTier::Unspecified),
            other => Err(format!("unknown tier {other:?}")),
        }
    }
}

/// One candidate box in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub score: f64,
    pub source_tier: SourceTier,
    pub flipped: bool,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, score: f64) -> Self {
        Self {
            frame,
            bbox,
            score,
            source_tier: SourceTier::Unspecified,
            flipped: false,
        }
    }

    pub fn with_source(mut self, tier: SourceTier, flipped: bool) -> Self {
        self.source_tier = tier;
        self.flipped = flipped;
        self
    }
}
