use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{BoundingBox, EngineConfig};

/// A maximal run of consecutive frames attributed to the query identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineSegment {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    /// One box per frame in `start..=end`.
    pub boxes: Vec<BoundingBox>,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeline {
    pub query_frame: usize,
    pub config: EngineConfig,
    pub segments: Vec<TimelineSegment>,
}

impl Timeline {
    /// Every `(frame, box)` pair in frame order.
    pub fn frame_boxes(&self) -> impl Iterator<Item = (usize, BoundingBox)> + '_ {
        self.segments
            .iter()
            .flat_map(|s| s.boxes.iter().enumerate().map(move |(i, b)| (s.start + i, *b)))
    }

    pub fn frame_count(&self) -> usize {
        self.segments.iter().map(|s| s.boxes.len()).sum()
    }

    pub fn contains_frame(&self, frame: usize) -> bool {
        self.segments.iter().any(|s| (s.start..=s.end).contains(&frame))
    }

    /// Checks segment shape, ordering and disjointness.
    pub fn validate(&self) -> Result<(), String> {
        for (i, s) in self.segments.iter().enumerate() {
            if s.start > s.end {
                return Err(format!("segment {i}: start {} after end {}", s.start, s.end));
            }
            if s.boxes.len() != s.end - s.start + 1 {
                return Err(format!("segment {i}: {} boxes for {} frames", s.boxes.len(), s.end - s.start + 1));
            }
            if i > 0 && self.segments[i - 1].end >= s.start {
                return Err(format!("segment {i} overlaps or precedes segment {}", i - 1));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let t: Timeline = serde_json::from_str(text).map_err(|e| e.to_string())?;
        t.validate()?;
        Ok(t)
    }
}

/// One step of the engine's control flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    pub frame: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    /// Query localized and profile built; `score` is the mean cosine of
    /// the bootstrap embeddings with the profile.
    Bootstrap {
        #[serde(rename = "box")]
        bbox: BoundingBox,
        score: f64,
    },
    Tracked {
        #[serde(rename = "box")]
        bbox: BoundingBox,
        confidence: f64,
    },
    /// Tracking interrupted. `distance` is absent when the interruption
    /// came from the tracker reporting the target lost.
    DistanceJump {
        #[serde(rename = "box")]
        bbox: BoundingBox,
        distance: Option<f64>,
        confidence: f64,
        lost: bool,
    },
    VerifyPass {
        #[serde(rename = "box")]
        bbox: BoundingBox,
        score: f64,
    },
    VerifyFail {
        #[serde(rename = "box")]
        bbox: BoundingBox,
        score: f64,
    },
    DetectSweep {
        region: Option<BoundingBox>,
        detections: usize,
    },
    Reappear {
        #[serde(rename = "box")]
        bbox: BoundingBox,
        score: f64,
    },
    Skip {
        to: usize,
    },
    EndOfVideo,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Bootstrap { .. } => "Bootstrap",
            EventKind::Tracked { .. } => "Tracked",
            EventKind::DistanceJump { .. } => "DistanceJump",
            EventKind::VerifyPass { .. } => "VerifyPass",
            EventKind::VerifyFail { .. } => "VerifyFail",
            EventKind::DetectSweep { .. } => "DetectSweep",
            EventKind::Reappear { .. } => "Reappear",
            EventKind::Skip { .. } => "Skip",
            EventKind::EndOfVideo => "EndOfVideo",
        }
    }
}

pub fn write_trace<W: Write>(mut w: W, trace: &[EngineEvent]) -> io::Result<()> {
    for ev in trace {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<EngineEvent>, String> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}
