use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::BoundingBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthEntry {
    pub label: String,
    /// Box clamped to the frame bounds.
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub visible: bool,
}

/// Per-frame identity boxes of a scenario. Serializes as
/// `{"frames": {"<idx>": [{"label", "box", "visible"}, ...]}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub frames: BTreeMap<usize, Vec<TruthEntry>>,
}

impl GroundTruth {
    pub fn push(&mut self, frame: usize, entry: TruthEntry) {
        let list = self.frames.entry(frame).or_default();
        debug_assert!(list.iter().all(|e| e.label != entry.label), "duplicate label in frame");
        list.push(entry);
    }

    /// Makes sure frames `0..count` all have an (possibly empty) entry list.
    pub fn ensure_frames(&mut self, count: usize) {
        for i in 0..count {
            self.frames.entry(i).or_default();
        }
    }

    pub fn entries(&self, frame: usize) -> &[TruthEntry] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn visible_box(&self, frame: usize, label: &str) -> Option<BoundingBox> {
        self.entries(frame).iter().find(|e| e.label == label && e.visible).map(|e| e.bbox)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.frames.values().flatten().any(|e| e.label == label)
    }

    /// Frames where `label` is visible, ascending.
    pub fn visible_frames(&self, label: &str) -> Vec<usize> {
        self.frames
            .iter()
            .filter(|(_, es)| es.iter().any(|e| e.label == label && e.visible))
            .map(|(&i, _)| i)
            .collect()
    }
}
