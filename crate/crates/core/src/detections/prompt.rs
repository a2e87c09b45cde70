use std::collections::{BTreeSet, VecDeque};

use super::record::DetectionRecord;

/// Default number of past detection frames remembered for prompt augmentation.
pub const DEFAULT_PROMPT_WINDOW: usize = 5;

/// Labels measured in the most recent detection frames.
///
/// The window counts detection frames, not raw frames. A window of zero
/// disables augmentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptState {
    window: usize,
    recent: VecDeque<BTreeSet<usize>>,
}

impl Default for PromptState {
    fn default() -> Self {
        Self::new(DEFAULT_PROMPT_WINDOW)
    }
}

impl PromptState {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            recent: VecDeque::with_capacity(window),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn clear(&mut self) {
        self.recent.clear();
    }

    /// Union of labels held in the buffer.
    pub fn memory(&self) -> BTreeSet<usize> {
        self.recent.iter().flatten().copied().collect()
    }

    /// `tags` united with the remembered labels.
    pub fn augment(&self, tags: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut q = tags.clone();
        q.extend(self.memory());
        q
    }

    /// Pushes the labels measured in one detection frame.
    pub fn record_labels(&mut self, labels: BTreeSet<usize>) {
        if self.window == 0 {
            return;
        }
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(labels);
    }

    pub fn record_frame(&mut self, detections: &[DetectionRecord]) {
        let labels = detections.iter().flat_map(|d| d.labels()).collect();
        self.record_labels(labels);
    }

    pub fn len(&self) -> usize {
        self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: usize = 2;
    const CHAIR: usize = 1;
    const BED: usize = 0;

    #[test]
    fn empty_buffer_passes_tags_through() {
        let s = PromptState::new(5);
        assert_eq!(s.augment(&BTreeSet::from([TABLE])), BTreeSet::from([TABLE]));
    }

    #[test]
    fn remembered_label_recovers_missing_tag() {
        let mut s = PromptState::new(5);
        s.record_labels(BTreeSet::from([TABLE]));
        let before = s.clone();
        assert_eq!(s.augment(&BTreeSet::from([CHAIR])), BTreeSet::from([CHAIR, TABLE]));
        assert_eq!(s, before);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut s = PromptState::new(5);
        for l in 0..6 {
            s.record_labels(BTreeSet::from([l]));
        }
        assert_eq!(s.len(), 5);
        assert_eq!(s.memory(), (1..6).collect());
    }

    #[test]
    fn first_push() {
        let mut s = PromptState::new(5);
        s.record_labels(BTreeSet::from([BED]));
        assert_eq!(s.memory(), BTreeSet::from([BED]));
    }

    #[test]
    fn frame_without_detections_adds_empty_entry() {
        let mut s = PromptState::new(5);
        s.record_labels(BTreeSet::from([BED]));
        s.record_frame(&[]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.memory(), BTreeSet::from([BED]));
    }

    #[test]
    fn zero_window_disables() {
        let mut s = PromptState::new(0);
        s.record_labels(BTreeSet::from([BED]));
        assert!(s.memory().is_empty());
    }
}
