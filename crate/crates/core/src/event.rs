//! Event records: the metadata interchange form shared by the codec,
//! simulator, and metrics.

use serde::{Deserialize, Serialize};

use crate::geo::vec_norm;

/// One active (frame, source) record with its class and direction of arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Frame index at the caller's frame resolution (100 ms for metadata).
    pub frame: usize,
    /// Sound class index.
    pub class: usize,
    /// Source identifier, used to tell apart same-class overlaps.
    pub source: usize,
    /// Unit direction-of-arrival vector.
    pub doa: [f64; 3],
}

/// A list of event records for one clip.
pub type EventList = Vec<Event>;

/// Sort events into the canonical (frame, class, source) order.
pub fn sort_events(events: &mut EventList) {
    events.sort_by(|a, b| {
        (a.frame, a.class, a.source)
            .cmp(&(b.frame, b.class, b.source))
            .then_with(|| a.doa.partial_cmp(&b.doa).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Number of frames spanned by the events (max frame index + 1).
pub fn frame_span(events: &EventList) -> usize {
    events.iter().map(|e| e.frame + 1).max().unwrap_or(0)
}

/// Check that every DoA is unit length within `tol` of 1.
pub fn doa_norms_valid(events: &EventList, tol: f64) -> Option<f64> {
    events
        .iter()
        .map(|e| vec_norm(e.doa))
        .find(|n| (n - 1.0).abs() > tol)
}

/// Maximum number of simultaneously active sources at any frame.
pub fn max_polyphony(events: &EventList) -> usize {
    use std::collections::HashMap;
    let mut per_frame: HashMap<usize, usize> = HashMap::new();
    for e in events {
        *per_frame.entry(e.frame).or_insert(0) += 1;
    }
    per_frame.values().copied().max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyphony_counts_per_frame() {
        let ev = |frame, source| Event {
            frame,
            class: 0,
            source,
            doa: [1.0, 0.0, 0.0],
        };
        let events = vec![ev(0, 0), ev(0, 1), ev(1, 0), ev(0, 2)];
        assert_eq!(max_polyphony(&events), 3);
        assert_eq!(frame_span(&events), 2);
        assert_eq!(max_polyphony(&vec![]), 0);
    }
}
