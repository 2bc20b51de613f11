use std::collections::BTreeMap;

use serde::Serialize;

use super::{AnnotationError, Result, DURATION_TAG};
use crate::format::Recording;
use crate::timeline::{apply_sync, resolve_timestamps, SyncModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Decoded,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub id: u64,
    /// Seconds on the recorder clock.
    pub onset: f64,
    pub duration: f64,
    pub label: String,
    pub stream_id: Option<u32>,
    pub origin: Origin,
}

/// Events ordered by `(onset, id)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EventSet {
    events: Vec<Event>,
    next_id: u64,
}

fn validate(onset: f64, duration: f64, label: &str) -> Result<()> {
    if !onset.is_finite() {
        return Err(AnnotationError::Validation(format!("onset {onset} is not finite")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(AnnotationError::Validation(format!(
            "duration {duration} must be finite and non-negative"
        )));
    }
    if label.is_empty() {
        return Err(AnnotationError::Validation("label must not be empty".into()));
    }
    Ok(())
}

impl EventSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn user_events(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.origin == Origin::User)
    }

    fn insert(
        &mut self,
        onset: f64,
        duration: f64,
        label: String,
        stream_id: Option<u32>,
        origin: Origin,
    ) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        // ids grow monotonically, so placing after equal onsets keeps (onset, id) order
        let at = self
            .events
            .partition_point(|e| e.onset.total_cmp(&onset).is_le());
        self.events.insert(
            at,
            Event {
                id,
                onset,
                duration,
                label,
                stream_id,
                origin,
            },
        );
        id
    }

    /// Adds a user annotation and returns its id.
    pub fn add_event(&mut self, onset: f64, duration: f64, label: &str) -> Result<u64> {
        validate(onset, duration, label)?;
        Ok(self.insert(onset, duration, label.to_owned(), None, Origin::User))
    }

    /// Adds a user annotation attributed to a stream.
    pub fn add_event_for_stream(
        &mut self,
        onset: f64,
        duration: f64,
        label: &str,
        stream_id: Option<u32>,
    ) -> Result<u64> {
        validate(onset, duration, label)?;
        Ok(self.insert(onset, duration, label.to_owned(), stream_id, Origin::User))
    }

    /// Removes a user event. Decoded events are part of the recording.
    pub fn remove_event(&mut self, id: u64) -> Result<Event> {
        let at = self
            .events
            .iter()
            .position(|e| e.id == id)
            .ok_or(AnnotationError::NotFound(id))?;
        if self.events[at].origin == Origin::Decoded {
            return Err(AnnotationError::Immutable(id));
        }
        Ok(self.events.remove(at))
    }

    /// Copies every event of `other` in, with fresh ids.
    pub fn extend_from(&mut self, other: &EventSet) {
        for e in &other.events {
            self.insert(e.onset, e.duration, e.label.clone(), e.stream_id, e.origin);
        }
    }
}

/// Splits a `label|duration=<d>` marker back into its parts.
pub(crate) fn split_duration(marker: &str) -> (&str, f64) {
    if let Some(at) = marker.rfind(DURATION_TAG) {
        let (label, rest) = (&marker[..at], &marker[at + DURATION_TAG.len()..]);
        if let Ok(d) = rest.parse::<f64>() {
            if d >= 0.0 && d.is_finite() && !label.is_empty() {
                return (label, d);
            }
        }
    }
    (marker, 0.0)
}

/// One event per sample of every marker stream (irregular rate, string
/// format), stamped on the recorder clock. Streams missing from
/// `sync_models` are taken as already synchronized.
pub fn derive_events(rec: &Recording, sync_models: &BTreeMap<u32, SyncModel>) -> EventSet {
    let mut set = EventSet::new();
    for stream in rec.streams.values().filter(|s| s.info.is_marker()) {
        let id = stream.info.stream_id;
        let raw = match resolve_timestamps(&stream.blocks, &stream.info) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("marker stream {id} skipped: {e}");
                continue;
            }
        };
        let times = match sync_models.get(&id) {
            Some(model) => apply_sync(&raw, model).times,
            None => raw.times,
        };
        for (onset, marker) in times.into_iter().zip(stream.labels()) {
            let (label, duration) = split_duration(marker);
            if label.is_empty() {
                log::warn!("marker stream {id}: empty marker at {onset} skipped");
                continue;
            }
            set.insert(onset, duration, label.to_owned(), Some(id), Origin::Decoded);
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{BlockValues, ChannelFormat, SampleBlock, Stream, StreamInfo};
    use crate::timeline::build_sync_model;

    fn marker_stream(id: u32, markers: &[(f64, &str)]) -> Stream {
        let mut s = Stream::new(StreamInfo::new(id, "m", "Markers", 1, 0.0, ChannelFormat::String));
        s.blocks.push(
            SampleBlock::new(
                id,
                1,
                markers.iter().map(|m| Some(m.0)).collect(),
                BlockValues::String(markers.iter().map(|m| m.1.to_owned()).collect()),
            )
            .unwrap(),
        );
        s
    }

    #[test]
    fn add_to_empty() {
        let mut set = EventSet::new();
        let id = set.add_event(2.0, 0.5, "artifact").unwrap();
        assert_eq!(id, 0);
        assert_eq!(set.len(), 1);
        assert_eq!(set.events()[0].origin, Origin::User);
    }

    #[test]
    fn insertion_keeps_order() {
        let mut set = EventSet::new();
        set.add_event(2.0, 0.0, "b").unwrap();
        set.add_event(1.0, 0.0, "a").unwrap();
        set.add_event(2.0, 0.0, "c").unwrap();
        let labels: Vec<_> = set.events().iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["a", "b", "c"]);
    }

    #[test]
    fn validation() {
        let mut set = EventSet::new();
        assert!(matches!(set.add_event(1.0, -1.0, "x"), Err(AnnotationError::Validation(_))));
        assert!(matches!(set.add_event(1.0, 0.0, ""), Err(AnnotationError::Validation(_))));
        assert!(matches!(set.add_event(f64::NAN, 0.0, "x"), Err(AnnotationError::Validation(_))));
        assert!(set.is_empty());
    }

    #[test]
    fn decoded_events_cannot_be_removed() {
        let mut rec = Recording::new(Recording::default_header());
        rec.streams.insert(4, marker_stream(4, &[(1.5, "trigger")]));
        let mut set = derive_events(&rec, &BTreeMap::new());
        let user = set.add_event(3.0, 0.0, "mine").unwrap();
        assert!(matches!(set.remove_event(0), Err(AnnotationError::Immutable(0))));
        assert_eq!(set.remove_event(user).unwrap().label, "mine");
        assert!(matches!(set.remove_event(user), Err(AnnotationError::NotFound(_))));
    }

    #[test]
    fn derives_single_marker() {
        let mut rec = Recording::new(Recording::default_header());
        rec.streams.insert(4, marker_stream(4, &[(1.5, "trigger")]));
        let set = derive_events(&rec, &BTreeMap::new());
        assert_eq!(
            set.events(),
            [Event {
                id: 0,
                onset: 1.5,
                duration: 0.0,
                label: "trigger".into(),
                stream_id: Some(4),
                origin: Origin::Decoded,
            }]
        );
    }

    #[test]
    fn merges_marker_streams_and_applies_sync() {
        let mut rec = Recording::new(Recording::default_header());
        rec.streams.insert(1, marker_stream(1, &[(1.0, "a"), (3.0, "c")]));
        rec.streams.insert(2, marker_stream(2, &[(2.0, "b|duration=0.25")]));
        let mut numeric = Stream::new(StreamInfo::new(3, "eeg", "EEG", 1, 0.0, ChannelFormat::Float32));
        numeric.blocks.push(SampleBlock::new(3, 1, vec![Some(0.0)], BlockValues::Float32(vec![1.0])).unwrap());
        rec.streams.insert(3, numeric);
        let mut models = BTreeMap::new();
        let rec1 = crate::format::ClockOffsetRecord { stream_id: 2, collection_time: 0.0, offset: 10.0 };
        models.insert(2, build_sync_model(2, &[rec1]));
        let set = derive_events(&rec, &models);
        let got: Vec<_> = set.events().iter().map(|e| (e.onset, e.label.as_str(), e.duration)).collect();
        assert_eq!(got, [(1.0, "a", 0.0), (3.0, "c", 0.0), (12.0, "b", 0.25)]);
    }

    #[test]
    fn no_marker_streams() {
        let rec = Recording::new(Recording::default_header());
        assert!(derive_events(&rec, &BTreeMap::new()).is_empty());
    }

    #[test]
    fn duration_suffix_parsing() {
        assert_eq!(split_duration("x|duration=1.5"), ("x", 1.5));
        assert_eq!(split_duration("x|duration=-1"), ("x|duration=-1", 0.0));
        assert_eq!(split_duration("x|duration=abc"), ("x|duration=abc", 0.0));
        assert_eq!(split_duration("a|duration=1|duration=2"), ("a|duration=1", 2.0));
    }
}
