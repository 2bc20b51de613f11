mod common;

use std::collections::BTreeMap;

use common::{fixture, fixture_bytes};
use xdfkit::annotations::{derive_events, export_csv, write_back, EventSet, Origin};
use xdfkit::format::{parse_bytes, parse_recording, serialize_recording, Recording};
use xdfkit::synthlab::{generate, verify, SynthConfig};
use xdfkit::timeline::{
    effective_rate, synced_times, SyncModel, DEFAULT_DEVIATION_THRESHOLD,
};

fn sync_models(rec: &Recording) -> BTreeMap<u32, SyncModel> {
    rec.streams
        .iter()
        .map(|(&id, s)| (id, synced_times(s).unwrap().1))
        .collect()
}

#[test]
fn marker_fixture_to_csv() {
    let (rec, _) = parse_bytes(&fixture_bytes("markers.xdf")).unwrap();
    let events = derive_events(&rec, &sync_models(&rec));
    // single clock-offset knot of 0.5 s shifts both markers
    let csv = String::from_utf8(export_csv(&events)).unwrap();
    assert_eq!(csv, "onset,duration,label,stream_id\n2,0,trigger,7\n2.75,0,ok,7\n");
}

#[test]
fn write_back_then_reload() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("markers.xdf");
    std::fs::copy(fixture("markers.xdf"), &path).unwrap();
    let original = std::fs::read(&path).unwrap();

    let mut set = EventSet::new();
    set.add_event(0.75, 0.25, "artifact").unwrap();
    let appended = write_back(&path, &set).unwrap();

    let updated = std::fs::read(&path).unwrap();
    assert_eq!(updated.len() as u64, original.len() as u64 + appended);
    assert!(updated.starts_with(&original));
    let (rec, warnings) = parse_recording(std::fs::File::open(&path).unwrap()).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(rec.streams.keys().copied().collect::<Vec<_>>(), vec![7, 8]);

    let events = derive_events(&rec, &sync_models(&rec));
    let added: Vec<_> = events.events().iter().filter(|e| e.stream_id == Some(8)).collect();
    assert_eq!(added.len(), 1);
    assert_eq!((added[0].onset, added[0].duration), (0.75, 0.25));
    assert_eq!(added[0].label, "artifact");
    assert_eq!(added[0].origin, Origin::Decoded);
}

#[test]
fn synthetic_recording_on_disk() {
    let config = SynthConfig {
        duration: 10.0,
        noise_sigma: 0.0,
        clock_offset: 1.5,
        seed: 11,
        ..SynthConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.xdf");
    std::fs::write(&path, serialize_recording(&generate(&config).unwrap())).unwrap();
    let (rec, warnings) = parse_recording(std::fs::File::open(&path).unwrap()).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");

    for stream in rec.streams.values().filter(|s| s.info.is_regular()) {
        let (times, _) = synced_times(stream).unwrap();
        let report = effective_rate(&times, stream.info.nominal_srate, DEFAULT_DEVIATION_THRESHOLD).unwrap();
        assert!((report.effective_srate - 500.0).abs() < 1e-3, "{report:?}");
        assert!(!report.deviates);
    }

    let report = verify(&rec, 0.0, 10.0).unwrap();
    assert!((99..=101).contains(&report.n_events), "{}", report.n_events);
    assert!(report.circular_mean_error.unwrap().abs() < 0.05);

    // triggers land on the recorder clock, shifted by the offset
    let events = derive_events(&rec, &sync_models(&rec));
    let first = events.events()[0].onset;
    let raw_local = rec.stream_by_name("triggers").unwrap().blocks[0].timestamps[0].unwrap();
    assert!((first - raw_local - 1.5).abs() < 1e-9);
}
