#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::Value;
use xdfkit::format::{
    BlockValues, ChannelFormat, ClockOffsetRecord, Recording, SampleBlock, Stream, StreamFooter,
    StreamInfo, XmlNode,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture_bytes(name: &str) -> Vec<u8> {
    std::fs::read(fixture(name)).unwrap()
}

pub fn expected(name: &str) -> Value {
    serde_json::from_slice(&fixture_bytes(&format!("{name}.expected.json"))).unwrap()
}

pub fn tree_json(node: &XmlNode) -> Value {
    serde_json::json!({
        "name": node.name,
        "text": node.text,
        "children": node.children.iter().map(tree_json).collect::<Vec<_>>(),
    })
}

/// Compares a parsed recording with the reference decoder's JSON dump.
pub fn assert_matches_reference(rec: &Recording, reference: &Value) {
    assert_eq!(tree_json(&rec.file_header), reference["file_header"]);
    assert_eq!(
        rec.boundary_offsets.len() as u64,
        reference["boundaries"].as_u64().unwrap()
    );
    let streams = reference["streams"].as_object().unwrap();
    assert_eq!(rec.streams.len(), streams.len());
    for (id, want) in streams {
        let stream = &rec.streams[&id.parse::<u32>().unwrap()];
        let info = &stream.info;
        assert_eq!(info.name, want["name"].as_str().unwrap());
        assert_eq!(info.channel_format.as_str(), want["format"].as_str().unwrap());
        assert_eq!(info.channel_count as u64, want["channel_count"].as_u64().unwrap());
        assert_eq!(info.nominal_srate, want["nominal_srate"].as_f64().unwrap());
        let rows = want["rows"].as_array().unwrap();
        assert_eq!(stream.sample_count(), rows.len());
        let mut i = 0;
        for block in &stream.blocks {
            for r in 0..block.len() {
                let row = &rows[i];
                assert_eq!(block.timestamps[r], row["timestamp"].as_f64());
                for (c, v) in row["values"].as_array().unwrap().iter().enumerate() {
                    match v.as_str() {
                        Some(s) => assert_eq!(block.string(r, c), Some(s)),
                        None => assert_eq!(block.numeric(r, c), v.as_f64()),
                    }
                }
                i += 1;
            }
        }
        let offsets: Vec<Vec<f64>> = serde_json::from_value(want["offsets"].clone()).unwrap();
        let got: Vec<Vec<f64>> = stream
            .offsets
            .iter()
            .map(|o| vec![o.collection_time, o.offset])
            .collect();
        assert_eq!(got, offsets);
        match want.get("footer") {
            Some(f) => {
                let footer = info.footer.as_ref().unwrap();
                assert_eq!(footer.first_timestamp, f["first_timestamp"].as_f64().unwrap());
                assert_eq!(footer.last_timestamp, f["last_timestamp"].as_f64().unwrap());
                assert_eq!(footer.sample_count as f64, f["sample_count"].as_f64().unwrap());
            }
            None => assert!(info.footer.is_none()),
        }
    }
}

fn arb_label() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "[A-Za-z0-9<>&\"'äö_-]([A-Za-z0-9<>&\"' äö_-]{0,10}[A-Za-z0-9<>&äö_-])?",
    ]
}

fn arb_format() -> impl Strategy<Value = ChannelFormat> {
    prop::sample::select(ChannelFormat::ALL.to_vec())
}

fn arb_values(format: ChannelFormat, n: usize) -> BoxedStrategy<BlockValues> {
    use prop::collection::vec;
    match format {
        ChannelFormat::Int8 => vec(any::<i8>(), n).prop_map(BlockValues::Int8).boxed(),
        ChannelFormat::Int16 => vec(any::<i16>(), n).prop_map(BlockValues::Int16).boxed(),
        ChannelFormat::Int32 => vec(any::<i32>(), n).prop_map(BlockValues::Int32).boxed(),
        ChannelFormat::Int64 => vec(any::<i64>(), n).prop_map(BlockValues::Int64).boxed(),
        ChannelFormat::Float32 => vec(any::<f32>(), n).prop_map(BlockValues::Float32).boxed(),
        ChannelFormat::Double64 => vec(any::<f64>(), n).prop_map(BlockValues::Double64).boxed(),
        ChannelFormat::String => vec("\\PC{0,12}", n).prop_map(BlockValues::String).boxed(),
    }
}

fn arb_stamp() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (-1e6f64..1e6).prop_map(Some)]
}

fn arb_block(id: u32, format: ChannelFormat, channels: usize) -> impl Strategy<Value = SampleBlock> {
    (0usize..12).prop_flat_map(move |rows| {
        (
            prop::collection::vec(arb_stamp(), rows),
            arb_values(format, rows * channels),
        )
            .prop_map(move |(ts, vals)| SampleBlock::new(id, channels, ts, vals).unwrap())
    })
}

fn arb_stream(id: u32) -> impl Strategy<Value = Stream> {
    (
        arb_label(),
        arb_label(),
        arb_format(),
        1usize..5,
        prop_oneof![Just(0.0), 0.001f64..50_000.0],
    )
        .prop_flat_map(move |(name, ty, format, channels, srate)| {
            let info = StreamInfo::new(id, &name, &ty, channels, srate, format);
            (
                Just(info),
                prop::collection::vec(arb_block(id, format, channels), 0..4),
                prop::collection::vec((-1e5f64..1e5, -10f64..10.0), 0..4),
                prop::option::of((-1e5f64..1e5, 0f64..1e3, 0u64..10_000)),
            )
        })
        .prop_map(move |(mut info, blocks, mut offsets, footer)| {
            offsets.sort_by(|a, b| a.0.total_cmp(&b.0));
            info.footer = footer.map(|(first, span, _)| {
                let count = blocks.iter().map(|b: &SampleBlock| b.len() as u64).sum();
                StreamFooter::new(first, first + span, count)
            });
            Stream {
                info,
                blocks,
                offsets: offsets
                    .into_iter()
                    .map(|(collection_time, offset)| ClockOffsetRecord {
                        stream_id: id,
                        collection_time,
                        offset,
                    })
                    .collect(),
            }
        })
}

/// Recordings with 1-8 streams of mixed formats and stamp patterns.
pub fn arb_recording() -> impl Strategy<Value = Recording> {
    (
        prop::collection::btree_set(1u32..u32::MAX, 1..=8),
        0usize..3,
        arb_label(),
    )
        .prop_flat_map(|(ids, boundaries, version)| {
            let streams: Vec<_> = ids.into_iter().map(arb_stream).collect();
            (streams, Just(boundaries), Just(version))
        })
        .prop_map(|(streams, boundaries, version)| {
            let mut header = Recording::default_header();
            header.set_child_text("version", version);
            let mut rec = Recording::new(header);
            rec.streams = streams
                .into_iter()
                .map(|s| (s.info.stream_id, s))
                .collect::<BTreeMap<_, _>>();
            rec.boundary_offsets = vec![0; boundaries];
            rec
        })
}
