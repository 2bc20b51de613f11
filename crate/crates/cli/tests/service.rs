use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use xdfkit::format::{
    parse_bytes, serialize_recording, BlockValues, ChannelFormat, Recording, SampleBlock, Stream,
    StreamInfo,
};
use xdfkit::timeline::envelope_tiles;
use xdfkit_cli::service::{router, ServiceState};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// Values [0, 1, 2, 3] at 1 Hz from t = 0 plus the marker fixture's stream.
fn ramp_recording() -> Recording {
    let (mut rec, _) = parse_bytes(&std::fs::read(fixture("markers.xdf")).unwrap()).unwrap();
    let mut stream = Stream::new(StreamInfo::new(1, "ramp", "EEG", 1, 1.0, ChannelFormat::Double64));
    stream.blocks.push(
        SampleBlock::new(1, 1, vec![Some(0.0), None, None, None], BlockValues::Double64(vec![0.0, 1.0, 2.0, 3.0]))
            .unwrap(),
    );
    rec.streams.insert(1, stream);
    rec
}

/// State backed by a copy of the ramp recording on disk.
fn state(dir: &Path) -> (Arc<ServiceState>, PathBuf) {
    let path = dir.join("ramp.xdf");
    std::fs::write(&path, serialize_recording(&ramp_recording())).unwrap();
    (Arc::new(ServiceState::load(&path).unwrap()), path)
}

async fn call(state: &Arc<ServiceState>, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = router(state.clone()).oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

#[tokio::test]
async fn recording_overview() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = state(dir.path());
    let (status, body) = call(&state, Method::GET, "/api/recording", None).await;
    assert_eq!(status, StatusCode::OK);
    let streams = body["streams"].as_array().unwrap();
    assert_eq!(streams.len(), 2);
    assert_eq!(streams[0]["name"], "ramp");
    assert_eq!(streams[0]["rate"]["effective_srate"], 1.0);
    assert_eq!(streams[1]["is_marker"], true);
    assert_eq!(body["file_header"]["children"][0]["name"], "version");
    assert_eq!(body["start"], 0.0);
    assert_eq!(body["end"], 3.0);
    assert_eq!(body["dirty"], false);
}

#[tokio::test]
async fn tiles_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = state(dir.path());
    let (status, body) = call(&state, Method::GET, "/api/streams/1/tiles?channel=0&t0=0&t1=4&buckets=2", None).await;
    assert_eq!(status, StatusCode::OK);
    let want = envelope_tiles(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 3.0], 0.0, 4.0, 2).unwrap();
    let tiles = body.as_array().unwrap();
    assert_eq!(tiles.len(), 2);
    for (got, want) in tiles.iter().zip(&want) {
        assert_eq!(got["min_value"].as_f64(), want.min_value);
        assert_eq!(got["max_value"].as_f64(), want.max_value);
        assert_eq!(got["sample_count"].as_u64(), Some(want.sample_count as u64));
        assert_eq!(got["t_start"].as_f64(), Some(want.t_start));
        assert_eq!(got["t_end"].as_f64(), Some(want.t_end));
    }
    assert_eq!((tiles[0]["min_value"].as_f64(), tiles[0]["max_value"].as_f64()), (Some(0.0), Some(1.0)));
    assert_eq!((tiles[1]["min_value"].as_f64(), tiles[1]["max_value"].as_f64()), (Some(2.0), Some(3.0)));
    // scaled extremes map the 2nd-98th percentile range onto [-1, 1]
    let lo = tiles[0]["scaled_min"].as_f64().unwrap();
    let hi = tiles[1]["scaled_max"].as_f64().unwrap();
    assert!(lo < -0.9 && hi > 0.9, "{lo} {hi}");

    let (status, body) = call(&state, Method::GET, "/api/streams/1/tiles?t0=10&t1=12&buckets=3", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.as_array().unwrap().iter().all(|t| t["sample_count"] == 0 && t["min_value"].is_null()));

    // whole stream by default
    let (_, body) = call(&state, Method::GET, "/api/streams/1/tiles?buckets=1", None).await;
    assert_eq!(body[0]["sample_count"], 4);
}

#[tokio::test]
async fn tile_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = state(dir.path());
    let get = |uri: &'static str| {
        let state = state.clone();
        async move { call(&state, Method::GET, uri, None).await.0 }
    };
    assert_eq!(get("/api/streams/99/tiles").await, StatusCode::NOT_FOUND);
    assert_eq!(get("/api/streams/1/tiles?t0=abc").await, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/streams/1/tiles?t0=2&t1=1").await, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/streams/1/tiles?buckets=0").await, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/streams/1/tiles?channel=5").await, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/streams/7/tiles").await, StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/streams/x/tiles").await, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn metadata_tree() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = state(dir.path());
    let (status, body) = call(&state, Method::GET, "/api/streams/1/meta", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["name"], "info");
    let names: Vec<_> = body["children"].as_array().unwrap().iter().map(|c| c["name"].clone()).collect();
    assert_eq!(names, ["name", "type", "channel_count", "nominal_srate", "channel_format"]);
    assert_eq!(body["children"][0]["text"], "ramp");
    let (status, _) = call(&state, Method::GET, "/api/streams/42/meta", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn event_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let (state, _) = state(dir.path());
    let (_, body) = call(&state, Method::GET, "/api/events", None).await;
    let decoded = body["events"].as_array().unwrap().clone();
    assert_eq!(decoded.len(), 2);
    assert!(decoded.iter().all(|e| e["origin"] == "decoded"));

    let (status, created) = call(&state, Method::POST, "/api/events", Some(json!({"onset": 1.0, "duration": 0.5, "label": "artifact"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(created["origin"], "user");
    let (_, body) = call(&state, Method::GET, "/api/events", None).await;
    assert_eq!(body["dirty"], true);
    let events = body["events"].as_array().unwrap();
    assert_eq!(events.len(), 3);
    assert_eq!(events[0], created);

    let (status, _) = call(&state, Method::POST, "/api/events", Some(json!({"onset": 1.0, "label": ""}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&state, Method::POST, "/api/events", Some(json!({"onset": 1.0, "duration": -1, "label": "x"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let decoded_id = decoded[0]["id"].as_u64().unwrap();
    let (status, _) = call(&state, Method::DELETE, &format!("/api/events/{decoded_id}"), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call(&state, Method::DELETE, "/api/events/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let id = created["id"].as_u64().unwrap();
    let (status, body) = call(&state, Method::DELETE, &format!("/api/events/{id}"), None).await;
    assert_eq!((status, body), (StatusCode::NO_CONTENT, Value::Null));
    let (_, body) = call(&state, Method::GET, "/api/events", None).await;
    assert_eq!(body["events"].as_array().unwrap().len(), 2);
    assert_eq!(body["dirty"], false);
}

#[tokio::test]
async fn save_append_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (state, path) = state(dir.path());
    let original = std::fs::read(&path).unwrap();
    call(&state, Method::POST, "/api/events", Some(json!({"onset": 0.5, "label": "blink"}))).await;

    let (status, body) = call(&state, Method::POST, "/api/save", Some(json!({"mode": "append"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["events"], 1);
    let updated = std::fs::read(&path).unwrap();
    assert!(updated.starts_with(&original));
    assert_eq!(updated.len() - original.len(), body["bytes"].as_u64().unwrap() as usize);
    let (rec, warnings) = parse_bytes(&updated).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(rec.stream(8).unwrap().info.name, "sigviewer-annotations");

    // nothing new to append
    let (_, body) = call(&state, Method::POST, "/api/save", Some(json!({"mode": "append"}))).await;
    assert_eq!((body["events"].as_u64(), body["bytes"].as_u64()), (Some(0), Some(0)));
    assert_eq!(std::fs::read(&path).unwrap(), updated);

    let csv = dir.path().join("out.csv");
    let (status, _) = call(&state, Method::POST, "/api/save", Some(json!({"mode": "csv", "path": csv}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        "onset,duration,label,stream_id\n0.5,0,blink,\n2,0,trigger,7\n2.75,0,ok,7\n"
    );
    let (_, body) = call(&state, Method::GET, "/api/recording", None).await;
    assert_eq!(body["dirty"], false);

    let (status, _) = call(&state, Method::POST, "/api/save", Some(json!({"mode": "zip"}))).await;
    assert!(status.is_client_error());
}
