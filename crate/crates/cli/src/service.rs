//! Local HTTP/JSON service for the viewer.
//!
//! The loaded recording and everything derived from it are immutable and
//! shared; only the event set changes, behind a read-write lock.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use xdfkit::annotations::{
    append_events, export_csv, write_back, AnnotationError, Event, EventSet,
};
use xdfkit::format::{Recording, XmlNode};
use xdfkit::timeline::{auto_scale, envelope_tiles, synced_times, EnvelopeTile, Scale};

use crate::commands::{decoded_events, load};
use crate::summary::{extent, summarize_all, StreamSummary};

pub const DEFAULT_PORT: u16 = 8377;
pub const PORT_ENV: &str = "XDFKIT_PORT";
const MAX_BUCKETS: usize = 100_000;
const DEFAULT_BUCKETS: usize = 1000;

/// Display data of one numeric stream.
struct Lane {
    times: Vec<f64>,
    channels: Vec<Vec<f64>>,
    scales: Vec<Scale>,
}

struct Annotations {
    set: EventSet,
    /// User events already appended to the source file.
    appended: BTreeSet<u64>,
    dirty: bool,
}

pub struct ServiceState {
    path: PathBuf,
    recording: Recording,
    summaries: Vec<StreamSummary>,
    lanes: BTreeMap<u32, Lane>,
    events: RwLock<Annotations>,
}

impl ServiceState {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let (recording, warnings) = load(path)?;
        for w in &warnings {
            log::warn!("{}: {w}", path.display());
        }
        Ok(Self::new(path.to_owned(), recording))
    }

    pub fn new(path: PathBuf, recording: Recording) -> Self {
        let mut lanes = BTreeMap::new();
        for (&id, stream) in &recording.streams {
            if !stream.info.channel_format.is_numeric() {
                continue;
            }
            let times = match synced_times(stream) {
                Ok((series, _)) => series.times,
                Err(e) => {
                    log::warn!("stream {id} has no usable timestamps: {e}");
                    continue;
                }
            };
            let channels: Vec<Vec<f64>> =
                (0..stream.info.channel_count).map(|c| stream.channel_f64(c)).collect();
            let scales = channels.iter().map(|c| auto_scale(c)).collect();
            lanes.insert(id, Lane { times, channels, scales });
        }
        let events = decoded_events(&recording);
        ServiceState {
            summaries: summarize_all(&recording),
            path,
            recording,
            lanes,
            events: RwLock::new(Annotations {
                set: events,
                appended: BTreeSet::new(),
                dirty: false,
            }),
        }
    }

    fn annotations(&self) -> std::sync::RwLockReadGuard<'_, Annotations> {
        self.events.read().unwrap_or_else(|e| e.into_inner())
    }

    fn annotations_mut(&self) -> std::sync::RwLockWriteGuard<'_, Annotations> {
        self.events.write().unwrap_or_else(|e| e.into_inner())
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/recording", get(recording))
        .route("/api/streams/{id}/tiles", get(tiles))
        .route("/api/streams/{id}/meta", get(meta))
        .route("/api/events", get(list_events).post(add_event))
        .route("/api/events/{id}", delete(remove_event))
        .route("/api/save", post(save))
        .with_state(state)
}

pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match e {
            AnnotationError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            AnnotationError::NotFound(_) => StatusCode::NOT_FOUND,
            AnnotationError::Immutable(_) => StatusCode::FORBIDDEN,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Serialize)]
struct RecordingView<'a> {
    path: String,
    streams: &'a [StreamSummary],
    start: Option<f64>,
    end: Option<f64>,
    duration: f64,
    file_header: &'a XmlNode,
    dirty: bool,
}

async fn recording(State(state): State<Arc<ServiceState>>) -> Json<serde_json::Value> {
    let span = extent(&state.summaries);
    let view = RecordingView {
        path: state.path.display().to_string(),
        streams: &state.summaries,
        start: span.map(|s| s.0),
        end: span.map(|s| s.1),
        duration: span.map_or(0.0, |(a, b)| b - a),
        file_header: &state.recording.file_header,
        dirty: state.annotations().dirty,
    };
    Json(serde_json::to_value(view).expect("serializable view"))
}

#[derive(Debug, Deserialize)]
pub struct TileQuery {
    #[serde(default)]
    channel: usize,
    t0: Option<f64>,
    t1: Option<f64>,
    buckets: Option<usize>,
}

/// Envelope tile with the display-scaled extremes next to the raw ones.
#[derive(Debug, Serialize)]
pub struct ScaledTile {
    #[serde(flatten)]
    tile: EnvelopeTile,
    scaled_min: Option<f64>,
    scaled_max: Option<f64>,
}

async fn tiles(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<u32>,
    Query(q): Query<TileQuery>,
) -> ApiResult<Json<Vec<ScaledTile>>> {
    if state.recording.stream(id).is_none() {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("no stream {id}")));
    }
    let lane = state.lanes.get(&id).ok_or_else(|| {
        ApiError(StatusCode::BAD_REQUEST, format!("stream {id} has no numeric samples"))
    })?;
    let values = lane.channels.get(q.channel).ok_or_else(|| {
        ApiError(StatusCode::BAD_REQUEST, format!("stream {id} has no channel {}", q.channel))
    })?;
    let buckets = q.buckets.unwrap_or(DEFAULT_BUCKETS);
    if buckets == 0 || buckets > MAX_BUCKETS {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("buckets must lie in 1..={MAX_BUCKETS}"),
        ));
    }
    let (first, last) = match (lane.times.first(), lane.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 1.0),
    };
    let t0 = q.t0.unwrap_or(first);
    // half-open window: nudge the default end past the last sample
    let t1 = q.t1.unwrap_or_else(|| if last > t0 { last + (last - t0) * 1e-9 } else { t0 + 1.0 });
    let scale = lane.scales[q.channel];
    let tiles = envelope_tiles(values, &lane.times, t0, t1, buckets)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    Ok(Json(
        tiles
            .into_iter()
            .map(|tile| ScaledTile {
                scaled_min: tile.min_value.map(|v| scale.apply(v)),
                scaled_max: tile.max_value.map(|v| scale.apply(v)),
                tile,
            })
            .collect(),
    ))
}

async fn meta(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<u32>,
) -> ApiResult<Json<XmlNode>> {
    state
        .recording
        .stream(id)
        .map(|s| Json(s.info.header_tree.clone()))
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no stream {id}")))
}

#[derive(Serialize)]
struct EventsView<'a> {
    #[serde(flatten)]
    set: &'a EventSet,
    dirty: bool,
}

async fn list_events(State(state): State<Arc<ServiceState>>) -> Json<serde_json::Value> {
    let a = state.annotations();
    Json(serde_json::to_value(EventsView { set: &a.set, dirty: a.dirty }).expect("serializable"))
}

#[derive(Debug, Deserialize)]
pub struct NewEvent {
    onset: f64,
    #[serde(default)]
    duration: f64,
    label: String,
    #[serde(default)]
    stream_id: Option<u32>,
}

async fn add_event(
    State(state): State<Arc<ServiceState>>,
    Json(req): Json<NewEvent>,
) -> ApiResult<(StatusCode, Json<Event>)> {
    let mut a = state.annotations_mut();
    let id = a
        .set
        .add_event_for_stream(req.onset, req.duration, &req.label, req.stream_id)?;
    a.dirty = true;
    let event = a.set.get(id).cloned().expect("just inserted");
    Ok((StatusCode::CREATED, Json(event)))
}

async fn remove_event(
    State(state): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<u64>,
) -> ApiResult<StatusCode> {
    let mut a = state.annotations_mut();
    a.set.remove_event(id)?;
    a.appended.remove(&id);
    let dirty = a.set.user_events().any(|e| !a.appended.contains(&e.id));
    a.dirty = dirty;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SaveMode {
    Append,
    Csv,
}

#[derive(Debug, Deserialize)]
pub struct SaveRequest {
    mode: SaveMode,
    path: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct SaveResult {
    mode: SaveMode,
    path: String,
    events: usize,
    bytes: u64,
}

/// `append` writes not-yet-appended user events to the source file (or to a
/// copy at `path`); `csv` exports every event to `path` (default: the source
/// path with a `.csv` extension).
async fn save(
    State(state): State<Arc<ServiceState>>,
    Json(req): Json<SaveRequest>,
) -> ApiResult<Json<SaveResult>> {
    let mut a = state.annotations_mut();
    let internal = |e: AnnotationError| ApiError::from(e);
    let result = match req.mode {
        SaveMode::Append => {
            let mut pending = EventSet::new();
            let ids: Vec<u64> = a
                .set
                .user_events()
                .filter(|e| !a.appended.contains(&e.id))
                .map(|e| {
                    pending
                        .add_event_for_stream(e.onset, e.duration, &e.label, e.stream_id)
                        .expect("events in the set are valid");
                    e.id
                })
                .collect();
            let (path, bytes) = match &req.path {
                Some(p) if p != &state.path => {
                    let original = std::fs::read(&state.path)
                        .map_err(|e| internal(AnnotationError::Io(e)))?;
                    let updated = append_events(&original, &pending).map_err(internal)?;
                    std::fs::write(p, &updated).map_err(|e| internal(AnnotationError::Io(e)))?;
                    (p.clone(), (updated.len() - original.len()) as u64)
                }
                _ => {
                    let bytes = write_back(&state.path, &pending).map_err(internal)?;
                    a.appended.extend(ids.iter().copied());
                    (state.path.clone(), bytes)
                }
            };
            SaveResult { mode: req.mode, path: path.display().to_string(), events: ids.len(), bytes }
        }
        SaveMode::Csv => {
            let path = req.path.clone().unwrap_or_else(|| state.path.with_extension("csv"));
            let bytes = export_csv(&a.set);
            std::fs::write(&path, &bytes).map_err(|e| internal(AnnotationError::Io(e)))?;
            SaveResult {
                mode: req.mode,
                path: path.display().to_string(),
                events: a.set.len(),
                bytes: bytes.len() as u64,
            }
        }
    };
    a.dirty = false;
    Ok(Json(result))
}
