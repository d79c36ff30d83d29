//! Read-only HTTP API over a processed data directory.
//!
//! Every handler reads from one immutable [`Snapshot`], so identical
//! requests return byte-identical bodies.

pub mod gazetteer;
pub mod snapshot;
pub mod state;
pub mod table;

use axum::extract::{Path, Query, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use geovuln::clustering::clusters_at;
use geovuln::geojson::write_geojson;
use geovuln::geom::{BBox, FeatureCollection};
use geovuln::precision::{PrecisionPolicy, MAX_DECIMALS};
use geovuln::raster::read_window;
use serde_json::json;
use snapshot::{Layer, Snapshot};
use state::Direction;
use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use table::{TableError, TableQuery};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

pub use snapshot::load_data_dir;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_PX: usize = 512;

type Params = Query<HashMap<String, String>>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.to_string(),
        }
    }

    fn not_found(message: impl ToString) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            message: message.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, json_body(&json!({ "error": self.message }))).into_response()
    }
}

impl From<TableError> for ApiError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::UnknownDataset => ApiError::not_found(e),
            _ => ApiError::bad_request(e),
        }
    }
}

type ApiResult = Result<Response, ApiError>;

fn json_body(v: &impl serde::Serialize) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        serde_json::to_vec(v).expect("response serializes"),
    )
        .into_response()
}

fn bbox_param(params: &HashMap<String, String>) -> Result<Option<BBox>, ApiError> {
    params
        .get("bbox")
        .map(|s| {
            s.parse::<BBox>()
                .map_err(|_| ApiError::bad_request("malformed bbox"))
        })
        .transpose()
}

fn number_param<T: std::str::FromStr>(
    params: &HashMap<String, String>,
    name: &str,
) -> Result<Option<T>, ApiError> {
    params
        .get(name)
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| ApiError::bad_request(format!("malformed {name}")))
        })
        .transpose()
}

fn layer<'a>(snap: &'a Snapshot, id: &str) -> Result<&'a Layer, ApiError> {
    snap.layers
        .get(id)
        .ok_or_else(|| ApiError::not_found("layer not found"))
}

async fn catalog(State(snap): State<Arc<Snapshot>>) -> Response {
    json_body(&json!({ "entries": snap.catalog }))
}

/// Features of a vector layer, optionally limited to envelopes meeting `bbox`.
pub fn layer_features(
    snap: &Snapshot,
    id: &str,
    bbox: Option<&BBox>,
) -> Result<FeatureCollection, ApiError> {
    let Layer::Vector(v) = layer(snap, id)? else {
        return Err(ApiError::bad_request("not a vector layer"));
    };
    Ok(match bbox {
        None => v.collection.clone(),
        Some(b) => FeatureCollection::new(
            v.collection.crs,
            v.filter(b)
                .into_iter()
                .map(|i| v.collection.features[i].clone())
                .collect(),
        ),
    })
}

async fn layer_geojson(
    State(snap): State<Arc<Snapshot>>,
    Path(id): Path<String>,
    Query(p): Params,
) -> ApiResult {
    let bbox = bbox_param(&p)?;
    let fc = layer_features(&snap, &id, bbox.as_ref())?;
    let policy = PrecisionPolicy::new(MAX_DECIMALS).expect("15 decimals is in range");
    let bytes = write_geojson(&fc, policy).map_err(ApiError::bad_request)?;
    Ok(([(header::CONTENT_TYPE, "application/geo+json")], bytes).into_response())
}

async fn raster_window(
    State(snap): State<Arc<Snapshot>>,
    Path(id): Path<String>,
    Query(p): Params,
) -> ApiResult {
    let Layer::Raster(pyramid) = layer(&snap, &id)? else {
        return Err(ApiError::bad_request("not a raster layer"));
    };
    let bbox = bbox_param(&p)?.unwrap_or_else(|| pyramid.base().extent());
    let max_px = number_param(&p, "max_px")?.unwrap_or(DEFAULT_MAX_PX);
    let w = read_window(pyramid, &bbox, max_px).map_err(ApiError::bad_request)?;
    Ok(json_body(&json!({
        "width": w.width,
        "height": w.height,
        "bbox": [w.bbox.min_x, w.bbox.min_y, w.bbox.max_x, w.bbox.max_y],
        "nodata": w.nodata,
        "values": w.values,
        "level_used": w.level_used,
    })))
}

async fn clusters(
    State(snap): State<Arc<Snapshot>>,
    Path(id): Path<String>,
    Query(p): Params,
) -> ApiResult {
    let Layer::Vector(v) = layer(&snap, &id)? else {
        return Err(ApiError::bad_request("not a point layer"));
    };
    let Some(index) = &v.clusters else {
        return Err(ApiError::bad_request("not a point layer"));
    };
    let zoom: u8 =
        number_param(&p, "zoom")?.ok_or_else(|| ApiError::bad_request("missing zoom"))?;
    let bbox = bbox_param(&p)?.unwrap_or(BBox::WORLD);
    let nodes = clusters_at(index, zoom, &bbox).map_err(ApiError::bad_request)?;
    let out: Vec<_> = nodes
        .iter()
        .map(|n| match n.point_id() {
            Some(pid) => json!({
                "id": n.id,
                "lon": n.lon,
                "lat": n.lat,
                "count": 1,
                "point_id": pid,
                "properties": v.collection.features[pid as usize].attributes,
            }),
            None => json!({ "id": n.id, "lon": n.lon, "lat": n.lat, "count": n.count }),
        })
        .collect();
    Ok(json_body(&out))
}

fn table_query(dataset: String, p: &HashMap<String, String>) -> Result<TableQuery, ApiError> {
    let mut q = TableQuery::new(&dataset);
    q.sort_column = p.get("sort").filter(|s| !s.is_empty()).cloned();
    q.direction = match p.get("dir").map(String::as_str) {
        None | Some("") | Some("asc") => Direction::Asc,
        Some("desc") => Direction::Desc,
        Some(_) => return Err(ApiError::bad_request("dir must be asc or desc")),
    };
    q.search = p.get("search").cloned();
    q.page = number_param(p, "page")?.unwrap_or(0);
    q.page_size = number_param(p, "page_size")?.unwrap_or(table::DEFAULT_PAGE_SIZE);
    Ok(q)
}

async fn table_page(
    State(snap): State<Arc<Snapshot>>,
    Path(dataset): Path<String>,
    Query(p): Params,
) -> ApiResult {
    let q = table_query(dataset, &p)?;
    Ok(json_body(&table::query_table(&snap.store, &q)?))
}

async fn table_export(
    State(snap): State<Arc<Snapshot>>,
    Path(dataset): Path<String>,
    Query(p): Params,
) -> ApiResult {
    let q = table_query(dataset, &p)?;
    let bytes = table::export_csv(&snap.store, &q)?;
    let disposition = format!(
        "attachment; filename=\"{}.csv\"",
        q.dataset.replace(['"', '/', '\\'], "_")
    );
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        bytes,
    )
        .into_response())
}

async fn search(State(snap): State<Arc<Snapshot>>, Query(p): Params) -> ApiResult {
    let q = p.get("q").map(String::as_str).unwrap_or("");
    let hits = snap
        .gazetteer
        .search(q)
        .ok_or_else(|| ApiError::bad_request("empty query"))?;
    Ok(json_body(&hits))
}

async fn decode_state(Query(p): Params) -> ApiResult {
    let token = p
        .get("token")
        .ok_or_else(|| ApiError::bad_request("missing token"))?;
    let s = state::decode_state(token).map_err(ApiError::bad_request)?;
    Ok(json_body(&s))
}

async fn api_not_found() -> ApiError {
    ApiError::not_found("no such endpoint")
}

/// The API router; static assets are served from `assets` when given.
pub fn router(snapshot: Arc<Snapshot>, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/catalog", get(catalog))
        .route("/api/layers/{id}", get(layer_geojson))
        .route("/api/raster/{id}/window", get(raster_window))
        .route("/api/points/{id}/clusters", get(clusters))
        .route("/api/table/{dataset}", get(table_page))
        .route("/api/table/{dataset}/export", get(table_export))
        .route("/api/search", get(search))
        .route("/api/state/decode", get(decode_state))
        .route("/api/{*rest}", get(api_not_found))
        .with_state(snapshot);
    let app = match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(
        CorsLayer::new()
            .allow_origin(Any)
            .allow_methods([Method::GET, Method::HEAD]),
    )
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub port: u16,
    pub host: [u8; 4],
    pub assets: Option<PathBuf>,
}

/// Loads the data directory and serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let snapshot = Arc::new(load_data_dir(&config.data_dir)?);
    let addr = SocketAddr::from((config.host, config.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "serving {} layers from {} on http://{}",
        snapshot.catalog.len(),
        config.data_dir.display(),
        listener.local_addr()?
    );
    axum::serve(listener, router(snapshot, config.assets)).await?;
    Ok(())
}
