//! Shareable application state carried in URL tokens.
//!
//! A token is the canonical JSON of an [`AppState`] (object keys sorted, no
//! whitespace) encoded as unpadded base64url.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use std::collections::BTreeSet;
use thiserror::Error;

pub const STATE_VERSION: u32 = 1;
pub const MAX_MAPS: usize = 4;
pub const MAX_ZOOM: f64 = 24.0;
const MAX_TOKEN_LEN: usize = 64 * 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("state violates map limit")]
    MapLimit,
    #[error("state violates census layer limit")]
    CensusLimit,
    #[error("state violates raster limit")]
    RasterLimit,
    #[error("state violates viewport bounds")]
    Viewport,
    #[error("malformed state token")]
    Malformed,
    #[error("unsupported state version {0}")]
    Version(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusSelection {
    pub layer_id: String,
    pub metric: String,
    pub palette: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Viewport {
    pub lon: f64,
    pub lat: f64,
    pub zoom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapState {
    pub census_layer: Option<CensusSelection>,
    pub hazard_vectors: BTreeSet<String>,
    pub raster: Option<String>,
    pub points: BTreeSet<String>,
    pub viewport: Viewport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSort {
    pub column: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableState {
    pub dataset: String,
    pub sort: Option<TableSort>,
    pub search: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppState {
    pub version: u32,
    pub maps: Vec<MapState>,
    pub table: Option<TableState>,
}

pub const HAWAII_VIEW: Viewport = Viewport {
    lon: -157.5,
    lat: 20.5,
    zoom: 7.0,
};

impl MapState {
    pub fn empty(viewport: Viewport) -> Self {
        MapState {
            census_layer: None,
            hazard_vectors: BTreeSet::new(),
            raster: None,
            points: BTreeSet::new(),
            viewport,
        }
    }
}

impl Default for AppState {
    /// One empty map over the main Hawaiian islands.
    fn default() -> Self {
        AppState {
            version: STATE_VERSION,
            maps: vec![MapState::empty(HAWAII_VIEW)],
            table: None,
        }
    }
}

impl AppState {
    pub fn validate(&self) -> Result<(), StateError> {
        if self.version != STATE_VERSION {
            return Err(StateError::Version(self.version.into()));
        }
        if self.maps.len() > MAX_MAPS {
            return Err(StateError::MapLimit);
        }
        for m in &self.maps {
            let v = m.viewport;
            let ok = (-180.0..=180.0).contains(&v.lon)
                && (-90.0..=90.0).contains(&v.lat)
                && (0.0..=MAX_ZOOM).contains(&v.zoom);
            if !ok {
                return Err(StateError::Viewport);
            }
        }
        Ok(())
    }
}

/// Rewrites every object with its keys in sorted order.
pub fn canonicalize(v: Json) -> Json {
    match v {
        Json::Object(map) => {
            let mut entries: Vec<(String, Json)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Json::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, canonicalize(v)))
                    .collect(),
            )
        }
        Json::Array(items) => Json::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

pub fn canonical_json(state: &AppState) -> String {
    let v = serde_json::to_value(state).expect("state serializes");
    serde_json::to_string(&canonicalize(v)).expect("json serializes")
}

pub fn encode_state(state: &AppState) -> Result<String, StateError> {
    state.validate()?;
    Ok(URL_SAFE_NO_PAD.encode(canonical_json(state)))
}

pub fn decode_state(token: &str) -> Result<AppState, StateError> {
    if token.len() > MAX_TOKEN_LEN {
        return Err(StateError::Malformed);
    }
    let bytes = URL_SAFE_NO_PAD
        .decode(token.trim())
        .map_err(|_| StateError::Malformed)?;
    let raw: Json = serde_json::from_slice(&bytes).map_err(|_| StateError::Malformed)?;

    // structural invariants are reported before field-level decoding
    let version = raw
        .get("version")
        .and_then(Json::as_u64)
        .ok_or(StateError::Malformed)?;
    if version != STATE_VERSION as u64 {
        return Err(StateError::Version(version));
    }
    if let Some(maps) = raw.get("maps").and_then(Json::as_array) {
        if maps.len() > MAX_MAPS {
            return Err(StateError::MapLimit);
        }
        for m in maps {
            if m.get("census_layer").is_some_and(Json::is_array) {
                return Err(StateError::CensusLimit);
            }
            if m.get("raster").is_some_and(Json::is_array) {
                return Err(StateError::RasterLimit);
            }
        }
    }
    let state: AppState = serde_json::from_value(raw).map_err(|_| StateError::Malformed)?;
    state.validate()?;
    Ok(state)
}
