//! Immutable in-memory view of a processed data directory.
//!
//! ```text
//! <data-dir>/
//!   census/*.geojson         block-group choropleth layers
//!   points/*.geojson         point-of-interest layers
//!   hazards/*.geojson        hazard vector layers
//!   rasters/*.pyramid|*.tif  hazard rasters
//!   vulnerability_store.json optional
//!   manifest.json            optional labels and style hints
//! ```

use crate::gazetteer::{Gazetteer, Place};
use geovuln::clustering::{
    build_index, ClusterIndex, SourcePoint, DEFAULT_MAX_ZOOM, DEFAULT_RADIUS_PX,
};
use geovuln::geojson::read_geojson;
use geovuln::geom::{bbox_of, BBox, FeatureCollection, Geometry, Value};
use geovuln::raster::{
    build_overviews, parse_geotiff, read_pyramid, OverviewMethod, RasterPyramid,
};
use geovuln::tabular::VulnerabilityStore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("duplicate layer id {0}")]
    DuplicateLayer(String),
}

fn data_err(path: &Path, message: impl ToString) -> LoadError {
    LoadError::Data {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    CensusMap,
    Point,
    HazardVector,
    HazardRaster,
}

impl LayerKind {
    pub fn is_vector(self) -> bool {
        self != LayerKind::HazardRaster
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub id: String,
    pub kind: LayerKind,
    pub label: String,
    /// `[west, south, east, north]` in the layer's CRS; absent for empty layers.
    pub bbox: Option<[f64; 4]>,
    pub crs: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Vec<String>>,
    pub style: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct VectorLayer {
    pub collection: FeatureCollection,
    /// Envelope of each feature, aligned with `collection.features`.
    pub envelopes: Vec<BBox>,
    pub clusters: Option<ClusterIndex>,
}

impl VectorLayer {
    /// Indices of features whose envelope intersects `bbox`.
    pub fn filter(&self, bbox: &BBox) -> Vec<usize> {
        self.envelopes
            .iter()
            .enumerate()
            .filter(|(_, e)| e.intersects(bbox))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum Layer {
    Vector(VectorLayer),
    Raster(RasterPyramid),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct LayerManifest {
    pub label: Option<String>,
    pub style: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct Manifest {
    pub layers: BTreeMap<String, LayerManifest>,
    pub cluster_radius_px: f64,
    pub cluster_max_zoom: u8,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            layers: BTreeMap::new(),
            cluster_radius_px: DEFAULT_RADIUS_PX,
            cluster_max_zoom: DEFAULT_MAX_ZOOM,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub catalog: Vec<CatalogEntry>,
    pub layers: BTreeMap<String, Layer>,
    pub store: VulnerabilityStore,
    pub gazetteer: Gazetteer,
}

impl Snapshot {
    pub fn entry(&self, id: &str) -> Option<&CatalogEntry> {
        self.catalog.iter().find(|e| e.id == id)
    }
}

fn numeric_attributes(fc: &FeatureCollection) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for f in &fc.features {
        for (k, v) in &f.attributes {
            if matches!(v, Value::Number(_)) && !out.contains(k) {
                out.push(k.clone());
            }
        }
    }
    out
}

fn place_name(attrs: &geovuln::geom::Attributes, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match attrs.get(*k) {
        Some(Value::Text(s)) if !s.trim().is_empty() => Some(s.clone()),
        _ => None,
    })
}

/// Assembles a snapshot from already-loaded layers.
#[derive(Debug, Default)]
pub struct SnapshotBuilder {
    manifest: Manifest,
    snapshot: Snapshot,
    places: Vec<Place>,
}

impl SnapshotBuilder {
    pub fn new(manifest: Manifest) -> Self {
        SnapshotBuilder {
            manifest,
            ..Default::default()
        }
    }

    fn entry(
        &self,
        id: &str,
        kind: LayerKind,
        bbox: Option<BBox>,
        crs: u32,
        metrics: Option<Vec<String>>,
    ) -> CatalogEntry {
        let m = self.manifest.layers.get(id).cloned().unwrap_or_default();
        CatalogEntry {
            id: id.to_string(),
            kind,
            label: m.label.unwrap_or_else(|| id.to_string()),
            bbox: bbox.map(|b| [b.min_x, b.min_y, b.max_x, b.max_y]),
            crs,
            metrics,
            style: m.style.unwrap_or_else(|| serde_json::json!({})),
        }
    }

    fn insert(&mut self, entry: CatalogEntry, layer: Layer) -> Result<(), LoadError> {
        if self.snapshot.layers.contains_key(&entry.id) {
            return Err(LoadError::DuplicateLayer(entry.id));
        }
        self.snapshot.layers.insert(entry.id.clone(), layer);
        self.snapshot.catalog.push(entry);
        Ok(())
    }

    /// Adds a vector layer; point layers must hold only Point geometries.
    pub fn add_vector(
        &mut self,
        id: &str,
        kind: LayerKind,
        collection: FeatureCollection,
    ) -> Result<(), String> {
        assert!(kind.is_vector(), "raster kind passed to add_vector");
        let envelopes = collection
            .features
            .iter()
            .map(|f| bbox_of(&f.geometry).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let clusters = if kind == LayerKind::Point {
            let points = collection
                .features
                .iter()
                .enumerate()
                .map(|(i, f)| match f.geometry {
                    Geometry::Point(c) => Ok(SourcePoint {
                        id: i as u64,
                        lon: c.x,
                        lat: c.y,
                    }),
                    _ => Err(format!(
                        "point layer feature {i} is a {}",
                        f.geometry.kind()
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(
                build_index(
                    &points,
                    self.manifest.cluster_radius_px,
                    self.manifest.cluster_max_zoom,
                )
                .map_err(|e| e.to_string())?,
            )
        } else {
            None
        };

        if kind != LayerKind::HazardVector {
            let keys: &[&str] = if kind == LayerKind::CensusMap {
                &["NAME", "name", "GEOID"]
            } else {
                &["NAME", "name"]
            };
            for (f, env) in collection.features.iter().zip(&envelopes) {
                if let Some(name) = place_name(&f.attributes, keys) {
                    let c = env.center();
                    self.places.push(Place {
                        name,
                        lon: c.x,
                        lat: c.y,
                    });
                }
            }
        }

        let metrics = (kind == LayerKind::CensusMap).then(|| numeric_attributes(&collection));
        let entry = self.entry(id, kind, collection.bbox(), collection.crs, metrics);
        self.insert(
            entry,
            Layer::Vector(VectorLayer {
                collection,
                envelopes,
                clusters,
            }),
        )
        .map_err(|e| e.to_string())
    }

    pub fn add_raster(&mut self, id: &str, pyramid: RasterPyramid) -> Result<(), String> {
        let base = pyramid.base();
        let entry = self.entry(
            id,
            LayerKind::HazardRaster,
            Some(base.extent()),
            base.crs,
            None,
        );
        self.insert(entry, Layer::Raster(pyramid))
            .map_err(|e| e.to_string())
    }

    pub fn store(&mut self, store: VulnerabilityStore) {
        self.snapshot.store = store;
    }

    pub fn build(mut self) -> Snapshot {
        self.snapshot
            .catalog
            .sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.id.cmp(&b.id)));
        self.snapshot.gazetteer = Gazetteer::new(self.places);
        self.snapshot
    }
}

fn read(path: &Path) -> Result<Vec<u8>, LoadError> {
    std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Files in `dir` with one of `extensions`, sorted by name; empty when `dir` is absent.
fn files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>, LoadError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let entries = std::fs::read_dir(dir).map_err(|source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string()
}

pub fn load_data_dir(dir: &Path) -> Result<Snapshot, LoadError> {
    let manifest_path = dir.join("manifest.json");
    let manifest = if manifest_path.is_file() {
        serde_json::from_slice(&read(&manifest_path)?).map_err(|e| data_err(&manifest_path, e))?
    } else {
        Manifest::default()
    };
    let mut b = SnapshotBuilder::new(manifest);

    for (sub, kind) in [
        ("census", LayerKind::CensusMap),
        ("points", LayerKind::Point),
        ("hazards", LayerKind::HazardVector),
    ] {
        for path in files(&dir.join(sub), &["geojson", "json"])? {
            let fc = read_geojson(&read(&path)?).map_err(|e| data_err(&path, e))?;
            b.add_vector(&stem(&path), kind, fc)
                .map_err(|e| data_err(&path, e))?;
        }
    }
    for path in files(&dir.join("rasters"), &["pyramid", "tif", "tiff"])? {
        let bytes = read(&path)?;
        let pyramid = if path.extension().is_some_and(|e| e == "pyramid") {
            read_pyramid(&bytes).map_err(|e| data_err(&path, e))?
        } else {
            let grid = parse_geotiff(&bytes).map_err(|e| data_err(&path, e))?;
            build_overviews(grid, usize::MAX, OverviewMethod::Average)
        };
        b.add_raster(&stem(&path), pyramid)
            .map_err(|e| data_err(&path, e))?;
    }

    let store_path = dir.join("vulnerability_store.json");
    if store_path.is_file() {
        let store = VulnerabilityStore::from_json(&read(&store_path)?)
            .map_err(|e| data_err(&store_path, e))?;
        b.store(store);
    }
    Ok(b.build())
}
