//! Zoom-dependent point clustering on a Web Mercator pixel grid.
//!
//! Levels are built bottom-up: the finest level holds one node per distinct
//! coordinate, and each coarser level merges nodes of the level below, so a
//! cluster at zoom `z` is always a union of clusters at `z + 1`.

use crate::geom::{BBox, Coordinate};
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_RADIUS_PX: f64 = 40.0;
pub const DEFAULT_MAX_ZOOM: u8 = 16;
/// Zoom is packed into the low 5 bits of a cluster id.
pub const ZOOM_LIMIT: u8 = 31;
const TILE_SIZE: f64 = 256.0;
const MAX_LAT: f64 = 85.0511;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("zoom out of range")]
    ZoomOutOfRange,
    #[error("no such cluster")]
    NoSuchCluster,
    #[error("point {0} outside EPSG:4326 domain")]
    InvalidPoint(u64),
    #[error("invalid cluster parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePoint {
    pub id: u64,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub id: u64,
    pub zoom: u8,
    pub lon: f64,
    pub lat: f64,
    pub count: usize,
    /// Source point ids, in input order.
    pub members: Vec<u64>,
}

impl ClusterNode {
    /// The original point id when this node holds a single point.
    pub fn point_id(&self) -> Option<u64> {
        (self.count == 1).then(|| self.members[0])
    }
}

#[derive(Debug, Clone)]
struct Node {
    lon: f64,
    lat: f64,
    /// Indices into the source point list, ascending.
    members: Vec<usize>,
    /// Indices into the next finer level.
    children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ClusterIndex {
    points: Vec<SourcePoint>,
    levels: Vec<Vec<Node>>,
    radius_px: f64,
    max_zoom: u8,
}

fn encode_id(index: usize, zoom: u8) -> u64 {
    ((index as u64) << 5) | zoom as u64
}

fn decode_id(id: u64) -> (usize, u8) {
    ((id >> 5) as usize, (id & 0x1f) as u8)
}

/// World pixel coordinates at `zoom` for a 256-pixel tile pyramid.
pub fn world_pixel(lon: f64, lat: f64, zoom: u8) -> (f64, f64) {
    let size = TILE_SIZE * 2f64.powi(zoom as i32);
    let phi = lat.clamp(-MAX_LAT, MAX_LAT).to_radians();
    let x = (lon + 180.0) / 360.0 * size;
    let y = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / std::f64::consts::PI) / 2.0 * size;
    (x, y)
}

fn centroid(points: &[SourcePoint], members: &[usize]) -> (f64, f64) {
    let n = members.len() as f64;
    let (sx, sy) = members.iter().fold((0.0, 0.0), |(x, y), &i| {
        (x + points[i].lon, y + points[i].lat)
    });
    (sx / n, sy / n)
}

pub fn build_index(
    points: &[SourcePoint],
    radius_px: f64,
    max_zoom: u8,
) -> Result<ClusterIndex, ClusterError> {
    if !(radius_px.is_finite() && radius_px > 0.0) {
        return Err(ClusterError::InvalidParams("radius must be positive"));
    }
    if max_zoom > ZOOM_LIMIT {
        return Err(ClusterError::InvalidParams("max_zoom exceeds 31"));
    }
    for p in points {
        let ok = p.lon.is_finite()
            && p.lat.is_finite()
            && (-180.0..=180.0).contains(&p.lon)
            && (-90.0..=90.0).contains(&p.lat);
        if !ok {
            return Err(ClusterError::InvalidPoint(p.id));
        }
    }

    // finest level: coincident coordinates share a node
    let mut finest: Vec<Node> = Vec::new();
    let mut by_coord: HashMap<(u64, u64), usize> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let key = ((p.lon + 0.0).to_bits(), (p.lat + 0.0).to_bits());
        match by_coord.get(&key) {
            Some(&n) => finest[n].members.push(i),
            None => {
                by_coord.insert(key, finest.len());
                finest.push(Node {
                    lon: p.lon,
                    lat: p.lat,
                    members: vec![i],
                    children: Vec::new(),
                });
            }
        }
    }

    let mut levels = vec![finest];
    for zoom in (0..max_zoom).rev() {
        let below = levels.last().expect("finest level exists");
        let cells: Vec<(i64, i64)> = below
            .iter()
            .map(|n| {
                let (x, y) = world_pixel(n.lon, n.lat, zoom);
                (
                    (x / radius_px).floor() as i64,
                    (y / radius_px).floor() as i64,
                )
            })
            .collect();
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, c) in cells.iter().enumerate() {
            grid.entry(*c).or_default().push(i);
        }
        let mut taken = vec![false; below.len()];
        let mut level = Vec::new();
        for seed in 0..below.len() {
            if taken[seed] {
                continue;
            }
            let (cx, cy) = cells[seed];
            let mut children = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for &j in grid.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                        if !taken[j] {
                            taken[j] = true;
                            children.push(j);
                        }
                    }
                }
            }
            children.sort_unstable();
            let mut members: Vec<usize> = children
                .iter()
                .flat_map(|&c| below[c].members.iter().copied())
                .collect();
            members.sort_unstable();
            let (lon, lat) = centroid(points, &members);
            level.push(Node {
                lon,
                lat,
                members,
                children,
            });
        }
        levels.push(level);
    }
    levels.reverse();

    Ok(ClusterIndex {
        points: points.to_vec(),
        levels,
        radius_px,
        max_zoom,
    })
}

impl ClusterIndex {
    pub fn max_zoom(&self) -> u8 {
        self.max_zoom
    }

    pub fn radius_px(&self) -> f64 {
        self.radius_px
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn cluster_count(&self, zoom: u8) -> Result<usize, ClusterError> {
        self.level(zoom).map(Vec::len)
    }

    fn level(&self, zoom: u8) -> Result<&Vec<Node>, ClusterError> {
        self.levels
            .get(zoom as usize)
            .ok_or(ClusterError::ZoomOutOfRange)
    }

    fn node(&self, zoom: u8, index: usize) -> ClusterNode {
        let n = &self.levels[zoom as usize][index];
        ClusterNode {
            id: encode_id(index, zoom),
            zoom,
            lon: n.lon,
            lat: n.lat,
            count: n.members.len(),
            members: n.members.iter().map(|&i| self.points[i].id).collect(),
        }
    }
}

/// Nodes at `zoom` whose centroid lies in `bbox`, ordered by id.
pub fn clusters_at(
    index: &ClusterIndex,
    zoom: u8,
    bbox: &BBox,
) -> Result<Vec<ClusterNode>, ClusterError> {
    let level = index.level(zoom)?;
    Ok(level
        .iter()
        .enumerate()
        .filter(|(_, n)| bbox.contains(&Coordinate { x: n.lon, y: n.lat }))
        .map(|(i, _)| index.node(zoom, i))
        .collect())
}

/// Children of a cluster at the first finer zoom where it splits. Singletons
/// return themselves; clusters that never split return their finest node.
pub fn expand_cluster(
    index: &ClusterIndex,
    cluster_id: u64,
) -> Result<Vec<ClusterNode>, ClusterError> {
    let (mut i, mut zoom) = decode_id(cluster_id);
    let node = index
        .levels
        .get(zoom as usize)
        .and_then(|l| l.get(i))
        .ok_or(ClusterError::NoSuchCluster)?;
    if node.members.len() == 1 {
        return Ok(vec![index.node(zoom, i)]);
    }
    while zoom < index.max_zoom {
        let children = &index.levels[zoom as usize][i].children;
        if children.len() > 1 {
            return Ok(children.iter().map(|&c| index.node(zoom + 1, c)).collect());
        }
        i = children[0];
        zoom += 1;
    }
    Ok(vec![index.node(zoom, i)])
}
