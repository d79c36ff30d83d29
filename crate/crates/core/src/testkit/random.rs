//! Seeded random fixtures.

use crate::geom::{Coordinate, Feature, FeatureCollection, Geometry, Polygon, Ring, Value};
use crate::projection::EPSG_WGS84;
use crate::raster::{GeoTransform, RasterGrid, SampleFormat};
use rand::Rng;
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Point,
    MultiPoint,
    Line,
    Polygon,
    MultiPolygon,
}

pub const KINDS: [Kind; 5] = [
    Kind::Point,
    Kind::MultiPoint,
    Kind::Line,
    Kind::Polygon,
    Kind::MultiPolygon,
];

fn c(x: f64, y: f64) -> Coordinate {
    Coordinate { x, y }
}

/// A closed star-shaped ring around `(cx, cy)`; clockwise unless `ccw`.
pub fn star_ring(rng: &mut impl Rng, cx: f64, cy: f64, r: f64, ccw: bool) -> Ring {
    let n = rng.gen_range(3..12);
    let mut ring: Ring = (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            let t = if ccw { t } else { -t };
            let rr = r * rng.gen_range(0.8..1.0);
            c(cx + rr * t.cos(), cy + rr * t.sin())
        })
        .collect();
    ring.push(ring[0]);
    ring
}

/// Clockwise shell with up to two counter-clockwise holes inside it.
pub fn polygon_with_holes(rng: &mut impl Rng, cx: f64, cy: f64, r: f64) -> Polygon {
    let mut poly = vec![star_ring(rng, cx, cy, r, false)];
    match rng.gen_range(0..3) {
        1 => poly.push(star_ring(rng, cx, cy, 0.3 * r, true)),
        2 => {
            poly.push(star_ring(rng, cx - 0.4 * r, cy, 0.15 * r, true));
            poly.push(star_ring(rng, cx + 0.4 * r, cy, 0.15 * r, true));
        }
        _ => {}
    }
    poly
}

/// Random walk with at least two vertices.
pub fn random_polyline(rng: &mut impl Rng, len: usize, step: f64) -> Vec<Coordinate> {
    let mut p = c(rng.gen_range(-160.0..-154.0), rng.gen_range(18.0..23.0));
    let mut out = vec![p];
    for _ in 1..len.max(2) {
        p = c(
            p.x + rng.gen_range(-step..step),
            p.y + rng.gen_range(-step..step),
        );
        out.push(p);
    }
    out
}

pub fn random_geometry(rng: &mut impl Rng, kind: Kind) -> Geometry {
    let (cx, cy) = (rng.gen_range(-160.0..-155.0), rng.gen_range(18.5..22.5));
    match kind {
        Kind::Point => Geometry::Point(c(cx, cy)),
        Kind::MultiPoint => Geometry::MultiPoint(
            (0..rng.gen_range(1..6))
                .map(|_| c(cx + rng.gen_range(-0.1..0.1), cy + rng.gen_range(-0.1..0.1)))
                .collect(),
        ),
        Kind::Line => {
            let n = rng.gen_range(2..20);
            Geometry::LineString(random_polyline(rng, n, 0.01))
        }
        Kind::Polygon => Geometry::Polygon(polygon_with_holes(rng, cx, cy, 0.05)),
        Kind::MultiPolygon => Geometry::MultiPolygon(vec![
            polygon_with_holes(rng, cx, cy, 0.05),
            polygon_with_holes(rng, cx + 0.2, cy, 0.05),
        ]),
    }
}

fn random_text(rng: &mut impl Rng) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 -'";
    let n = rng.gen_range(1..16);
    let s: String = (0..n)
        .map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char)
        .collect();
    let s = s.trim().to_string();
    if s.is_empty() {
        "x".into()
    } else {
        s
    }
}

/// `n` features of one kind sharing the schema NAME (text), VALUE (number),
/// FLAG (bool), each cell null with small probability.
pub fn random_collection(rng: &mut impl Rng, kind: Kind, n: usize) -> FeatureCollection {
    let features = (0..n)
        .map(|_| {
            let name = Value::Text(random_text(rng));
            let value = Value::Number((rng.gen_range(-1e6..1e6_f64) * 100.0).round() / 100.0);
            let flag = Value::Bool(rng.gen());
            Feature::new(random_geometry(rng, kind))
                .with_attribute("NAME", maybe(rng, name))
                .with_attribute("VALUE", maybe(rng, value))
                .with_attribute("FLAG", maybe(rng, flag))
        })
        .collect();
    FeatureCollection::new(EPSG_WGS84, features)
}

fn maybe(rng: &mut impl Rng, v: Value) -> Value {
    if rng.gen_bool(0.1) {
        Value::Null
    } else {
        v
    }
}

/// Dense smooth coastline-like polylines with small jitter.
pub fn coastline(
    rng: &mut impl Rng,
    features: usize,
    vertices_per_feature: usize,
) -> FeatureCollection {
    let fs = (0..features)
        .map(|i| {
            let x0 = -160.0 + 0.3 * i as f64;
            let y0 = rng.gen_range(19.0..22.0);
            let phase: f64 = rng.gen_range(0.0..TAU);
            let line = (0..vertices_per_feature)
                .map(|k| {
                    let t = k as f64 / vertices_per_feature as f64;
                    let x = x0 + 0.25 * t;
                    let y = y0
                        + 0.02 * (TAU * 3.0 * t + phase).sin()
                        + 0.005 * (TAU * 17.0 * t).sin()
                        + rng.gen_range(-2e-5..2e-5);
                    c(x, y)
                })
                .collect();
            Feature::new(Geometry::LineString(line)).with_attribute("NAME", format!("coast {i}"))
        })
        .collect();
    FeatureCollection::new(EPSG_WGS84, fs)
}

/// A grid whose values are exactly representable in `format`, with roughly
/// `nodata_fraction` of cells set to the nodata sentinel when one is given.
pub fn random_grid(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    format: SampleFormat,
    nodata: Option<f64>,
    nodata_fraction: f64,
) -> RasterGrid {
    let values = (0..width * height)
        .map(|_| match nodata {
            Some(nd) if rng.gen_bool(nodata_fraction) => nd,
            _ => match format {
                SampleFormat::U8 => rng.gen_range(0..=254) as f64,
                SampleFormat::I8 => rng.gen_range(-127..=127) as f64,
                SampleFormat::U16 => rng.gen_range(0..=65_534) as f64,
                SampleFormat::I16 => rng.gen_range(-32_767..=32_767) as f64,
                SampleFormat::U32 => rng.gen_range(0..=u32::MAX - 1) as f64,
                SampleFormat::I32 => rng.gen_range(-i32::MAX..=i32::MAX) as f64,
                SampleFormat::F32 => rng.gen_range(-1000.0f32..1000.0) as f64,
            },
        })
        .collect();
    RasterGrid {
        width,
        height,
        values,
        nodata,
        geotransform: GeoTransform {
            origin_x: rng.gen_range(-160.0..-155.0),
            origin_y: rng.gen_range(19.0..23.0),
            pixel_size_x: 0.001,
            pixel_size_y: -0.001,
        },
        crs: EPSG_WGS84,
        sample_format: format,
    }
}
