//! GeoJSON (RFC 7946) encoding with a fixed coordinate precision.
//!
//! Output is deterministic: features keep their order, attribute maps keep
//! their column order, and keys are written as `type`, `properties`,
//! `geometry` (then `id` when present).

use crate::geom::{
    format_number, Attributes, Coordinate, Feature, FeatureCollection, Geometry, Value,
};
use crate::precision::PrecisionPolicy;
use crate::projection::EPSG_WGS84;
use crate::simplify::quantize;
use serde_json::Value as Json;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoJsonError {
    #[error("GeoJSON requires EPSG:4326")]
    WrongCrs,
    #[error("parse error at byte {0}")]
    Parse(usize),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid GeoJSON: {0}")]
    Invalid(String),
}

fn push_coord(out: &mut String, c: &Coordinate) {
    let _ = write!(out, "[{},{}]", format_number(c.x), format_number(c.y));
}

fn push_seq(out: &mut String, cs: &[Coordinate]) {
    out.push('[');
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_coord(out, c);
    }
    out.push(']');
}

fn push_rings(out: &mut String, rings: &[Vec<Coordinate>]) {
    out.push('[');
    for (i, r) in rings.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_seq(out, r);
    }
    out.push(']');
}

fn push_geometry(out: &mut String, g: &Geometry) {
    let _ = write!(out, "{{\"type\":\"{}\",\"coordinates\":", g.kind());
    match g {
        Geometry::Point(c) => push_coord(out, c),
        Geometry::MultiPoint(cs) | Geometry::LineString(cs) => push_seq(out, cs),
        Geometry::Polygon(rings) => push_rings(out, rings),
        Geometry::MultiPolygon(polys) => {
            out.push('[');
            for (i, p) in polys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                push_rings(out, p);
            }
            out.push(']');
        }
    }
    out.push('}');
}

fn push_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) if n.is_finite() => out.push_str(&format_number(*n)),
        Value::Number(_) => out.push_str("null"),
        Value::Text(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
    }
}

fn push_properties(out: &mut String, attrs: &Attributes) {
    out.push('{');
    for (i, (k, v)) in attrs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(k).expect("string encodes"));
        out.push(':');
        push_value(out, v);
    }
    out.push('}');
}

/// Encodes one feature after quantizing its geometry.
pub fn write_feature(f: &Feature, policy: PrecisionPolicy) -> String {
    let mut out = String::new();
    let g = quantize(&f.geometry, policy.decimals())
        .expect("policy decimals are in range")
        .geometry;
    out.push_str("{\"type\":\"Feature\",\"properties\":");
    push_properties(&mut out, &f.attributes);
    out.push_str(",\"geometry\":");
    push_geometry(&mut out, &g);
    if let Some(id) = &f.id {
        out.push_str(",\"id\":");
        out.push_str(&serde_json::to_string(id).expect("string encodes"));
    }
    out.push('}');
    out
}

pub fn write_geojson(
    fc: &FeatureCollection,
    policy: PrecisionPolicy,
) -> Result<Vec<u8>, GeoJsonError> {
    if fc.crs != EPSG_WGS84 {
        return Err(GeoJsonError::WrongCrs);
    }
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, f) in fc.features.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&write_feature(f, policy));
    }
    out.push_str("]}");
    Ok(out.into_bytes())
}

/// Byte offset of a serde_json error position (1-based line/column).
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start: usize = bytes
        .split(|&b| b == b'\n')
        .take(line.saturating_sub(1))
        .map(|l| l.len() + 1)
        .sum();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

pub fn read_geojson(bytes: &[u8]) -> Result<FeatureCollection, GeoJsonError> {
    let root: Json = serde_json::from_slice(bytes)
        .map_err(|e| GeoJsonError::Parse(byte_offset(bytes, e.line(), e.column())))?;
    let ty = root.get("type").and_then(Json::as_str).unwrap_or_default();
    let features = match ty {
        "FeatureCollection" => root
            .get("features")
            .and_then(Json::as_array)
            .ok_or_else(|| GeoJsonError::Invalid("features must be an array".into()))?
            .iter()
            .map(parse_feature)
            .collect::<Result<Vec<_>, _>>()?,
        "Feature" => vec![parse_feature(&root)?],
        _ => vec![Feature::new(parse_geometry(&root)?)],
    };
    Ok(FeatureCollection::new(EPSG_WGS84, features))
}

fn parse_feature(v: &Json) -> Result<Feature, GeoJsonError> {
    if v.get("type").and_then(Json::as_str) != Some("Feature") {
        return Err(GeoJsonError::Invalid("expected a Feature".into()));
    }
    let geometry = match v.get("geometry") {
        Some(g) if !g.is_null() => parse_geometry(g)?,
        _ => return Err(GeoJsonError::Invalid("feature without geometry".into())),
    };
    let attributes = match v.get("properties") {
        None | Some(Json::Null) => Attributes::new(),
        Some(Json::Object(map)) => map
            .iter()
            .map(|(k, v)| (k.clone(), json_to_value(v)))
            .collect(),
        Some(_) => return Err(GeoJsonError::Invalid("properties must be an object".into())),
    };
    let id = match v.get("id") {
        None | Some(Json::Null) => None,
        Some(Json::String(s)) => Some(s.clone()),
        Some(Json::Number(n)) => Some(n.to_string()),
        Some(_) => {
            return Err(GeoJsonError::Invalid(
                "id must be a string or number".into(),
            ))
        }
    };
    Ok(Feature {
        geometry,
        attributes,
        id,
    })
}

fn json_to_value(v: &Json) -> Value {
    match v {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => n.as_f64().map(Value::Number).unwrap_or(Value::Null),
        Json::String(s) => Value::Text(s.clone()),
        nested => Value::Text(nested.to_string()),
    }
}

fn invalid(msg: &str) -> GeoJsonError {
    GeoJsonError::Invalid(msg.to_string())
}

fn parse_position(v: &Json) -> Result<Coordinate, GeoJsonError> {
    let arr = v
        .as_array()
        .ok_or_else(|| invalid("position must be an array"))?;
    match arr.as_slice() {
        [x, y, ..] => Ok(Coordinate::new(
            x.as_f64()
                .ok_or_else(|| invalid("position must hold numbers"))?,
            y.as_f64()
                .ok_or_else(|| invalid("position must hold numbers"))?,
        )),
        _ => Err(invalid("position needs two numbers")),
    }
}

fn parse_seq(v: &Json) -> Result<Vec<Coordinate>, GeoJsonError> {
    v.as_array()
        .ok_or_else(|| invalid("expected an array of positions"))?
        .iter()
        .map(parse_position)
        .collect()
}

fn parse_rings(v: &Json) -> Result<Vec<Vec<Coordinate>>, GeoJsonError> {
    v.as_array()
        .ok_or_else(|| invalid("expected an array of rings"))?
        .iter()
        .map(parse_seq)
        .collect()
}

fn parse_geometry(v: &Json) -> Result<Geometry, GeoJsonError> {
    let ty = v.get("type").and_then(Json::as_str).unwrap_or("<missing>");
    let coords = || {
        v.get("coordinates")
            .ok_or_else(|| invalid("missing coordinates"))
    };
    let g = match ty {
        "Point" => Geometry::Point(parse_position(coords()?)?),
        "MultiPoint" => Geometry::MultiPoint(parse_seq(coords()?)?),
        "LineString" => Geometry::LineString(parse_seq(coords()?)?),
        "Polygon" => Geometry::Polygon(parse_rings(coords()?)?),
        "MultiPolygon" => Geometry::MultiPolygon(
            coords()?
                .as_array()
                .ok_or_else(|| invalid("expected an array of polygons"))?
                .iter()
                .map(parse_rings)
                .collect::<Result<_, _>>()?,
        ),
        other => return Err(GeoJsonError::UnsupportedGeometry(other.to_string())),
    };
    g.validate()
        .map_err(|e| GeoJsonError::Invalid(e.to_string()))?;
    Ok(g)
}
