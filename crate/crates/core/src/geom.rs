//! Vector geometry and feature model shared by every pipeline stage.
//!
//! Coordinates are `f64` end to end. Precision reduction only happens through
//! [`crate::simplify::quantize`] or the GeoJSON writer, never on storage.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("empty geometry")]
    Empty,
    #[error("invalid geometry: {0}")]
    Invalid(String),
}

/// A 2D position: lon/lat degrees for EPSG:4326, meters for projected CRSs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub x: f64,
    pub y: f64,
}

impl Coordinate {
    pub const fn new(x: f64, y: f64) -> Self {
        Coordinate { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Coordinate {
    fn from((x, y): (f64, f64)) -> Self {
        Coordinate { x, y }
    }
}

/// A closed ring: first coordinate equals last.
pub type Ring = Vec<Coordinate>;

/// Outer ring followed by zero or more holes.
pub type Polygon = Vec<Ring>;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Coordinate),
    MultiPoint(Vec<Coordinate>),
    LineString(Vec<Coordinate>),
    Polygon(Polygon),
    MultiPolygon(Vec<Polygon>),
}

impl Geometry {
    pub fn kind(&self) -> &'static str {
        match self {
            Geometry::Point(_) => "Point",
            Geometry::MultiPoint(_) => "MultiPoint",
            Geometry::LineString(_) => "LineString",
            Geometry::Polygon(_) => "Polygon",
            Geometry::MultiPolygon(_) => "MultiPolygon",
        }
    }

    /// Iterates over every coordinate, ring closure points included.
    pub fn coords(&self) -> Box<dyn Iterator<Item = &Coordinate> + '_> {
        match self {
            Geometry::Point(c) => Box::new(std::iter::once(c)),
            Geometry::MultiPoint(cs) | Geometry::LineString(cs) => Box::new(cs.iter()),
            Geometry::Polygon(rings) => Box::new(rings.iter().flatten()),
            Geometry::MultiPolygon(polys) => Box::new(polys.iter().flatten().flatten()),
        }
    }

    /// Applies `f` to every coordinate in place.
    pub fn map_coords(&self, mut f: impl FnMut(Coordinate) -> Coordinate) -> Geometry {
        let mut map_seq = |cs: &[Coordinate]| cs.iter().map(|&c| f(c)).collect::<Vec<_>>();
        match self {
            Geometry::Point(c) => Geometry::Point(map_seq(std::slice::from_ref(c))[0]),
            Geometry::MultiPoint(cs) => Geometry::MultiPoint(map_seq(cs)),
            Geometry::LineString(cs) => Geometry::LineString(map_seq(cs)),
            Geometry::Polygon(rings) => {
                Geometry::Polygon(rings.iter().map(|r| map_seq(r)).collect())
            }
            Geometry::MultiPolygon(polys) => Geometry::MultiPolygon(
                polys
                    .iter()
                    .map(|p| p.iter().map(|r| map_seq(r)).collect())
                    .collect(),
            ),
        }
    }

    /// Checks the structural invariants of each geometry kind.
    pub fn validate(&self) -> Result<(), GeomError> {
        if self.coords().any(|c| !c.is_finite()) {
            return Err(GeomError::Invalid("non-finite coordinate".into()));
        }
        match self {
            Geometry::Point(_) => Ok(()),
            Geometry::MultiPoint(cs) if cs.is_empty() => Err(GeomError::Empty),
            Geometry::MultiPoint(_) => Ok(()),
            Geometry::LineString(cs) if cs.len() < 2 => Err(GeomError::Invalid(
                "LineString needs at least 2 coordinates".into(),
            )),
            Geometry::LineString(_) => Ok(()),
            Geometry::Polygon(rings) => validate_polygon(rings),
            Geometry::MultiPolygon(polys) => {
                if polys.is_empty() {
                    return Err(GeomError::Empty);
                }
                polys.iter().try_for_each(|p| validate_polygon(p))
            }
        }
    }
}

fn validate_polygon(rings: &[Ring]) -> Result<(), GeomError> {
    if rings.is_empty() {
        return Err(GeomError::Empty);
    }
    for ring in rings {
        if ring.len() < 4 {
            return Err(GeomError::Invalid(
                "ring needs at least 4 coordinates".into(),
            ));
        }
        if ring.first() != ring.last() {
            return Err(GeomError::Invalid("ring is not closed".into()));
        }
    }
    Ok(())
}

/// Signed shoelace area of a ring (positive for counter-clockwise).
pub fn ring_area(ring: &[Coordinate]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
        / 2.0
}

/// Attribute scalar. Dates are carried as ISO-8601 text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Number(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Text rendering used by search and CSV export. Null renders empty.
    pub fn render(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => format_number(*n),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

/// Shortest round-trip decimal text for a finite number; `-0` prints as `0`.
pub fn format_number(n: f64) -> String {
    if n == 0.0 {
        "0".to_string()
    } else {
        format!("{n}")
    }
}

/// Ordered attribute map; insertion order is the column order.
pub type Attributes = IndexMap<String, Value>;

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub attributes: Attributes,
    pub id: Option<String>,
}

impl Feature {
    pub fn new(geometry: Geometry) -> Self {
        Feature {
            geometry,
            attributes: Attributes::new(),
            id: None,
        }
    }

    pub fn with_attribute(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.attributes.insert(name.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCollection {
    pub crs: u32,
    pub features: Vec<Feature>,
}

impl FeatureCollection {
    pub fn new(crs: u32, features: Vec<Feature>) -> Self {
        FeatureCollection { crs, features }
    }

    pub fn vertex_count(&self) -> usize {
        self.features
            .iter()
            .map(|f| vertex_count(&f.geometry))
            .sum()
    }

    /// Envelope of all features, `None` when the collection is empty.
    pub fn bbox(&self) -> Option<BBox> {
        self.features
            .iter()
            .filter_map(|f| bbox_of(&f.geometry).ok())
            .reduce(|a, b| a.union(&b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    /// Builds a box, rejecting inverted or non-finite bounds.
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GeomError> {
        let b = BBox {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        if ![min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite()) {
            return Err(GeomError::Invalid("non-finite bbox".into()));
        }
        if min_x > max_x || min_y > max_y {
            return Err(GeomError::Invalid("inverted bbox".into()));
        }
        Ok(b)
    }

    pub const WORLD: BBox = BBox {
        min_x: -180.0,
        min_y: -90.0,
        max_x: 180.0,
        max_y: 90.0,
    };

    pub fn contains(&self, c: &Coordinate) -> bool {
        c.x >= self.min_x && c.x <= self.max_x && c.y >= self.min_y && c.y <= self.max_y
    }

    /// Closed-interval intersection test; touching edges count.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn center(&self) -> Coordinate {
        Coordinate::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

impl std::str::FromStr for BBox {
    type Err = GeomError;

    /// Parses `w,s,e,n`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| GeomError::Invalid(format!("malformed bbox '{s}'")))?;
        match parts.as_slice() {
            [w, s, e, n] => BBox::new(*w, *s, *e, *n),
            _ => Err(GeomError::Invalid(format!("malformed bbox '{s}'"))),
        }
    }
}

/// Tight axis-aligned envelope of every coordinate in `geometry`.
pub fn bbox_of(geometry: &Geometry) -> Result<BBox, GeomError> {
    let mut it = geometry.coords();
    let first = it.next().ok_or(GeomError::Empty)?;
    let init = BBox {
        min_x: first.x,
        min_y: first.y,
        max_x: first.x,
        max_y: first.y,
    };
    Ok(it.fold(init, |b, c| BBox {
        min_x: b.min_x.min(c.x),
        min_y: b.min_y.min(c.y),
        max_x: b.max_x.max(c.x),
        max_y: b.max_y.max(c.y),
    }))
}

/// Total coordinates across all parts. Ring closure points are counted.
pub fn vertex_count(geometry: &Geometry) -> usize {
    match geometry {
        Geometry::Point(_) => 1,
        Geometry::MultiPoint(cs) | Geometry::LineString(cs) => cs.len(),
        Geometry::Polygon(rings) => rings.iter().map(Vec::len).sum(),
        Geometry::MultiPolygon(polys) => polys.iter().flatten().map(Vec::len).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64, y: f64) -> Coordinate {
        Coordinate::new(x, y)
    }

    fn square() -> Ring {
        vec![c(0., 0.), c(4., 0.), c(4., 4.), c(0., 0.)]
    }

    #[test]
    fn bbox_examples() {
        assert_eq!(
            bbox_of(&Geometry::Point(c(3., 4.))).unwrap(),
            BBox::new(3., 4., 3., 4.).unwrap()
        );
        assert_eq!(
            bbox_of(&Geometry::LineString(vec![c(0., 0.), c(2., 1.)])).unwrap(),
            BBox::new(0., 0., 2., 1.).unwrap()
        );
        assert_eq!(
            bbox_of(&Geometry::Polygon(vec![square()])).unwrap(),
            BBox::new(0., 0., 4., 4.).unwrap()
        );
    }

    #[test]
    fn bbox_of_empty_errors() {
        let err = bbox_of(&Geometry::MultiPoint(vec![])).unwrap_err();
        assert_eq!(err.to_string(), "empty geometry");
    }

    #[test]
    fn vertex_count_examples() {
        assert_eq!(vertex_count(&Geometry::Point(c(1., 1.))), 1);
        assert_eq!(vertex_count(&Geometry::Polygon(vec![square()])), 4);
        assert_eq!(
            vertex_count(&Geometry::MultiPolygon(vec![
                vec![square()],
                vec![square()]
            ])),
            8
        );
    }

    #[test]
    fn validate_rejects_open_ring_and_short_line() {
        let open = Geometry::Polygon(vec![vec![c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.)]]);
        assert!(open.validate().is_err());
        assert!(Geometry::LineString(vec![c(0., 0.)]).validate().is_err());
        assert!(Geometry::MultiPolygon(vec![]).validate().is_err());
        assert!(Geometry::Polygon(vec![square()]).validate().is_ok());
    }

    #[test]
    fn bbox_parse() {
        let b: BBox = "-161,18,-154,23".parse().unwrap();
        assert_eq!(b, BBox::new(-161., 18., -154., 23.).unwrap());
        assert!("1,2,3".parse::<BBox>().is_err());
        assert!("3,0,1,1".parse::<BBox>().is_err());
        assert!("a,b,c,d".parse::<BBox>().is_err());
    }

    fn arb_seq(min: usize) -> impl Strategy<Value = Vec<Coordinate>> {
        prop::collection::vec((-180.0..180.0f64, -90.0..90.0f64), min..30)
            .prop_map(|v| v.into_iter().map(Coordinate::from).collect())
    }

    fn arb_geometry() -> impl Strategy<Value = Geometry> {
        prop_oneof![
            (-180.0..180.0f64, -90.0..90.0f64).prop_map(|p| Geometry::Point(p.into())),
            arb_seq(1).prop_map(Geometry::MultiPoint),
            arb_seq(2).prop_map(Geometry::LineString),
            prop::collection::vec(arb_seq(3), 1..4).prop_map(|polys| {
                Geometry::MultiPolygon(
                    polys
                        .into_iter()
                        .map(|mut r| {
                            r.push(r[0]);
                            vec![r]
                        })
                        .collect(),
                )
            }),
        ]
    }

    proptest! {
        #[test]
        fn bbox_contains_every_coordinate(g in arb_geometry()) {
            let b = bbox_of(&g).unwrap();
            for c in g.coords() {
                prop_assert!(b.contains(c));
            }
        }

        #[test]
        fn vertex_count_is_additive(parts in prop::collection::vec(arb_seq(3), 1..5)) {
            let polys: Vec<Polygon> = parts
                .into_iter()
                .map(|mut r| { r.push(r[0]); vec![r] })
                .collect();
            let total: usize = polys
                .iter()
                .map(|p| vertex_count(&Geometry::Polygon(p.clone())))
                .sum();
            prop_assert_eq!(vertex_count(&Geometry::MultiPolygon(polys)), total);
        }
    }
}
