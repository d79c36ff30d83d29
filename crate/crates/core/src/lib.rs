//! Geospatial ETL primitives for community vulnerability mapping.
//!
//! Readers for shapefile triplets, GeoTIFF rasters and census CSV tables,
//! reprojection to geographic coordinates, polyline simplification,
//! deterministic GeoJSON output, raster overview pyramids and point
//! clustering.

pub mod clustering;
pub mod geojson;
pub mod geom;
pub mod precision;
pub mod projection;
pub mod raster;
pub mod shapefile;
pub mod simplify;
pub mod tabular;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use geom::{BBox, Coordinate, Feature, FeatureCollection, Geometry, Value};
