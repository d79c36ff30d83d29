//! Fixture writers and generators used by tests. Not part of the stable API.

pub mod geotiff;
pub mod random;
pub mod shapefile;
