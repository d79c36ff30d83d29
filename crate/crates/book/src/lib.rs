//! The guide's chapters, one module each, so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/precision.md")]
pub mod precision {}
#[doc = include_str!("../../../book/src/projections.md")]
pub mod projections {}
#[doc = include_str!("../../../book/src/shapefiles.md")]
pub mod shapefiles {}
#[doc = include_str!("../../../book/src/simplification.md")]
pub mod simplification {}
#[doc = include_str!("../../../book/src/rasters.md")]
pub mod rasters {}
#[doc = include_str!("../../../book/src/tabular.md")]
pub mod tabular {}
#[doc = include_str!("../../../book/src/clustering.md")]
pub mod clustering {}
#[doc = include_str!("../../../book/src/server.md")]
pub mod server {}
#[doc = include_str!("../../../book/src/state.md")]
pub mod state {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
