//! ESRI shapefile triplet reader (`.shp` geometry, `.shx` index, `.dbf` attributes).
//!
//! Only the 2D shape types Null (0), Point (1), PolyLine (3), Polygon (5) and
//! MultiPoint (8) are accepted. The `.shx` index is used to cross-check the
//! `.shp` record count; geometry is read sequentially from the `.shp`.

mod dbf;
mod shp;
mod shx;

pub use dbf::{parse_dbf, DbfField, DbfTable, FieldType};
pub use shp::{parse_shp, ShapeRecord, ShapeType};
pub use shx::{parse_shx, ShxIndex};

use crate::geom::{Feature, FeatureCollection};
use thiserror::Error;

pub(crate) const FILE_CODE: i32 = 9994;
pub(crate) const HEADER_LEN: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapefileError {
    #[error("not a shapefile index")]
    NotShapefileIndex,
    #[error("not a shapefile")]
    NotShapefile,
    #[error("unexpected end of file")]
    UnexpectedEof,
    #[error("unsupported shape type {0}")]
    UnsupportedShapeType(i32),
    #[error("corrupt record {record}: {reason}")]
    CorruptRecord { record: i32, reason: String },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("malformed DBF header")]
    MalformedDbfHeader,
    #[error("truncated DBF")]
    TruncatedDbf,
    #[error("unsupported DBF field type '{0}'")]
    UnsupportedFieldType(char),
    #[error("invalid {kind} value '{value}' in field {field}")]
    InvalidDbfValue {
        kind: &'static str,
        field: String,
        value: String,
    },
    #[error("geometry/attribute count mismatch ({geometries} vs {attributes})")]
    CountMismatch {
        geometries: usize,
        attributes: usize,
    },
    #[error("shx lists {shx} records but shp holds {shp}")]
    IndexMismatch { shx: usize, shp: usize },
}

impl From<std::io::Error> for ShapefileError {
    fn from(_: std::io::Error) -> Self {
        ShapefileError::UnexpectedEof
    }
}

/// Pairs geometry record `i` with attribute row `i`.
///
/// Null geometries are dropped; the returned count says how many.
pub fn assemble(
    records: Vec<ShapeRecord>,
    dbf: DbfTable,
    crs: u32,
) -> Result<(FeatureCollection, usize), ShapefileError> {
    if records.len() != dbf.rows.len() {
        return Err(ShapefileError::CountMismatch {
            geometries: records.len(),
            attributes: dbf.rows.len(),
        });
    }
    let mut dropped = 0;
    let features = records
        .into_iter()
        .zip(dbf.rows)
        .filter_map(|(rec, attributes)| match rec.geometry {
            Some(geometry) => Some(Feature {
                geometry,
                attributes,
                id: None,
            }),
            None => {
                dropped += 1;
                None
            }
        })
        .collect();
    Ok((FeatureCollection::new(crs, features), dropped))
}

/// Parses and assembles a full triplet, validating the index against the geometry file.
pub fn read_triplet(
    shp: &[u8],
    shx: Option<&[u8]>,
    dbf: &[u8],
    crs: u32,
) -> Result<(FeatureCollection, usize), ShapefileError> {
    let records = parse_shp(shp)?;
    if let Some(shx) = shx {
        let index = parse_shx(shx)?;
        if index.records.len() != records.len() {
            return Err(ShapefileError::IndexMismatch {
                shx: index.records.len(),
                shp: records.len(),
            });
        }
    }
    assemble(records, parse_dbf(dbf)?, crs)
}
