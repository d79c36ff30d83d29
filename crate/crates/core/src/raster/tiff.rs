//! Baseline classic-TIFF reader for single-band, strip-organized,
//! uncompressed GeoTIFFs.

use super::{GeoTransform, RasterError, RasterGrid, SampleFormat};
use byteorder::{BigEndian, ByteOrder, LittleEndian};

pub(crate) const TAG_IMAGE_WIDTH: u16 = 256;
pub(crate) const TAG_IMAGE_LENGTH: u16 = 257;
pub(crate) const TAG_BITS_PER_SAMPLE: u16 = 258;
pub(crate) const TAG_COMPRESSION: u16 = 259;
pub(crate) const TAG_STRIP_OFFSETS: u16 = 273;
pub(crate) const TAG_SAMPLES_PER_PIXEL: u16 = 277;
pub(crate) const TAG_ROWS_PER_STRIP: u16 = 278;
pub(crate) const TAG_STRIP_BYTE_COUNTS: u16 = 279;
pub(crate) const TAG_TILE_WIDTH: u16 = 322;
pub(crate) const TAG_SAMPLE_FORMAT: u16 = 339;
pub(crate) const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
pub(crate) const TAG_MODEL_TIEPOINT: u16 = 33922;
pub(crate) const TAG_GEO_KEY_DIRECTORY: u16 = 34735;
pub(crate) const TAG_GDAL_NODATA: u16 = 42113;

const GEO_KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const GEO_KEY_PROJECTED_CS_TYPE: u16 = 3072;

#[derive(Clone, Copy)]
enum Order {
    Little,
    Big,
}

impl Order {
    fn u16(self, b: &[u8]) -> u16 {
        match self {
            Order::Little => LittleEndian::read_u16(b),
            Order::Big => BigEndian::read_u16(b),
        }
    }
    fn u32(self, b: &[u8]) -> u32 {
        match self {
            Order::Little => LittleEndian::read_u32(b),
            Order::Big => BigEndian::read_u32(b),
        }
    }
    fn f32(self, b: &[u8]) -> f32 {
        f32::from_bits(self.u32(b))
    }
    fn f64(self, b: &[u8]) -> f64 {
        match self {
            Order::Little => LittleEndian::read_f64(b),
            Order::Big => BigEndian::read_f64(b),
        }
    }
}

/// A decoded IFD entry with its raw value bytes.
struct Entry<'a> {
    field_type: u16,
    count: usize,
    data: &'a [u8],
}

fn type_size(field_type: u16) -> Option<usize> {
    match field_type {
        1 | 2 | 6 | 7 => Some(1),
        3 | 8 => Some(2),
        4 | 9 | 11 => Some(4),
        5 | 10 | 12 => Some(8),
        _ => None,
    }
}

impl Entry<'_> {
    /// Unsigned integer values (BYTE/SHORT/LONG).
    fn uints(&self, order: Order) -> Result<Vec<u64>, RasterError> {
        let size = type_size(self.field_type).unwrap_or(0);
        let read = |c: &[u8]| -> u64 {
            match self.field_type {
                1 => c[0] as u64,
                3 => order.u16(c) as u64,
                _ => order.u32(c) as u64,
            }
        };
        match self.field_type {
            1 | 3 | 4 => Ok(self
                .data
                .chunks_exact(size)
                .take(self.count)
                .map(read)
                .collect()),
            _ => Err(RasterError::Malformed("expected an integer tag".into())),
        }
    }

    fn uint(&self, order: Order) -> Result<u64, RasterError> {
        self.uints(order)?
            .first()
            .copied()
            .ok_or_else(|| RasterError::Malformed("empty integer tag".into()))
    }

    fn doubles(&self, order: Order) -> Result<Vec<f64>, RasterError> {
        match self.field_type {
            12 => Ok(self
                .data
                .chunks_exact(8)
                .take(self.count)
                .map(|c| order.f64(c))
                .collect()),
            _ => Err(RasterError::Malformed("expected a DOUBLE tag".into())),
        }
    }

    fn ascii(&self) -> String {
        String::from_utf8_lossy(self.data)
            .trim_end_matches('\0')
            .trim()
            .to_string()
    }
}

fn truncated() -> RasterError {
    RasterError::Malformed("unexpected end of file".into())
}

pub fn parse_geotiff(bytes: &[u8]) -> Result<RasterGrid, RasterError> {
    let order = match bytes.get(0..2) {
        Some(b"II") => Order::Little,
        Some(b"MM") => Order::Big,
        _ => return Err(RasterError::NotTiff),
    };
    let magic = order.u16(bytes.get(2..4).ok_or(RasterError::NotTiff)?);
    match magic {
        42 => {}
        43 => return Err(RasterError::BigTiff),
        _ => return Err(RasterError::NotTiff),
    }
    let ifd = order.u32(bytes.get(4..8).ok_or_else(truncated)?) as usize;
    let n = order.u16(bytes.get(ifd..ifd + 2).ok_or_else(truncated)?) as usize;

    let mut entries = std::collections::BTreeMap::new();
    for i in 0..n {
        let off = ifd + 2 + 12 * i;
        let e = bytes.get(off..off + 12).ok_or_else(truncated)?;
        let tag = order.u16(&e[0..2]);
        let field_type = order.u16(&e[2..4]);
        let count = order.u32(&e[4..8]) as usize;
        let Some(size) = type_size(field_type) else {
            continue; // unknown field types are skippable per TIFF 6.0
        };
        let len = size.checked_mul(count).ok_or_else(truncated)?;
        let data = if len <= 4 {
            &e[8..8 + len]
        } else {
            let at = order.u32(&e[8..12]) as usize;
            bytes
                .get(at..at.checked_add(len).ok_or_else(truncated)?)
                .ok_or_else(truncated)?
        };
        entries.insert(
            tag,
            Entry {
                field_type,
                count,
                data,
            },
        );
    }

    let get = |tag: u16, name: &str| {
        entries
            .get(&tag)
            .ok_or_else(|| RasterError::Malformed(format!("missing {name} tag")))
    };

    if entries.contains_key(&TAG_TILE_WIDTH) {
        return Err(RasterError::Unsupported("tiled layout"));
    }
    if let Some(c) = entries.get(&TAG_COMPRESSION) {
        if c.uint(order)? != 1 {
            return Err(RasterError::Compressed);
        }
    }
    if let Some(s) = entries.get(&TAG_SAMPLES_PER_PIXEL) {
        if s.uint(order)? != 1 {
            return Err(RasterError::Unsupported("multi-band imagery"));
        }
    }
    let (Some(scale), Some(tie)) = (
        entries.get(&TAG_MODEL_PIXEL_SCALE),
        entries.get(&TAG_MODEL_TIEPOINT),
    ) else {
        return Err(RasterError::NotGeoTiff);
    };

    let width = get(TAG_IMAGE_WIDTH, "ImageWidth")?.uint(order)? as usize;
    let height = get(TAG_IMAGE_LENGTH, "ImageLength")?.uint(order)? as usize;
    let bits = entries
        .get(&TAG_BITS_PER_SAMPLE)
        .map(|e| e.uint(order))
        .transpose()?
        .unwrap_or(1);
    let format_code = entries
        .get(&TAG_SAMPLE_FORMAT)
        .map(|e| e.uint(order))
        .transpose()?
        .unwrap_or(1);
    let format = SampleFormat::from_tiff(format_code, bits)?;
    if width == 0 || height == 0 {
        return Err(RasterError::Malformed("empty image".into()));
    }
    let rows_per_strip = entries
        .get(&TAG_ROWS_PER_STRIP)
        .map(|e| e.uint(order))
        .transpose()?
        .unwrap_or(height as u64)
        .min(height as u64)
        .max(1) as usize;
    let offsets = get(TAG_STRIP_OFFSETS, "StripOffsets")?.uints(order)?;
    let counts = get(TAG_STRIP_BYTE_COUNTS, "StripByteCounts")?.uints(order)?;

    let sample_bytes = format.byte_width();
    let total = width
        .checked_mul(height)
        .ok_or_else(|| RasterError::Malformed("image too large".into()))?;
    let strips = height.div_ceil(rows_per_strip);
    if offsets.len() != strips || counts.len() != strips {
        return Err(RasterError::Malformed(
            "strip count does not match image size".into(),
        ));
    }
    if total > bytes.len() {
        // every sample needs at least one byte of the file
        return Err(truncated());
    }
    let mut values = Vec::with_capacity(total);
    for (s, (&off, &cnt)) in offsets.iter().zip(&counts).enumerate() {
        let rows = rows_per_strip.min(height - s * rows_per_strip);
        let need = rows * width * sample_bytes;
        if (cnt as usize) < need {
            return Err(RasterError::Malformed("strip shorter than its rows".into()));
        }
        let data = bytes
            .get(off as usize..(off as usize).checked_add(need).ok_or_else(truncated)?)
            .ok_or_else(truncated)?;
        values.extend(
            data.chunks_exact(sample_bytes)
                .map(|c| format.decode(c, order)),
        );
    }

    let scale = scale.doubles(order)?;
    let tie = tie.doubles(order)?;
    if scale.len() < 2 || tie.len() < 6 {
        return Err(RasterError::NotGeoTiff);
    }
    let (sx, sy) = (scale[0], scale[1]);
    if !(sx > 0.0 && sy.is_finite() && sy != 0.0) {
        return Err(RasterError::Malformed("invalid pixel scale".into()));
    }
    let geotransform = GeoTransform {
        origin_x: tie[3] - tie[0] * sx,
        origin_y: tie[4] + tie[1] * sy,
        pixel_size_x: sx,
        pixel_size_y: -sy,
    };

    let nodata = match entries.get(&TAG_GDAL_NODATA) {
        Some(e) => {
            let text = e.ascii();
            Some(text.parse::<f64>().map_err(|_| {
                RasterError::Malformed(format!("GDAL_NODATA '{text}' is not a number"))
            })?)
        }
        None => None,
    };

    let crs = match entries.get(&TAG_GEO_KEY_DIRECTORY) {
        Some(e) => geokey_crs(&e.uints(order)?).unwrap_or(crate::projection::EPSG_WGS84),
        None => crate::projection::EPSG_WGS84,
    };

    let grid = RasterGrid {
        width,
        height,
        values,
        nodata,
        geotransform,
        crs,
        sample_format: format,
    };
    grid.validate()?;
    Ok(grid)
}

/// Reads the projected or geographic CRS code from a GeoKeyDirectory.
fn geokey_crs(keys: &[u64]) -> Option<u32> {
    let n = *keys.get(3)? as usize;
    let mut geographic = None;
    for k in keys.get(4..4 + 4 * n)?.chunks_exact(4) {
        // key id, location (0 = inline), count, value
        if k[1] != 0 {
            continue;
        }
        match k[0] as u16 {
            GEO_KEY_PROJECTED_CS_TYPE => return Some(k[3] as u32),
            GEO_KEY_GEOGRAPHIC_TYPE => geographic = Some(k[3] as u32),
            _ => {}
        }
    }
    geographic
}

impl SampleFormat {
    fn from_tiff(code: u64, bits: u64) -> Result<Self, RasterError> {
        match (code, bits) {
            (1, 8) => Ok(SampleFormat::U8),
            (1, 16) => Ok(SampleFormat::U16),
            (1, 32) => Ok(SampleFormat::U32),
            (2, 8) => Ok(SampleFormat::I8),
            (2, 16) => Ok(SampleFormat::I16),
            (2, 32) => Ok(SampleFormat::I32),
            (3, 32) => Ok(SampleFormat::F32),
            _ => Err(RasterError::Unsupported("sample format")),
        }
    }

    fn decode(self, c: &[u8], order: Order) -> f64 {
        match self {
            SampleFormat::U8 => c[0] as f64,
            SampleFormat::I8 => c[0] as i8 as f64,
            SampleFormat::U16 => order.u16(c) as f64,
            SampleFormat::I16 => order.u16(c) as i16 as f64,
            SampleFormat::U32 => order.u32(c) as f64,
            SampleFormat::I32 => order.u32(c) as i32 as f64,
            SampleFormat::F32 => order.f32(c) as f64,
        }
    }
}
