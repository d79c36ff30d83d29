//! Single-band rasters, overview pyramids and scale-aware window reads.

mod tiff;

pub use tiff::parse_geotiff;

use crate::geom::BBox;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("not a TIFF")]
    NotTiff,
    #[error("BigTIFF unsupported")]
    BigTiff,
    #[error("compression unsupported")]
    Compressed,
    #[error("not a GeoTIFF")]
    NotGeoTiff,
    #[error("{0} unsupported")]
    Unsupported(&'static str),
    #[error("malformed TIFF: {0}")]
    Malformed(String),
    #[error("invalid raster: {0}")]
    Invalid(String),
    #[error("window outside raster extent")]
    WindowOutside,
    #[error("window does not fit in {0} px even at the coarsest level")]
    WindowTooLarge(usize),
    #[error("requested resolution must be positive")]
    BadResolution,
    #[error("not a pyramid file")]
    NotPyramid,
    #[error("pyramid file truncated")]
    PyramidTruncated,
}

/// Storage type of the source samples. Values are always held as `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    U8,
    U16,
    U32,
    I8,
    I16,
    I32,
    F32,
}

impl SampleFormat {
    pub fn byte_width(self) -> usize {
        match self {
            SampleFormat::U8 | SampleFormat::I8 => 1,
            SampleFormat::U16 | SampleFormat::I16 => 2,
            SampleFormat::U32 | SampleFormat::I32 | SampleFormat::F32 => 4,
        }
    }

    fn code(self) -> u8 {
        match self {
            SampleFormat::U8 => 0,
            SampleFormat::U16 => 1,
            SampleFormat::U32 => 2,
            SampleFormat::I8 => 3,
            SampleFormat::I16 => 4,
            SampleFormat::I32 => 5,
            SampleFormat::F32 => 6,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        use SampleFormat::*;
        [U8, U16, U32, I8, I16, I32, F32].get(c as usize).copied()
    }
}

/// North-up affine georeferencing: origin is the outer corner of pixel (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    /// Negative for north-up rasters.
    pub pixel_size_y: f64,
}

impl GeoTransform {
    fn scaled(&self, factor: f64) -> GeoTransform {
        GeoTransform {
            pixel_size_x: self.pixel_size_x * factor,
            pixel_size_y: self.pixel_size_y * factor,
            ..*self
        }
    }

    /// Y range covered by rows `r0..r1`.
    fn row_span(&self, r0: usize, r1: usize) -> (f64, f64) {
        let a = self.origin_y + r0 as f64 * self.pixel_size_y;
        let b = self.origin_y + r1 as f64 * self.pixel_size_y;
        (a.min(b), a.max(b))
    }

    fn col_span(&self, c0: usize, c1: usize) -> (f64, f64) {
        (
            self.origin_x + c0 as f64 * self.pixel_size_x,
            self.origin_x + c1 as f64 * self.pixel_size_x,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major samples, `width * height` long.
    pub values: Vec<f64>,
    pub nodata: Option<f64>,
    pub geotransform: GeoTransform,
    pub crs: u32,
    pub sample_format: SampleFormat,
}

impl RasterGrid {
    pub fn validate(&self) -> Result<(), RasterError> {
        if self.width == 0 || self.height == 0 {
            return Err(RasterError::Invalid("empty grid".into()));
        }
        if self.values.len() != self.width * self.height {
            return Err(RasterError::Invalid(format!(
                "{} values for a {}x{} grid",
                self.values.len(),
                self.width,
                self.height
            )));
        }
        let gt = &self.geotransform;
        if !(gt.pixel_size_x > 0.0 && gt.pixel_size_x.is_finite()) {
            return Err(RasterError::Invalid("pixel_size_x must be positive".into()));
        }
        if !(gt.pixel_size_y.is_finite() && gt.pixel_size_y != 0.0) {
            return Err(RasterError::Invalid("pixel_size_y must be nonzero".into()));
        }
        Ok(())
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        match self.nodata {
            Some(nd) if nd.is_nan() => v.is_nan(),
            Some(nd) => v == nd,
            None => false,
        }
    }

    pub fn extent(&self) -> BBox {
        let gt = &self.geotransform;
        let (min_x, max_x) = gt.col_span(0, self.width);
        let (min_y, max_y) = gt.row_span(0, self.height);
        BBox {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Pixels per CRS unit along x.
    pub fn resolution(&self) -> f64 {
        1.0 / self.geotransform.pixel_size_x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverviewMethod {
    Average,
    Nearest,
}

impl std::str::FromStr for OverviewMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "average" => Ok(OverviewMethod::Average),
            "nearest" => Ok(OverviewMethod::Nearest),
            other => Err(format!("unknown overview method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterPyramid {
    /// Level 0 is the source grid; level k is derived from level k−1.
    pub levels: Vec<RasterGrid>,
    pub method: OverviewMethod,
}

fn downsample(src: &RasterGrid, method: OverviewMethod) -> RasterGrid {
    let width = src.width.div_ceil(2);
    let height = src.height.div_ceil(2);
    let nodata_out = src.nodata.unwrap_or(f64::NAN);
    let mut values = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let v = match method {
                OverviewMethod::Nearest => src.get(2 * i, 2 * j),
                OverviewMethod::Average => {
                    let (mut sum, mut n) = (0.0, 0usize);
                    for r in 2 * j..(2 * j + 2).min(src.height) {
                        for c in 2 * i..(2 * i + 2).min(src.width) {
                            let v = src.get(c, r);
                            if !src.is_nodata(v) {
                                sum += v;
                                n += 1;
                            }
                        }
                    }
                    if n == 0 {
                        nodata_out
                    } else {
                        sum / n as f64
                    }
                }
            };
            values.push(v);
        }
    }
    RasterGrid {
        width,
        height,
        values,
        nodata: src.nodata,
        geotransform: src.geotransform.scaled(2.0),
        crs: src.crs,
        sample_format: src.sample_format,
    }
}

/// Builds up to `max_levels` overviews, stopping early once a level is 1×1.
pub fn build_overviews(
    grid: RasterGrid,
    max_levels: usize,
    method: OverviewMethod,
) -> RasterPyramid {
    let mut levels = vec![grid];
    for _ in 0..max_levels {
        let prev = levels.last().unwrap();
        if prev.width == 1 && prev.height == 1 {
            break;
        }
        let next = downsample(prev, method);
        levels.push(next);
    }
    RasterPyramid { levels, method }
}

impl RasterPyramid {
    pub fn base(&self) -> &RasterGrid {
        &self.levels[0]
    }
}

/// Coarsest level whose resolution still meets `requested` pixels per CRS
/// unit; level 0 when even the native resolution falls short.
pub fn select_level(pyramid: &RasterPyramid, requested: f64) -> Result<usize, RasterError> {
    if requested.is_nan() || requested <= 0.0 {
        return Err(RasterError::BadResolution);
    }
    let threshold = requested * (1.0 - 1e-12);
    Ok(pyramid
        .levels
        .iter()
        .rposition(|l| l.resolution() >= threshold)
        .unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub bbox: BBox,
    pub nodata: Option<f64>,
    pub level_used: usize,
}

const EDGE_SLACK: f64 = 1e-9;

/// Pixel range `[c0, c1) x [r0, r1)` of `level` covering `bbox`, clamped to the level.
fn pixel_window(level: &RasterGrid, bbox: &BBox) -> (usize, usize, usize, usize) {
    let gt = &level.geotransform;
    let col = |x: f64| (x - gt.origin_x) / gt.pixel_size_x;
    let row = |y: f64| (y - gt.origin_y) / gt.pixel_size_y;
    let clamp = |v: f64, hi: usize| v.max(0.0).min(hi as f64) as usize;

    let (ca, cb) = (col(bbox.min_x), col(bbox.max_x));
    let (ra, rb) = (row(bbox.min_y), row(bbox.max_y));
    let (clo, chi) = (ca.min(cb), ca.max(cb));
    let (rlo, rhi) = (ra.min(rb), ra.max(rb));
    let c0 = clamp((clo + EDGE_SLACK).floor(), level.width - 1);
    let r0 = clamp((rlo + EDGE_SLACK).floor(), level.height - 1);
    let c1 = clamp((chi - EDGE_SLACK).ceil(), level.width).max(c0 + 1);
    let r1 = clamp((rhi - EDGE_SLACK).ceil(), level.height).max(r0 + 1);
    (c0, c1, r0, r1)
}

/// Reads the finest level whose window over `bbox` fits in `max_px` on its longer side.
pub fn read_window(
    pyramid: &RasterPyramid,
    bbox: &BBox,
    max_px: usize,
) -> Result<WindowGrid, RasterError> {
    let extent = pyramid.base().extent();
    if max_px == 0 {
        return Err(RasterError::WindowTooLarge(0));
    }
    if !extent.intersects(bbox) {
        return Err(RasterError::WindowOutside);
    }
    let clipped = BBox {
        min_x: bbox.min_x.max(extent.min_x),
        min_y: bbox.min_y.max(extent.min_y),
        max_x: bbox.max_x.min(extent.max_x),
        max_y: bbox.max_y.min(extent.max_y),
    };
    for (k, level) in pyramid.levels.iter().enumerate() {
        let (c0, c1, r0, r1) = pixel_window(level, &clipped);
        let (w, h) = (c1 - c0, r1 - r0);
        if w.max(h) > max_px {
            continue;
        }
        let mut values = Vec::with_capacity(w * h);
        for r in r0..r1 {
            values.extend_from_slice(&level.values[r * level.width + c0..r * level.width + c1]);
        }
        let (min_x, max_x) = level.geotransform.col_span(c0, c1);
        let (min_y, max_y) = level.geotransform.row_span(r0, r1);
        return Ok(WindowGrid {
            width: w,
            height: h,
            values,
            bbox: BBox {
                min_x,
                min_y,
                max_x,
                max_y,
            },
            nodata: level.nodata,
            level_used: k,
        });
    }
    Err(RasterError::WindowTooLarge(max_px))
}

const PYRAMID_MAGIC: &[u8; 8] = b"GVPYRMD1";

/// Serializes a pyramid to the little-endian `.pyramid` container.
pub fn write_pyramid(pyramid: &RasterPyramid, out: &mut impl Write) -> std::io::Result<()> {
    let base = pyramid.base();
    out.write_all(PYRAMID_MAGIC)?;
    out.write_u8(match pyramid.method {
        OverviewMethod::Average => 0,
        OverviewMethod::Nearest => 1,
    })?;
    out.write_u8(base.sample_format.code())?;
    out.write_u32::<LittleEndian>(base.crs)?;
    out.write_u8(base.nodata.is_some() as u8)?;
    out.write_f64::<LittleEndian>(base.nodata.unwrap_or(0.0))?;
    out.write_u32::<LittleEndian>(pyramid.levels.len() as u32)?;
    for level in &pyramid.levels {
        out.write_u64::<LittleEndian>(level.width as u64)?;
        out.write_u64::<LittleEndian>(level.height as u64)?;
        let gt = &level.geotransform;
        for v in [gt.origin_x, gt.origin_y, gt.pixel_size_x, gt.pixel_size_y] {
            out.write_f64::<LittleEndian>(v)?;
        }
        for &v in &level.values {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

pub fn read_pyramid(bytes: &[u8]) -> Result<RasterPyramid, RasterError> {
    if bytes.len() < 8 || &bytes[..8] != PYRAMID_MAGIC {
        return Err(RasterError::NotPyramid);
    }
    let mut r = &bytes[8..];
    let t = |_| RasterError::PyramidTruncated;
    let method = match r.read_u8().map_err(t)? {
        0 => OverviewMethod::Average,
        1 => OverviewMethod::Nearest,
        _ => return Err(RasterError::NotPyramid),
    };
    let sample_format =
        SampleFormat::from_code(r.read_u8().map_err(t)?).ok_or(RasterError::NotPyramid)?;
    let crs = r.read_u32::<LittleEndian>().map_err(t)?;
    let has_nodata = r.read_u8().map_err(t)? == 1;
    let nodata_value = r.read_f64::<LittleEndian>().map_err(t)?;
    let nodata = has_nodata.then_some(nodata_value);
    let n = r.read_u32::<LittleEndian>().map_err(t)? as usize;
    let mut levels = Vec::with_capacity(n.min(64));
    for _ in 0..n {
        let width = r.read_u64::<LittleEndian>().map_err(t)? as usize;
        let height = r.read_u64::<LittleEndian>().map_err(t)? as usize;
        let mut gt = [0.0; 4];
        for v in &mut gt {
            *v = r.read_f64::<LittleEndian>().map_err(t)?;
        }
        let count = width
            .checked_mul(height)
            .ok_or(RasterError::PyramidTruncated)?;
        if count.checked_mul(8).is_none_or(|b| b > r.len()) {
            return Err(RasterError::PyramidTruncated);
        }
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw).map_err(t)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let grid = RasterGrid {
            width,
            height,
            values,
            nodata,
            geotransform: GeoTransform {
                origin_x: gt[0],
                origin_y: gt[1],
                pixel_size_x: gt[2],
                pixel_size_y: gt[3],
            },
            crs,
            sample_format,
        };
        grid.validate()?;
        levels.push(grid);
    }
    if levels.is_empty() {
        return Err(RasterError::NotPyramid);
    }
    Ok(RasterPyramid { levels, method })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(width: usize, height: usize, values: Vec<f64>, nodata: Option<f64>) -> RasterGrid {
        RasterGrid {
            width,
            height,
            values,
            nodata,
            geotransform: GeoTransform {
                origin_x: -157.0,
                origin_y: 21.5,
                pixel_size_x: 0.01,
                pixel_size_y: -0.01,
            },
            crs: 4326,
            sample_format: SampleFormat::F32,
        }
    }

    #[test]
    fn constant_grid_stays_constant() {
        let p = build_overviews(grid(7, 5, vec![7.0; 35], None), 10, OverviewMethod::Average);
        for l in &p.levels {
            assert!(l.values.iter().all(|&v| v == 7.0));
        }
        let last = p.levels.last().unwrap();
        assert_eq!((last.width, last.height), (1, 1));
        assert_eq!(p.levels.len(), 4); // 7x5, 4x3, 2x2, 1x1
    }

    #[test]
    fn two_by_two_average() {
        let p = build_overviews(
            grid(2, 2, vec![1., 1., 3., 3.], None),
            1,
            OverviewMethod::Average,
        );
        assert_eq!(p.levels[1].values, vec![2.0]);
    }

    #[test]
    fn nodata_excluded_from_mean() {
        let nd = -9999.0;
        let p = build_overviews(
            grid(2, 2, vec![1., nd, 3., 3.], Some(nd)),
            1,
            OverviewMethod::Average,
        );
        assert_eq!(p.levels[1].values, vec![7.0 / 3.0]);

        let p = build_overviews(
            grid(2, 2, vec![nd; 4], Some(nd)),
            1,
            OverviewMethod::Average,
        );
        assert_eq!(p.levels[1].values, vec![nd]);
    }

    #[test]
    fn nearest_takes_top_left() {
        let p = build_overviews(
            grid(3, 3, (0..9).map(f64::from).collect(), None),
            1,
            OverviewMethod::Nearest,
        );
        assert_eq!(p.levels[1].values, vec![0., 2., 6., 8.]);
    }

    #[test]
    fn odd_remainder_blocks() {
        let p = build_overviews(
            grid(3, 1, vec![1., 3., 10.], None),
            1,
            OverviewMethod::Average,
        );
        assert_eq!(p.levels[1].values, vec![2., 10.]);
    }

    #[test]
    fn zero_levels_is_base_only() {
        let p = build_overviews(grid(4, 4, vec![0.; 16], None), 0, OverviewMethod::Average);
        assert_eq!(p.levels.len(), 1);
    }

    #[test]
    fn select_level_rules() {
        let p = build_overviews(
            grid(16, 16, vec![0.; 256], None),
            10,
            OverviewMethod::Average,
        );
        let native = p.base().resolution();
        assert_eq!(select_level(&p, native).unwrap(), 0);
        assert_eq!(select_level(&p, native / 4.0).unwrap(), 2);
        assert_eq!(select_level(&p, native * 4.0).unwrap(), 0);
        assert_eq!(
            select_level(&p, native / 1000.0).unwrap(),
            p.levels.len() - 1
        );
        assert!(select_level(&p, 0.0).is_err());
    }

    #[test]
    fn window_examples() {
        let values: Vec<f64> = (0..64).map(f64::from).collect();
        let p = build_overviews(grid(8, 8, values, None), 10, OverviewMethod::Average);
        let full = p.base().extent();

        let w = read_window(&p, &full, 8).unwrap();
        assert_eq!((w.level_used, w.width, w.height), (0, 8, 8));
        assert_eq!(w.values, p.base().values);
        assert_eq!(w.bbox, full);

        let w = read_window(&p, &full, 4).unwrap();
        assert_eq!((w.level_used, w.width, w.height), (1, 4, 4));

        let west = BBox::new(-170.0, 21.0, -160.0, 21.4).unwrap();
        assert_eq!(
            read_window(&p, &west, 8).unwrap_err().to_string(),
            "window outside raster extent"
        );
    }

    #[test]
    fn window_sub_region() {
        let values: Vec<f64> = (0..64).map(f64::from).collect();
        let p = build_overviews(grid(8, 8, values, None), 0, OverviewMethod::Average);
        // columns 2..4, rows 1..3
        let b = BBox::new(-156.98 + 1e-4, 21.47 + 1e-4, -156.96 - 1e-4, 21.49 - 1e-4).unwrap();
        let w = read_window(&p, &b, 100).unwrap();
        assert_eq!((w.width, w.height), (2, 2));
        assert_eq!(w.values, vec![10., 11., 18., 19.]);
        assert!((w.bbox.min_x + 156.98).abs() < 1e-12);
        assert!((w.bbox.max_y - 21.49).abs() < 1e-12);
        assert!(matches!(
            read_window(&p, &p.base().extent(), 4),
            Err(RasterError::WindowTooLarge(4))
        ));
    }

    #[test]
    fn pyramid_file_round_trip() {
        let g = grid(5, 3, (0..15).map(|v| v as f64 * 0.5).collect(), Some(-1.0));
        let p = build_overviews(g, 4, OverviewMethod::Average);
        let mut buf = Vec::new();
        write_pyramid(&p, &mut buf).unwrap();
        assert_eq!(read_pyramid(&buf).unwrap(), p);
        assert_eq!(
            read_pyramid(&buf[..buf.len() - 3]).unwrap_err(),
            RasterError::PyramidTruncated
        );
        assert_eq!(read_pyramid(b"nope").unwrap_err(), RasterError::NotPyramid);
    }
}
