//! Uncompressed strip GeoTIFF writer for fixtures.

use crate::raster::{RasterGrid, SampleFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

struct Writer {
    order: ByteOrder,
    buf: Vec<u8>,
}

impl Writer {
    fn u16(&mut self, v: u16) {
        match self.order {
            ByteOrder::Little => self.buf.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => self.buf.extend_from_slice(&v.to_be_bytes()),
        }
    }
    fn u32(&mut self, v: u32) {
        match self.order {
            ByteOrder::Little => self.buf.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => self.buf.extend_from_slice(&v.to_be_bytes()),
        }
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn u64(&mut self, v: u64) {
        match self.order {
            ByteOrder::Little => self.buf.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => self.buf.extend_from_slice(&v.to_be_bytes()),
        }
    }
    fn sample(&mut self, v: f64, format: SampleFormat) {
        match format {
            SampleFormat::U8 => self.buf.push(v as u8),
            SampleFormat::I8 => self.buf.push(v as i8 as u8),
            SampleFormat::U16 => self.u16(v as u16),
            SampleFormat::I16 => self.u16(v as i16 as u16),
            SampleFormat::U32 => self.u32(v as u32),
            SampleFormat::I32 => self.u32(v as i32 as u32),
            SampleFormat::F32 => self.u32((v as f32).to_bits()),
        }
    }
}

enum TagValue {
    Short(Vec<u16>),
    Long(Vec<u32>),
    Double(Vec<f64>),
    Ascii(String),
}

/// Encodes `grid` as a classic TIFF with `rows_per_strip` rows in each strip.
///
/// Values must be representable in the grid's sample format.
pub fn write_geotiff(grid: &RasterGrid, order: ByteOrder, rows_per_strip: usize) -> Vec<u8> {
    let rows_per_strip = rows_per_strip.clamp(1, grid.height);
    let mut w = Writer {
        order,
        buf: Vec::new(),
    };
    w.buf.extend_from_slice(match order {
        ByteOrder::Little => b"II",
        ByteOrder::Big => b"MM",
    });
    w.u16(42);
    w.u32(0); // IFD offset, patched below

    // pixel data first
    let mut strip_offsets = Vec::new();
    let mut strip_counts = Vec::new();
    for start in (0..grid.height).step_by(rows_per_strip) {
        let rows = rows_per_strip.min(grid.height - start);
        strip_offsets.push(w.buf.len() as u32);
        for &v in &grid.values[start * grid.width..(start + rows) * grid.width] {
            w.sample(v, grid.sample_format);
        }
        strip_counts.push((rows * grid.width * grid.sample_format.byte_width()) as u32);
    }

    let (bits, format_code) = match grid.sample_format {
        SampleFormat::U8 => (8, 1),
        SampleFormat::U16 => (16, 1),
        SampleFormat::U32 => (32, 1),
        SampleFormat::I8 => (8, 2),
        SampleFormat::I16 => (16, 2),
        SampleFormat::I32 => (32, 2),
        SampleFormat::F32 => (32, 3),
    };
    let gt = &grid.geotransform;
    let geo_key = if grid.crs == 4326 { 2048 } else { 3072 };
    let mut tags: Vec<(u16, TagValue)> = vec![
        (256, TagValue::Long(vec![grid.width as u32])),
        (257, TagValue::Long(vec![grid.height as u32])),
        (258, TagValue::Short(vec![bits])),
        (259, TagValue::Short(vec![1])),
        (262, TagValue::Short(vec![1])),
        (273, TagValue::Long(strip_offsets)),
        (277, TagValue::Short(vec![1])),
        (278, TagValue::Long(vec![rows_per_strip as u32])),
        (279, TagValue::Long(strip_counts)),
        (339, TagValue::Short(vec![format_code])),
        (
            33550,
            TagValue::Double(vec![gt.pixel_size_x, -gt.pixel_size_y, 0.0]),
        ),
        (
            33922,
            TagValue::Double(vec![0.0, 0.0, 0.0, gt.origin_x, gt.origin_y, 0.0]),
        ),
        (
            34735,
            TagValue::Short(vec![1, 1, 0, 1, geo_key, 0, 1, grid.crs as u16]),
        ),
    ];
    if let Some(nd) = grid.nodata {
        tags.push((42113, TagValue::Ascii(format!("{nd}\0"))));
    }

    // out-of-line values
    if w.buf.len() % 2 == 1 {
        w.buf.push(0);
    }
    let mut inline: Vec<(u16, u16, u32, Vec<u8>)> = Vec::new();
    for (tag, value) in &tags {
        let mut tmp = Writer {
            order,
            buf: Vec::new(),
        };
        let (ty, count) = match value {
            TagValue::Short(v) => {
                v.iter().for_each(|x| tmp.u16(*x));
                (3u16, v.len())
            }
            TagValue::Long(v) => {
                v.iter().for_each(|x| tmp.u32(*x));
                (4, v.len())
            }
            TagValue::Double(v) => {
                v.iter().for_each(|x| tmp.f64(*x));
                (12, v.len())
            }
            TagValue::Ascii(s) => {
                tmp.buf.extend_from_slice(s.as_bytes());
                (2, s.len())
            }
        };
        let mut field = tmp.buf;
        if field.len() > 4 {
            let at = w.buf.len() as u32;
            w.buf.extend_from_slice(&field);
            if w.buf.len() % 2 == 1 {
                w.buf.push(0);
            }
            let mut ptr = Writer {
                order,
                buf: Vec::new(),
            };
            ptr.u32(at);
            field = ptr.buf;
        } else {
            field.resize(4, 0);
        }
        inline.push((*tag, ty, count as u32, field));
    }

    let ifd = w.buf.len() as u32;
    w.u16(inline.len() as u16);
    for (tag, ty, count, field) in inline {
        w.u16(tag);
        w.u16(ty);
        w.u32(count);
        w.buf.extend_from_slice(&field);
    }
    w.u32(0);
    let mut patch = Writer {
        order,
        buf: Vec::new(),
    };
    patch.u32(ifd);
    w.buf[4..8].copy_from_slice(&patch.buf);
    w.buf
}
