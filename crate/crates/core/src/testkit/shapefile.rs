//! Minimal shapefile triplet writer for fixtures.
//!
//! Rings are written exactly as given, so callers must supply ESRI
//! orientation (clockwise outer rings, counter-clockwise holes) for the
//! reader to regroup them the same way.

use crate::geom::{bbox_of, Coordinate, FeatureCollection, Geometry, Value};
use byteorder::{BigEndian, ByteOrder, LittleEndian};

pub struct ShapefileBytes {
    pub shp: Vec<u8>,
    pub shx: Vec<u8>,
    pub dbf: Vec<u8>,
}

fn shape_type(g: &Geometry) -> i32 {
    match g {
        Geometry::Point(_) => 1,
        Geometry::LineString(_) => 3,
        Geometry::Polygon(_) | Geometry::MultiPolygon(_) => 5,
        Geometry::MultiPoint(_) => 8,
    }
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    let mut b = [0u8; 8];
    LittleEndian::write_f64(&mut b, v);
    buf.extend_from_slice(&b);
}

fn push_i32(buf: &mut Vec<u8>, v: i32) {
    let mut b = [0u8; 4];
    LittleEndian::write_i32(&mut b, v);
    buf.extend_from_slice(&b);
}

fn push_bbox(buf: &mut Vec<u8>, g: &Geometry) {
    let b = bbox_of(g).expect("fixture geometry is nonempty");
    for v in [b.min_x, b.min_y, b.max_x, b.max_y] {
        push_f64(buf, v);
    }
}

fn push_parts(buf: &mut Vec<u8>, parts: &[&Vec<Coordinate>]) {
    let total: usize = parts.iter().map(|p| p.len()).sum();
    push_i32(buf, parts.len() as i32);
    push_i32(buf, total as i32);
    let mut start = 0;
    for p in parts {
        push_i32(buf, start as i32);
        start += p.len();
    }
    for c in parts.iter().flat_map(|p| p.iter()) {
        push_f64(buf, c.x);
        push_f64(buf, c.y);
    }
}

fn encode_record(g: Option<&Geometry>) -> Vec<u8> {
    let mut buf = Vec::new();
    let Some(g) = g else {
        push_i32(&mut buf, 0);
        return buf;
    };
    push_i32(&mut buf, shape_type(g));
    match g {
        Geometry::Point(c) => {
            push_f64(&mut buf, c.x);
            push_f64(&mut buf, c.y);
        }
        Geometry::MultiPoint(cs) => {
            push_bbox(&mut buf, g);
            push_i32(&mut buf, cs.len() as i32);
            for c in cs {
                push_f64(&mut buf, c.x);
                push_f64(&mut buf, c.y);
            }
        }
        Geometry::LineString(cs) => {
            push_bbox(&mut buf, g);
            push_parts(&mut buf, &[cs]);
        }
        Geometry::Polygon(rings) => {
            push_bbox(&mut buf, g);
            push_parts(&mut buf, &rings.iter().collect::<Vec<_>>());
        }
        Geometry::MultiPolygon(polys) => {
            push_bbox(&mut buf, g);
            push_parts(&mut buf, &polys.iter().flatten().collect::<Vec<_>>());
        }
    }
    buf
}

fn file_header(file_words: u32, shape_type: i32) -> Vec<u8> {
    let mut h = vec![0u8; 100];
    BigEndian::write_i32(&mut h[0..4], 9994);
    BigEndian::write_u32(&mut h[24..28], file_words);
    LittleEndian::write_i32(&mut h[28..32], 1000);
    LittleEndian::write_i32(&mut h[32..36], shape_type);
    h
}

/// Writes `.shp`/`.shx` for a list of optional geometries (`None` = Null record).
pub fn write_geometries(geoms: &[Option<Geometry>]) -> (Vec<u8>, Vec<u8>) {
    let file_type = geoms.iter().flatten().map(shape_type).next().unwrap_or(0);
    let mut body = Vec::new();
    let mut index = Vec::new();
    for (i, g) in geoms.iter().enumerate() {
        let content = encode_record(g.as_ref());
        let offset_words = (100 + body.len()) / 2;
        let len_words = content.len() / 2;
        let mut rh = [0u8; 8];
        BigEndian::write_i32(&mut rh[0..4], i as i32 + 1);
        BigEndian::write_u32(&mut rh[4..8], len_words as u32);
        body.extend_from_slice(&rh);
        body.extend_from_slice(&content);
        let mut ix = [0u8; 8];
        BigEndian::write_u32(&mut ix[0..4], offset_words as u32);
        BigEndian::write_u32(&mut ix[4..8], len_words as u32);
        index.extend_from_slice(&ix);
    }
    let mut shp = file_header(((100 + body.len()) / 2) as u32, file_type);
    shp.extend_from_slice(&body);
    let mut shx = file_header(((100 + index.len()) / 2) as u32, file_type);
    shx.extend_from_slice(&index);
    (shp, shx)
}

/// Writes a dBASE III table from attribute rows that share one schema.
///
/// Numbers are stored with their shortest round-trip text so parsing
/// reproduces them bit-exactly.
pub fn write_dbf(names: &[String], rows: &[Vec<Value>]) -> Vec<u8> {
    let cell_text = |v: &Value| match v {
        Value::Null => String::new(),
        Value::Bool(true) => "T".into(),
        Value::Bool(false) => "F".into(),
        Value::Number(n) => format!("{n:?}"),
        Value::Text(s) => s.clone(),
    };
    let types: Vec<u8> = (0..names.len())
        .map(|i| {
            rows.iter()
                .find_map(|r| match &r[i] {
                    Value::Number(_) => Some(b'N'),
                    Value::Bool(_) => Some(b'L'),
                    Value::Text(_) => Some(b'C'),
                    Value::Null => None,
                })
                .unwrap_or(b'C')
        })
        .collect();
    let widths: Vec<usize> = (0..names.len())
        .map(|i| {
            rows.iter()
                .map(|r| cell_text(&r[i]).len())
                .max()
                .unwrap_or(0)
                .clamp(1, 254)
        })
        .collect();

    let header_len = 32 + 32 * names.len() + 1;
    let record_len = 1 + widths.iter().sum::<usize>();
    let mut b = vec![0u8; 32];
    b[0] = 0x03;
    LittleEndian::write_u32(&mut b[4..8], rows.len() as u32);
    LittleEndian::write_u16(&mut b[8..10], header_len as u16);
    LittleEndian::write_u16(&mut b[10..12], record_len as u16);
    for ((name, ty), w) in names.iter().zip(&types).zip(&widths) {
        let mut d = [0u8; 32];
        let n = name.as_bytes();
        d[..n.len().min(10)].copy_from_slice(&n[..n.len().min(10)]);
        d[11] = *ty;
        d[16] = *w as u8;
        b.extend_from_slice(&d);
    }
    b.push(0x0D);
    for row in rows {
        b.push(b' ');
        for (v, w) in row.iter().zip(&widths) {
            let mut cell = cell_text(v).into_bytes();
            cell.truncate(*w);
            if matches!(v, Value::Number(_)) {
                // right-aligned like dBASE numerics
                let mut padded = vec![b' '; w - cell.len()];
                padded.extend_from_slice(&cell);
                cell = padded;
            }
            cell.resize(*w, b' ');
            b.extend_from_slice(&cell);
        }
    }
    b.push(0x1A);
    b
}

/// Writes a full triplet for a collection whose features share one attribute schema.
pub fn write_shapefile(fc: &FeatureCollection) -> ShapefileBytes {
    let geoms: Vec<Option<Geometry>> = fc
        .features
        .iter()
        .map(|f| Some(f.geometry.clone()))
        .collect();
    let (shp, shx) = write_geometries(&geoms);
    let names: Vec<String> = fc
        .features
        .first()
        .map(|f| f.attributes.keys().cloned().collect())
        .unwrap_or_default();
    let rows: Vec<Vec<Value>> = fc
        .features
        .iter()
        .map(|f| names.iter().map(|n| f.attributes[n].clone()).collect())
        .collect();
    ShapefileBytes {
        shp,
        shx,
        dbf: write_dbf(&names, &rows),
    }
}
