use super::{ShapefileError, FILE_CODE, HEADER_LEN};
use crate::geom::{ring_area, Coordinate, Geometry, Polygon, Ring};
use byteorder::{BigEndian, ByteOrder, LittleEndian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeType {
    Null,
    Point,
    PolyLine,
    Polygon,
    MultiPoint,
}

impl ShapeType {
    pub fn from_code(code: i32) -> Result<Self, ShapefileError> {
        match code {
            0 => Ok(ShapeType::Null),
            1 => Ok(ShapeType::Point),
            3 => Ok(ShapeType::PolyLine),
            5 => Ok(ShapeType::Polygon),
            8 => Ok(ShapeType::MultiPoint),
            other => Err(ShapefileError::UnsupportedShapeType(other)),
        }
    }

    pub fn code(self) -> i32 {
        match self {
            ShapeType::Null => 0,
            ShapeType::Point => 1,
            ShapeType::PolyLine => 3,
            ShapeType::Polygon => 5,
            ShapeType::MultiPoint => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRecord {
    pub number: i32,
    /// `None` for Null shape records.
    pub geometry: Option<Geometry>,
}

pub fn parse_shp(bytes: &[u8]) -> Result<Vec<ShapeRecord>, ShapefileError> {
    if bytes.len() < 4 {
        return Err(ShapefileError::UnexpectedEof);
    }
    if BigEndian::read_i32(&bytes[0..4]) != FILE_CODE {
        return Err(ShapefileError::NotShapefile);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ShapefileError::UnexpectedEof);
    }
    let file_len = BigEndian::read_u32(&bytes[24..28]) as usize * 2;
    let file_type = ShapeType::from_code(LittleEndian::read_i32(&bytes[32..36]))?;
    if file_len > bytes.len() {
        return Err(ShapefileError::UnexpectedEof);
    }
    if file_len < HEADER_LEN {
        return Err(ShapefileError::NotShapefile);
    }

    let mut records = Vec::new();
    let mut pos = HEADER_LEN;
    while pos < file_len {
        let header = bytes
            .get(pos..pos + 8)
            .ok_or(ShapefileError::UnexpectedEof)?;
        let number = BigEndian::read_i32(&header[0..4]);
        let content_len = BigEndian::read_u32(&header[4..8]) as usize * 2;
        pos += 8;
        let end = pos
            .checked_add(content_len)
            .filter(|&e| e <= file_len)
            .ok_or(ShapefileError::UnexpectedEof)?;
        let geometry = parse_record(number, file_type, &bytes[pos..end])?;
        records.push(ShapeRecord { number, geometry });
        pos = end;
    }
    Ok(records)
}

fn corrupt(record: i32, reason: impl Into<String>) -> ShapefileError {
    ShapefileError::CorruptRecord {
        record,
        reason: reason.into(),
    }
}

fn read_point(buf: &[u8]) -> Coordinate {
    Coordinate::new(
        LittleEndian::read_f64(&buf[0..8]),
        LittleEndian::read_f64(&buf[8..16]),
    )
}

fn parse_record(
    number: i32,
    file_type: ShapeType,
    content: &[u8],
) -> Result<Option<Geometry>, ShapefileError> {
    if content.len() < 4 {
        return Err(corrupt(number, "record shorter than its shape type"));
    }
    let shape_type = match ShapeType::from_code(LittleEndian::read_i32(&content[0..4]))? {
        ShapeType::Null => {
            if content.len() != 4 {
                return Err(corrupt(number, "length mismatch for Null shape"));
            }
            return Ok(None);
        }
        t if t != file_type => {
            return Err(corrupt(
                number,
                format!(
                    "shape type {} in a type {} file",
                    t.code(),
                    file_type.code()
                ),
            ))
        }
        t => t,
    };
    let body = &content[4..];

    let geometry = match shape_type {
        ShapeType::Null => unreachable!(),
        ShapeType::Point => {
            if body.len() != 16 {
                return Err(corrupt(number, "length mismatch for Point"));
            }
            Geometry::Point(read_point(body))
        }
        ShapeType::MultiPoint => {
            // bbox (32) + count (4) + points
            if body.len() < 36 {
                return Err(corrupt(number, "length mismatch for MultiPoint"));
            }
            let n = LittleEndian::read_i32(&body[32..36]);
            let n = usize::try_from(n).map_err(|_| corrupt(number, "negative point count"))?;
            if n == 0 || Some(body.len()) != n.checked_mul(16).map(|p| p + 36) {
                return Err(corrupt(number, "length mismatch for MultiPoint"));
            }
            Geometry::MultiPoint(body[36..].chunks_exact(16).map(read_point).collect())
        }
        ShapeType::PolyLine | ShapeType::Polygon => {
            let parts = read_parts(number, body)?;
            if shape_type == ShapeType::PolyLine {
                match <[Vec<Coordinate>; 1]>::try_from(parts) {
                    Ok([line]) if line.len() >= 2 => Geometry::LineString(line),
                    Ok(_) => return Err(corrupt(number, "PolyLine with fewer than 2 points")),
                    Err(_) => return Err(corrupt(number, "multi-part PolyLine is not supported")),
                }
            } else {
                polygon_from_rings(number, parts)?
            }
        }
    };
    Ok(Some(geometry))
}

/// Decodes the shared PolyLine/Polygon layout into per-part coordinate sequences.
fn read_parts(number: i32, body: &[u8]) -> Result<Vec<Vec<Coordinate>>, ShapefileError> {
    // bbox (32) + num_parts (4) + num_points (4)
    if body.len() < 40 {
        return Err(corrupt(number, "length mismatch for multi-part shape"));
    }
    let num_parts = LittleEndian::read_i32(&body[32..36]);
    let num_points = LittleEndian::read_i32(&body[36..40]);
    let (Ok(num_parts), Ok(num_points)) = (usize::try_from(num_parts), usize::try_from(num_points))
    else {
        return Err(corrupt(number, "negative part or point count"));
    };
    let expected = num_parts
        .checked_mul(4)
        .and_then(|p| num_points.checked_mul(16).and_then(|q| q.checked_add(p)))
        .and_then(|v| v.checked_add(40));
    if expected != Some(body.len()) || num_parts == 0 {
        return Err(corrupt(number, "length mismatch for multi-part shape"));
    }

    let starts: Vec<usize> = body[40..40 + 4 * num_parts]
        .chunks_exact(4)
        .map(|c| LittleEndian::read_i32(c) as usize)
        .collect();
    if starts[0] != 0
        || starts.windows(2).any(|w| w[0] >= w[1])
        || starts[num_parts - 1] >= num_points
    {
        return Err(corrupt(number, "invalid part index array"));
    }
    let points: Vec<Coordinate> = body[40 + 4 * num_parts..]
        .chunks_exact(16)
        .map(read_point)
        .collect();
    Ok(starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let e = starts.get(i + 1).copied().unwrap_or(num_points);
            points[s..e].to_vec()
        })
        .collect())
}

/// Groups rings into polygons using ESRI orientation: clockwise rings are
/// outer boundaries, counter-clockwise rings are holes of the outer ring that
/// contains them.
fn polygon_from_rings(
    number: i32,
    parts: Vec<Vec<Coordinate>>,
) -> Result<Geometry, ShapefileError> {
    let mut polygons: Vec<Polygon> = Vec::new();
    let mut orphans: Vec<Ring> = Vec::new();
    for mut ring in parts {
        if ring.first() != ring.last() {
            ring.push(ring[0]);
        }
        if ring.len() < 4 {
            return Err(corrupt(number, "polygon ring with fewer than 4 points"));
        }
        if ring_area(&ring) <= 0.0 {
            polygons.push(vec![ring]);
            continue;
        }
        let owner = polygons
            .iter()
            .rposition(|p| point_in_ring(&ring[0], &p[0]))
            .or(polygons.len().checked_sub(1));
        match owner {
            Some(i) => polygons[i].push(ring),
            None => orphans.push(ring),
        }
    }
    // Counter-clockwise rings with no enclosing outer ring are treated as outer rings.
    polygons.extend(orphans.into_iter().map(|r| vec![r]));
    Ok(if polygons.len() == 1 {
        Geometry::Polygon(polygons.pop().unwrap())
    } else {
        Geometry::MultiPolygon(polygons)
    })
}

fn point_in_ring(p: &Coordinate, ring: &[Coordinate]) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
    }
    inside
}
