use super::ShapefileError;
use crate::geom::{Attributes, Value};
use byteorder::{ByteOrder, LittleEndian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Character,
    Numeric,
    Float,
    Logical,
    Date,
}

impl FieldType {
    fn from_byte(b: u8) -> Result<Self, ShapefileError> {
        match b {
            b'C' => Ok(FieldType::Character),
            b'N' => Ok(FieldType::Numeric),
            b'F' => Ok(FieldType::Float),
            b'L' => Ok(FieldType::Logical),
            b'D' => Ok(FieldType::Date),
            other => Err(ShapefileError::UnsupportedFieldType(other as char)),
        }
    }

    pub fn as_byte(self) -> u8 {
        match self {
            FieldType::Character => b'C',
            FieldType::Numeric => b'N',
            FieldType::Float => b'F',
            FieldType::Logical => b'L',
            FieldType::Date => b'D',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbfField {
    pub name: String,
    pub field_type: FieldType,
    pub length: u8,
    pub decimals: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbfTable {
    pub fields: Vec<DbfField>,
    /// Live rows only; rows flagged deleted (`*`) are skipped.
    pub rows: Vec<Attributes>,
}

const DELETED: u8 = 0x2A;
const TERMINATOR: u8 = 0x0D;

pub fn parse_dbf(bytes: &[u8]) -> Result<DbfTable, ShapefileError> {
    if bytes.len() < 32 {
        return Err(ShapefileError::MalformedDbfHeader);
    }
    if bytes[0] & 0x0F != 0x03 {
        return Err(ShapefileError::MalformedDbfHeader);
    }
    let num_records = LittleEndian::read_u32(&bytes[4..8]) as usize;
    let header_len = LittleEndian::read_u16(&bytes[8..10]) as usize;
    let record_len = LittleEndian::read_u16(&bytes[10..12]) as usize;

    let mut fields = Vec::new();
    let mut pos = 32;
    loop {
        match bytes.get(pos) {
            Some(&TERMINATOR) => break,
            Some(_) if pos + 32 <= bytes.len() && pos + 32 < header_len => {
                let d = &bytes[pos..pos + 32];
                let name_end = d[..11].iter().position(|&b| b == 0).unwrap_or(11);
                let name = String::from_utf8_lossy(&d[..name_end]).trim().to_string();
                fields.push(DbfField {
                    name,
                    field_type: FieldType::from_byte(d[11])?,
                    length: d[16],
                    decimals: d[17],
                });
                pos += 32;
            }
            _ => return Err(ShapefileError::MalformedDbfHeader),
        }
    }
    let data_len: usize = fields.iter().map(|f| f.length as usize).sum();
    if header_len <= pos || data_len + 1 != record_len {
        return Err(ShapefileError::MalformedDbfHeader);
    }
    let body_end = num_records
        .checked_mul(record_len)
        .and_then(|n| n.checked_add(header_len))
        .ok_or(ShapefileError::TruncatedDbf)?;
    if body_end > bytes.len() {
        return Err(ShapefileError::TruncatedDbf);
    }

    let mut rows = Vec::with_capacity(num_records);
    for rec in bytes[header_len..body_end].chunks_exact(record_len) {
        if rec[0] == DELETED {
            continue;
        }
        let mut row = Attributes::with_capacity(fields.len());
        let mut off = 1;
        for f in &fields {
            let raw = &rec[off..off + f.length as usize];
            off += f.length as usize;
            row.insert(f.name.clone(), decode_cell(f, raw)?);
        }
        rows.push(row);
    }
    Ok(DbfTable { fields, rows })
}

fn decode_cell(field: &DbfField, raw: &[u8]) -> Result<Value, ShapefileError> {
    let text = String::from_utf8_lossy(raw);
    let invalid = |kind| ShapefileError::InvalidDbfValue {
        kind,
        field: field.name.clone(),
        value: text.trim().to_string(),
    };
    match field.field_type {
        FieldType::Character => {
            let t = text.trim_end_matches([' ', '\0']);
            Ok(if t.is_empty() {
                Value::Null
            } else {
                Value::Text(t.to_string())
            })
        }
        FieldType::Numeric | FieldType::Float => {
            let t = text.trim_matches([' ', '\0']);
            // all-asterisk cells mark numeric overflow in dBASE
            if t.is_empty() || t.bytes().all(|b| b == b'*') {
                return Ok(Value::Null);
            }
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Number)
                .ok_or_else(|| invalid("numeric"))
        }
        FieldType::Logical => match text.trim_matches([' ', '\0']) {
            "T" | "t" | "Y" | "y" => Ok(Value::Bool(true)),
            "F" | "f" | "N" | "n" => Ok(Value::Bool(false)),
            "?" | "" => Ok(Value::Null),
            _ => Err(invalid("logical")),
        },
        FieldType::Date => {
            let t = text.trim_matches([' ', '\0']);
            if t.is_empty() || t == "00000000" {
                return Ok(Value::Null);
            }
            if t.len() != 8 || !t.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid("date"));
            }
            Ok(Value::Text(format!(
                "{}-{}-{}",
                &t[0..4],
                &t[4..6],
                &t[6..8]
            )))
        }
    }
}
