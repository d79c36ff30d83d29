use super::{ShapefileError, FILE_CODE, HEADER_LEN};
use byteorder::{BigEndian, ByteOrder};

/// Record offsets and lengths, both in 16-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShxIndex {
    pub records: Vec<(u32, u32)>,
}

pub fn parse_shx(bytes: &[u8]) -> Result<ShxIndex, ShapefileError> {
    if bytes.len() < 4 {
        return Err(ShapefileError::UnexpectedEof);
    }
    if BigEndian::read_i32(&bytes[0..4]) != FILE_CODE {
        return Err(ShapefileError::NotShapefileIndex);
    }
    if bytes.len() < HEADER_LEN {
        return Err(ShapefileError::UnexpectedEof);
    }
    let file_len = BigEndian::read_u32(&bytes[24..28]) as usize * 2;
    if file_len < HEADER_LEN || !(file_len - HEADER_LEN).is_multiple_of(8) {
        return Err(ShapefileError::CorruptIndex(format!(
            "file length {file_len} bytes is not header + 8·n"
        )));
    }
    if file_len > bytes.len() {
        return Err(ShapefileError::UnexpectedEof);
    }

    let mut records = Vec::with_capacity((file_len - HEADER_LEN) / 8);
    let mut prev: Option<u32> = None;
    for chunk in bytes[HEADER_LEN..file_len].chunks_exact(8) {
        let offset = BigEndian::read_u32(&chunk[0..4]);
        let length = BigEndian::read_u32(&chunk[4..8]);
        if offset < 50 {
            return Err(ShapefileError::CorruptIndex(format!(
                "offset {offset} points inside the header"
            )));
        }
        if prev.is_some_and(|p| offset <= p) {
            return Err(ShapefileError::CorruptIndex(format!(
                "offset {offset} is not increasing"
            )));
        }
        prev = Some(offset);
        records.push((offset, length));
    }
    Ok(ShxIndex { records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(words: u32) -> Vec<u8> {
        let mut b = vec![0u8; 100];
        BigEndian::write_i32(&mut b[0..4], 9994);
        BigEndian::write_u32(&mut b[24..28], words);
        b
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_shx(&header(50)).unwrap().records.is_empty());
    }

    #[test]
    fn bad_magic() {
        let mut b = header(50);
        BigEndian::write_i32(&mut b[0..4], 1234);
        assert_eq!(
            parse_shx(&b).unwrap_err().to_string(),
            "not a shapefile index"
        );
    }

    #[test]
    fn truncated() {
        let b = header(58);
        assert_eq!(
            parse_shx(&b).unwrap_err().to_string(),
            "unexpected end of file"
        );
        assert_eq!(
            parse_shx(&b[..60]).unwrap_err(),
            ShapefileError::UnexpectedEof
        );
    }

    #[test]
    fn offsets_must_increase() {
        let mut b = header(58);
        b.extend_from_slice(&[0, 0, 0, 50, 0, 0, 0, 10, 0, 0, 0, 50, 0, 0, 0, 10]);
        assert!(matches!(
            parse_shx(&b),
            Err(ShapefileError::CorruptIndex(_))
        ));
    }
}
