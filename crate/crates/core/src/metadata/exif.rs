//! EXIF parsing: TIFF IFDs inside the JPEG APP1 payload.

use super::{binary_fallback, MetadataRecordSet, MetadataSource};
use crate::error::{Error, Result};

pub const EXIF_IDENTIFIER: &[u8] = b"Exif\0\0";

const TAG_IMAGE_DESCRIPTION: u16 = 0x010E;
const TAG_MAKE: u16 = 0x010F;
const TAG_MODEL: u16 = 0x0110;
const TAG_SOFTWARE: u16 = 0x0131;
const TAG_DATETIME: u16 = 0x0132;
const TAG_ARTIST: u16 = 0x013B;
const TAG_EXIF_IFD: u16 = 0x8769;
const TAG_GPS_IFD: u16 = 0x8825;
const TAG_DATETIME_ORIGINAL: u16 = 0x9003;
const TAG_USER_COMMENT: u16 = 0x9286;

fn tag_name(tag: u16) -> String {
    match tag {
        TAG_IMAGE_DESCRIPTION => "ImageDescription".into(),
        TAG_MAKE => "Make".into(),
        TAG_MODEL => "Model".into(),
        TAG_SOFTWARE => "Software".into(),
        TAG_DATETIME => "DateTime".into(),
        TAG_ARTIST => "Artist".into(),
        TAG_DATETIME_ORIGINAL => "DateTimeOriginal".into(),
        TAG_USER_COMMENT => "UserComment".into(),
        other => format!("Tag0x{other:04X}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ByteOrder {
    Little,
    Big,
}

struct Tiff<'a> {
    bytes: &'a [u8],
    order: ByteOrder,
}

impl<'a> Tiff<'a> {
    fn u16_at(&self, pos: usize) -> Result<u16> {
        let raw: [u8; 2] = self
            .bytes
            .get(pos..pos + 2)
            .ok_or_else(|| malformed("short read"))?
            .try_into()
            .unwrap();
        Ok(match self.order {
            ByteOrder::Little => u16::from_le_bytes(raw),
            ByteOrder::Big => u16::from_be_bytes(raw),
        })
    }

    fn u32_at(&self, pos: usize) -> Result<u32> {
        let raw: [u8; 4] = self
            .bytes
            .get(pos..pos + 4)
            .ok_or_else(|| malformed("short read"))?
            .try_into()
            .unwrap();
        Ok(match self.order {
            ByteOrder::Little => u32::from_le_bytes(raw),
            ByteOrder::Big => u32::from_be_bytes(raw),
        })
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedMetadata(msg.into())
}

fn value_size(field_type: u16) -> Option<usize> {
    match field_type {
        1 | 2 | 6 | 7 => Some(1), // BYTE, ASCII, SBYTE, UNDEFINED
        3 | 8 => Some(2),         // SHORT, SSHORT
        4 | 9 | 11 => Some(4),    // LONG, SLONG, FLOAT
        5 | 10 | 12 => Some(8),   // RATIONAL, SRATIONAL, DOUBLE
        _ => None,
    }
}

/// Decodes IFD0 (and the chain it links to) plus the Exif sub-IFD from an
/// APP1 payload. Both byte orders are handled; IFD offset loops are
/// detected and rejected.
pub fn parse_exif(app1_payload: &[u8]) -> Result<MetadataRecordSet> {
    let tiff_bytes = app1_payload
        .strip_prefix(EXIF_IDENTIFIER)
        .ok_or_else(|| malformed("missing Exif identifier"))?;

    let order = match tiff_bytes.get(..2) {
        Some(b"II") => ByteOrder::Little,
        Some(b"MM") => ByteOrder::Big,
        _ => return Err(malformed("bad TIFF byte-order mark")),
    };
    let tiff = Tiff {
        bytes: tiff_bytes,
        order,
    };
    if tiff.u16_at(2)? != 42 {
        return Err(malformed("bad TIFF magic"));
    }

    let mut records = MetadataRecordSet::default();
    let mut visited: Vec<u32> = Vec::new();
    let mut sub_ifds: Vec<u32> = Vec::new();

    // IFD0 and the next-IFD chain hanging off it.
    let mut next = tiff.u32_at(4)?;
    while next != 0 {
        if visited.contains(&next) {
            return Err(malformed(format!("IFD offset loop at 0x{next:08X}")));
        }
        visited.push(next);
        next = parse_ifd(&tiff, next, &mut records, &mut sub_ifds)?;
    }

    // Exif sub-IFDs discovered along the way.
    while let Some(offset) = sub_ifds.pop() {
        let mut next = offset;
        while next != 0 {
            if visited.contains(&next) {
                return Err(malformed(format!("IFD offset loop at 0x{next:08X}")));
            }
            visited.push(next);
            next = parse_ifd(&tiff, next, &mut records, &mut sub_ifds)?;
        }
    }

    Ok(records)
}

/// Parses one IFD, appending records and any discovered sub-IFD offsets;
/// returns the next-IFD offset.
fn parse_ifd(
    tiff: &Tiff,
    offset: u32,
    records: &mut MetadataRecordSet,
    sub_ifds: &mut Vec<u32>,
) -> Result<u32> {
    let base = offset as usize;
    let entry_count = tiff.u16_at(base)? as usize;
    for index in 0..entry_count {
        let entry = base + 2 + index * 12;
        let tag = tiff.u16_at(entry)?;
        let field_type = tiff.u16_at(entry + 2)?;
        let count = tiff.u32_at(entry + 4)? as usize;

        let Some(unit) = value_size(field_type) else {
            // Unknown field type: surface raw inline bytes.
            let raw = tiff
                .bytes
                .get(entry + 8..entry + 12)
                .ok_or_else(|| malformed("entry past end"))?;
            records.push(MetadataSource::Exif, tag_name(tag), binary_fallback(raw));
            continue;
        };
        let total = unit
            .checked_mul(count)
            .ok_or_else(|| malformed("value size overflow"))?;
        let value_pos = if total <= 4 {
            entry + 8
        } else {
            tiff.u32_at(entry + 8)? as usize
        };
        let raw = tiff
            .bytes
            .get(value_pos..value_pos + total)
            .ok_or_else(|| malformed(format!("tag 0x{tag:04X} value outside payload")))?;

        if tag == TAG_EXIF_IFD || tag == TAG_GPS_IFD {
            if field_type == 4 && count == 1 {
                let target = tiff.u32_at(entry + 8)?;
                if tag == TAG_EXIF_IFD {
                    sub_ifds.push(target);
                }
                // GPS IFD values are out of scope; pointer is not followed.
            }
            continue;
        }

        let value = decode_value(tiff, tag, field_type, count, raw);
        records.push(MetadataSource::Exif, tag_name(tag), value);
    }
    tiff.u32_at(base + 2 + entry_count * 12)
}

fn decode_value(tiff: &Tiff, tag: u16, field_type: u16, count: usize, raw: &[u8]) -> String {
    match field_type {
        2 => ascii_value(raw),
        1 | 6 => join_numbers(raw.iter().map(|b| b.to_string())),
        3 | 8 => join_numbers((0..count).map(|i| {
            let v = tiff.u16_at_raw(raw, i * 2);
            match (field_type, tiff.order) {
                (8, _) => (v as i16).to_string(),
                _ => v.to_string(),
            }
        })),
        4 | 9 => join_numbers((0..count).map(|i| {
            let v = tiff.u32_at_raw(raw, i * 4);
            if field_type == 9 {
                (v as i32).to_string()
            } else {
                v.to_string()
            }
        })),
        5 | 10 => join_numbers((0..count).map(|i| {
            let num = tiff.u32_at_raw(raw, i * 8);
            let den = tiff.u32_at_raw(raw, i * 8 + 4);
            format!("{num}/{den}")
        })),
        7 if tag == TAG_USER_COMMENT => user_comment_value(tiff.order, raw),
        _ => printable_or_binary(raw),
    }
}

impl<'a> Tiff<'a> {
    fn u16_at_raw(&self, raw: &[u8], pos: usize) -> u16 {
        let bytes: [u8; 2] = raw[pos..pos + 2].try_into().unwrap();
        match self.order {
            ByteOrder::Little => u16::from_le_bytes(bytes),
            ByteOrder::Big => u16::from_be_bytes(bytes),
        }
    }

    fn u32_at_raw(&self, raw: &[u8], pos: usize) -> u32 {
        let bytes: [u8; 4] = raw[pos..pos + 4].try_into().unwrap();
        match self.order {
            ByteOrder::Little => u32::from_le_bytes(bytes),
            ByteOrder::Big => u32::from_be_bytes(bytes),
        }
    }
}

fn join_numbers(values: impl Iterator<Item = String>) -> String {
    values.collect::<Vec<_>>().join(", ")
}

fn ascii_value(raw: &[u8]) -> String {
    let trimmed: &[u8] = match raw.iter().position(|&b| b == 0) {
        Some(nul) => &raw[..nul],
        None => raw,
    };
    match std::str::from_utf8(trimmed) {
        Ok(s) => s.trim().to_string(),
        Err(_) => binary_fallback(raw),
    }
}

fn printable_or_binary(raw: &[u8]) -> String {
    match std::str::from_utf8(raw) {
        Ok(s) if s.chars().all(|c| !c.is_control() || c == '\n' || c == '\t') => {
            s.trim_end_matches('\0').trim().to_string()
        }
        _ => binary_fallback(raw),
    }
}

/// UserComment carries an 8-byte character-code prefix. ASCII and UNICODE
/// are decoded; anything else is surfaced as binary.
fn user_comment_value(order: ByteOrder, raw: &[u8]) -> String {
    if raw.len() < 8 {
        return binary_fallback(raw);
    }
    let (code, body) = raw.split_at(8);
    match code {
        b"ASCII\0\0\0" => ascii_value(body),
        b"UNICODE\0" => {
            if body.len() % 2 != 0 {
                return binary_fallback(raw);
            }
            let units: Vec<u16> = body
                .chunks_exact(2)
                .map(|pair| {
                    let bytes: [u8; 2] = pair.try_into().unwrap();
                    match order {
                        ByteOrder::Little => u16::from_le_bytes(bytes),
                        ByteOrder::Big => u16::from_be_bytes(bytes),
                    }
                })
                .collect();
            match String::from_utf16(&units) {
                Ok(s) => s.trim_end_matches('\0').trim().to_string(),
                Err(_) => binary_fallback(raw),
            }
        }
        _ => binary_fallback(raw),
    }
}
