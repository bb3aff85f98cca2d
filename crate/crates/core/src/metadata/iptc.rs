//! Minimal IPTC-IIM extraction from the Photoshop image-resource block
//! carried in APP13.

use super::{MetadataRecordSet, MetadataSource};
use crate::error::{Error, Result};

pub const IRB_IDENTIFIER: &[u8] = b"Photoshop 3.0\0";
const RESOURCE_SIGNATURE: &[u8] = b"8BIM";
const IPTC_RESOURCE_ID: u16 = 0x0404;

const DATASET_TAG: u8 = 0x1C;
const RECORD_APPLICATION: u8 = 2;

fn dataset_name(dataset: u8) -> Option<&'static str> {
    match dataset {
        110 => Some("Credit"),
        115 => Some("Source"),
        120 => Some("Caption"),
        _ => None,
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedMetadata(msg.into())
}

/// Extracts Caption (2:120), Credit (2:110), and Source (2:115) datasets.
/// A payload without the resource-block signature yields an empty set;
/// truncation inside a declared structure is an error.
pub fn parse_iptc(app13_payload: &[u8]) -> Result<MetadataRecordSet> {
    let mut records = MetadataRecordSet::default();
    let Some(mut rest) = app13_payload.strip_prefix(IRB_IDENTIFIER) else {
        return Ok(records);
    };

    while !rest.is_empty() {
        if rest.len() < 4 || &rest[..4] != RESOURCE_SIGNATURE {
            // Trailing padding after the last resource is tolerated.
            if rest.iter().all(|&b| b == 0) {
                break;
            }
            return Err(malformed("bad image resource signature"));
        }
        let id_bytes = rest.get(4..6).ok_or_else(|| malformed("truncated resource id"))?;
        let id = u16::from_be_bytes(id_bytes.try_into().unwrap());
        // Pascal name, padded to an even total length.
        let name_len = *rest.get(6).ok_or_else(|| malformed("truncated name"))? as usize;
        let mut pos = 7 + name_len;
        if (1 + name_len) % 2 != 0 {
            pos += 1;
        }
        let size_bytes = rest
            .get(pos..pos + 4)
            .ok_or_else(|| malformed("truncated resource size"))?;
        let size = u32::from_be_bytes(size_bytes.try_into().unwrap()) as usize;
        let data = rest
            .get(pos + 4..pos + 4 + size)
            .ok_or_else(|| malformed("resource data past end"))?;

        if id == IPTC_RESOURCE_ID {
            parse_datasets(data, &mut records)?;
        }
        pos += 4 + size;
        if size % 2 != 0 {
            pos += 1; // data padded to even
        }
        rest = rest.get(pos.min(rest.len())..).unwrap_or(&[]);
    }
    Ok(records)
}

fn parse_datasets(mut data: &[u8], records: &mut MetadataRecordSet) -> Result<()> {
    while !data.is_empty() {
        if data[0] != DATASET_TAG {
            if data.iter().all(|&b| b == 0) {
                break; // padding
            }
            return Err(malformed("expected dataset tag"));
        }
        if data.len() < 5 {
            return Err(malformed("truncated dataset header"));
        }
        let record = data[1];
        let dataset = data[2];
        let declared = u16::from_be_bytes(data[3..5].try_into().unwrap());
        let (length, header_len) = if declared & 0x8000 != 0 {
            // Extended: low bits give the size of the following length field.
            let len_of_len = (declared & 0x7FFF) as usize;
            if len_of_len == 0 || len_of_len > 4 {
                return Err(malformed("unsupported extended dataset length"));
            }
            let raw = data
                .get(5..5 + len_of_len)
                .ok_or_else(|| malformed("truncated extended length"))?;
            let mut value = 0usize;
            for &b in raw {
                value = value << 8 | b as usize;
            }
            (value, 5 + len_of_len)
        } else {
            (declared as usize, 5)
        };
        let body = data
            .get(header_len..header_len + length)
            .ok_or_else(|| malformed("dataset length overruns payload"))?;

        if record == RECORD_APPLICATION {
            if let Some(name) = dataset_name(dataset) {
                let value = match std::str::from_utf8(body) {
                    Ok(s) => s.to_string(),
                    // Fall back to Latin-1; every byte maps to a char.
                    Err(_) => body.iter().map(|&b| b as char).collect(),
                };
                records.push(MetadataSource::Iptc, name, value);
            }
        }
        data = &data[header_len + length..];
    }
    Ok(())
}
