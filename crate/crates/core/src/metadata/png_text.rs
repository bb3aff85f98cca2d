//! PNG text chunk decoding: tEXt, zTXt (deflate), and iTXt.

use std::io::Read;

use flate2::read::ZlibDecoder;

use super::{binary_fallback, MetadataRecordSet, MetadataSource};
use crate::container::Chunk;
use crate::error::{Error, Result};

/// Decompressed text beyond this is treated as malformed (bomb guard).
const MAX_TEXT_LEN: u64 = 16 * 1024 * 1024;

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedMetadata(msg.into())
}

fn latin1(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| b as char).collect()
}

fn split_keyword(payload: &[u8]) -> Result<(&[u8], &[u8])> {
    let nul = payload
        .iter()
        .position(|&b| b == 0)
        .ok_or_else(|| malformed("text chunk lacks keyword terminator"))?;
    Ok((&payload[..nul], &payload[nul + 1..]))
}

fn inflate(data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut decoder = ZlibDecoder::new(data).take(MAX_TEXT_LEN + 1);
    decoder
        .read_to_end(&mut out)
        .map_err(|e| malformed(format!("deflate stream: {e}")))?;
    if out.len() as u64 > MAX_TEXT_LEN {
        return Err(malformed("decompressed text exceeds size cap"));
    }
    Ok(out)
}

/// Decodes every text chunk into records. All keys are surfaced; the rule
/// engine decides which matter.
pub fn parse_png_text(chunks: &[Chunk]) -> Result<MetadataRecordSet> {
    let mut records = MetadataRecordSet::default();
    for chunk in chunks {
        match &chunk.type_code {
            b"tEXt" => {
                let (keyword, value) = split_keyword(&chunk.payload)?;
                records.push(MetadataSource::PngText, latin1(keyword), latin1(value));
            }
            b"zTXt" => {
                let (keyword, rest) = split_keyword(&chunk.payload)?;
                let (&method, compressed) =
                    rest.split_first().ok_or_else(|| malformed("zTXt lacks method byte"))?;
                if method != 0 {
                    return Err(malformed(format!("zTXt compression method {method}")));
                }
                let inflated = inflate(compressed)?;
                records.push(MetadataSource::PngText, latin1(keyword), latin1(&inflated));
            }
            b"iTXt" => {
                let (keyword, rest) = split_keyword(&chunk.payload)?;
                let (&flag, rest) =
                    rest.split_first().ok_or_else(|| malformed("iTXt lacks compression flag"))?;
                let (&method, rest) =
                    rest.split_first().ok_or_else(|| malformed("iTXt lacks method byte"))?;
                let (_language, rest) = split_keyword(rest)
                    .map_err(|_| malformed("iTXt lacks language terminator"))?;
                let (_translated, text) = split_keyword(rest)
                    .map_err(|_| malformed("iTXt lacks translated-keyword terminator"))?;
                let raw = match (flag, method) {
                    (0, _) => text.to_vec(),
                    (1, 0) => inflate(text)?,
                    (flag, method) => {
                        return Err(malformed(format!(
                            "iTXt compression flag {flag} method {method}"
                        )))
                    }
                };
                let keyword = String::from_utf8(keyword.to_vec())
                    .unwrap_or_else(|_| latin1(keyword));
                let value = String::from_utf8(raw)
                    .unwrap_or_else(|e| binary_fallback(e.as_bytes()));
                records.push(MetadataSource::PngText, keyword, value);
            }
            _ => {}
        }
    }
    Ok(records)
}
