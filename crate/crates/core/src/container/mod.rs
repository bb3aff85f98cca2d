//! Image container scanning: JPEG segments, PNG chunks, and extraction of
//! the embedded provenance payload with its covering byte ranges.

mod write;

pub use write::{
    embed_jumbf, embed_jumbf_jpeg_with_capacity, strip_provenance, DEFAULT_SEGMENT_CAPACITY,
};

use crate::error::{Error, Result};

// JPEG markers
pub const SOI: [u8; 2] = [0xFF, 0xD8];
pub const EOI: u8 = 0xD9;
pub const SOS: u8 = 0xDA;
pub const APP1: u8 = 0xE1;
pub const APP11: u8 = 0xEB;
pub const APP13: u8 = 0xED;
pub const COM: u8 = 0xFE;

pub const PNG_SIGNATURE: [u8; 8] = [0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A];

/// PNG chunk type carrying the provenance payload.
pub const PROVENANCE_CHUNK: [u8; 4] = *b"caBX";

/// Common identifier prefix of JPEG APP11 provenance segments.
pub const APP11_COMMON_ID: [u8; 2] = *b"JP";

/// Reassembled provenance payloads larger than this are rejected.
pub const MAX_JUMBF_SIZE: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImageFormat {
    Jpeg,
    Png,
    Unknown,
}

/// Immutable image bytes plus the detected container format.
#[derive(Debug, Clone)]
pub struct ImageBytes {
    bytes: Vec<u8>,
    format: ImageFormat,
}

impl ImageBytes {
    pub fn new(bytes: Vec<u8>) -> Self {
        let format = detect_format(&bytes);
        ImageBytes { bytes, format }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn format(&self) -> ImageFormat {
        self.format
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// A byte range within the container file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ByteRange {
    pub offset: u64,
    pub length: u64,
}

impl ByteRange {
    pub fn new(offset: u64, length: u64) -> Self {
        ByteRange { offset, length }
    }

    pub fn end(&self) -> u64 {
        self.offset + self.length
    }
}

/// One JPEG marker segment. `total_range` covers the two marker bytes,
/// the length field, and the payload.
#[derive(Debug, Clone)]
pub struct Segment {
    pub marker: u8,
    pub file_offset: u64,
    pub payload: Vec<u8>,
    pub total_range: ByteRange,
}

/// One PNG chunk. `total_range` covers length, type, payload, and CRC.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub type_code: [u8; 4],
    pub payload: Vec<u8>,
    pub crc_valid: bool,
    pub total_range: ByteRange,
}

/// Classifies the byte stream by its signature. Never errors.
pub fn detect_format(bytes: &[u8]) -> ImageFormat {
    if bytes.len() >= 2 && bytes[..2] == SOI {
        ImageFormat::Jpeg
    } else if bytes.len() >= 8 && bytes[..8] == PNG_SIGNATURE {
        ImageFormat::Png
    } else {
        ImageFormat::Unknown
    }
}

/// Walks JPEG markers from SOI to SOS/EOI, returning every APPn and COM
/// segment in file order. Entropy-coded data is never interpreted.
pub fn scan_jpeg_segments(image: &ImageBytes) -> Result<Vec<Segment>> {
    let bytes = image.bytes();
    if image.format() != ImageFormat::Jpeg {
        return Err(Error::MalformedContainer("not a JPEG stream".into()));
    }
    let mut segments = Vec::new();
    let mut pos = 2usize; // past SOI

    loop {
        // Expect a marker: 0xFF then a non-fill byte.
        let Some(&prefix) = bytes.get(pos) else {
            return Err(Error::MalformedContainer(
                "file ends without EOI or SOS".into(),
            ));
        };
        if prefix != 0xFF {
            return Err(Error::MalformedContainer(format!(
                "expected marker at offset {pos}, found 0x{prefix:02X}"
            )));
        }
        let mut marker_pos = pos;
        while bytes.get(marker_pos + 1) == Some(&0xFF) {
            marker_pos += 1; // fill bytes
        }
        let Some(&marker) = bytes.get(marker_pos + 1) else {
            return Err(Error::MalformedContainer("truncated marker".into()));
        };
        pos = marker_pos + 2;

        match marker {
            EOI | SOS => return Ok(segments),
            0x00 => {
                return Err(Error::MalformedContainer(format!(
                    "stuffed byte outside entropy data at offset {marker_pos}"
                )))
            }
            // TEM and RSTn are standalone markers with no length field.
            0x01 | 0xD0..=0xD7 => continue,
            _ => {
                let len_bytes = bytes
                    .get(pos..pos + 2)
                    .ok_or_else(|| Error::MalformedContainer("truncated length field".into()))?;
                let declared = u16::from_be_bytes([len_bytes[0], len_bytes[1]]) as usize;
                if declared < 2 {
                    return Err(Error::MalformedContainer(format!(
                        "segment length {declared} below minimum at offset {pos}"
                    )));
                }
                let payload_len = declared - 2;
                let payload = bytes.get(pos + 2..pos + 2 + payload_len).ok_or_else(|| {
                    Error::MalformedContainer(format!(
                        "segment at offset {marker_pos} declares length past end of file"
                    ))
                })?;
                if (0xE0..=0xEF).contains(&marker) || marker == COM {
                    segments.push(Segment {
                        marker,
                        file_offset: marker_pos as u64,
                        payload: payload.to_vec(),
                        total_range: ByteRange::new(marker_pos as u64, (2 + declared) as u64),
                    });
                }
                pos += 2 + payload_len;
            }
        }
    }
}

/// Returns all PNG chunks in order, including IEND, with per-chunk CRC
/// validity computed over type + payload.
pub fn scan_png_chunks(image: &ImageBytes) -> Result<Vec<Chunk>> {
    let bytes = image.bytes();
    if image.format() != ImageFormat::Png {
        return Err(Error::MalformedContainer("not a PNG stream".into()));
    }
    let mut chunks = Vec::new();
    let mut pos = 8usize; // past signature

    loop {
        if pos == bytes.len() {
            return Err(Error::MalformedContainer("missing IEND chunk".into()));
        }
        let header = bytes
            .get(pos..pos + 8)
            .ok_or_else(|| Error::MalformedContainer("truncated chunk header".into()))?;
        let length = u32::from_be_bytes(header[..4].try_into().unwrap()) as usize;
        let type_code: [u8; 4] = header[4..8].try_into().unwrap();
        let payload = bytes
            .get(pos + 8..pos + 8 + length)
            .ok_or_else(|| Error::MalformedContainer("chunk payload past end of file".into()))?;
        let crc_bytes = bytes
            .get(pos + 8 + length..pos + 12 + length)
            .ok_or_else(|| Error::MalformedContainer("truncated chunk CRC".into()))?;
        let stored_crc = u32::from_be_bytes(crc_bytes.try_into().unwrap());
        let computed = crc32(&bytes[pos + 4..pos + 8 + length]);

        chunks.push(Chunk {
            type_code,
            payload: payload.to_vec(),
            crc_valid: stored_crc == computed,
            total_range: ByteRange::new(pos as u64, (12 + length) as u64),
        });
        pos += 12 + length;

        if &type_code == b"IEND" {
            return Ok(chunks);
        }
    }
}

/// Result of looking for a provenance carrier in an image.
#[derive(Debug, Clone)]
pub enum JumbfExtraction {
    Present {
        jumbf: Vec<u8>,
        covered_ranges: Vec<ByteRange>,
    },
    Absent,
}

/// Extracts the embedded provenance payload. For JPEG this reassembles the
/// JUMBF superbox carried across APP11 segments (common identifier "JP",
/// 1-based packet sequence; continuation packets repeat the 8-byte box
/// header, which is dropped on reassembly). For PNG it returns the payload
/// of the `caBX` chunk. `covered_ranges` lists every file byte occupied by
/// the carrier, for use as hard-binding exclusions.
pub fn extract_jumbf(image: &ImageBytes) -> Result<JumbfExtraction> {
    match image.format() {
        ImageFormat::Jpeg => extract_jumbf_jpeg(image),
        ImageFormat::Png => extract_jumbf_png(image),
        ImageFormat::Unknown => Ok(JumbfExtraction::Absent),
    }
}

/// Per-segment header: CI ("JP") + En (u16) + Z (u32).
const APP11_HEADER_LEN: usize = 8;
/// Box length + box type repeated in continuation packets.
const BOX_HEADER_LEN: usize = 8;

fn extract_jumbf_jpeg(image: &ImageBytes) -> Result<JumbfExtraction> {
    let segments = scan_jpeg_segments(image)?;

    // Packets grouped by box instance number; (Z, payload, range).
    let mut groups: Vec<(u16, Vec<(u32, &Segment)>)> = Vec::new();
    for seg in &segments {
        if seg.marker != APP11 || seg.payload.len() < APP11_HEADER_LEN + BOX_HEADER_LEN {
            continue;
        }
        if seg.payload[..2] != APP11_COMMON_ID {
            continue;
        }
        let instance = u16::from_be_bytes([seg.payload[2], seg.payload[3]]);
        let sequence = u32::from_be_bytes(seg.payload[4..8].try_into().unwrap());
        match groups.iter_mut().find(|(en, _)| *en == instance) {
            Some((_, packets)) => packets.push((sequence, seg)),
            None => groups.push((instance, vec![(sequence, seg)])),
        }
    }

    // Keep only groups whose first packet carries a JUMBF superbox.
    groups.retain(|(_, packets)| {
        packets.iter().any(|(z, seg)| {
            *z == 1 && seg.payload[APP11_HEADER_LEN + 4..APP11_HEADER_LEN + 8] == *b"jumb"
        })
    });

    let (_, mut packets) = match groups.len() {
        0 => return Ok(JumbfExtraction::Absent),
        1 => groups.pop().unwrap(),
        n => {
            return Err(Error::MalformedContainer(format!(
                "{n} distinct provenance carriers present"
            )))
        }
    };

    packets.sort_by_key(|(z, _)| *z);
    let first_header = &packets[0].1.payload[APP11_HEADER_LEN..APP11_HEADER_LEN + BOX_HEADER_LEN];

    let mut jumbf = Vec::new();
    let mut covered_ranges = Vec::with_capacity(packets.len());
    for (index, (sequence, seg)) in packets.iter().enumerate() {
        let expected = (index + 1) as u32;
        if *sequence != expected {
            return Err(Error::MalformedContainer(format!(
                "provenance packet sequence expected {expected}, found {sequence}"
            )));
        }
        let body_start = if index == 0 {
            APP11_HEADER_LEN
        } else {
            // Continuation packets repeat LBox/TBox; they must match packet 1.
            let repeated = &seg.payload[APP11_HEADER_LEN..APP11_HEADER_LEN + BOX_HEADER_LEN];
            if repeated != first_header {
                return Err(Error::MalformedContainer(
                    "continuation packet repeats a different box header".into(),
                ));
            }
            APP11_HEADER_LEN + BOX_HEADER_LEN
        };
        if jumbf.len() + seg.payload.len() - body_start > MAX_JUMBF_SIZE {
            return Err(Error::MalformedContainer(
                "reassembled provenance payload exceeds size cap".into(),
            ));
        }
        jumbf.extend_from_slice(&seg.payload[body_start..]);
        covered_ranges.push(seg.total_range);
    }
    covered_ranges.sort();

    Ok(JumbfExtraction::Present {
        jumbf,
        covered_ranges,
    })
}

fn extract_jumbf_png(image: &ImageBytes) -> Result<JumbfExtraction> {
    let chunks = scan_png_chunks(image)?;
    let mut carriers = chunks
        .iter()
        .filter(|c| c.type_code == PROVENANCE_CHUNK)
        .collect::<Vec<_>>();
    match carriers.len() {
        0 => Ok(JumbfExtraction::Absent),
        1 => {
            let chunk = carriers.pop().unwrap();
            if chunk.payload.len() > MAX_JUMBF_SIZE {
                return Err(Error::MalformedContainer(
                    "provenance payload exceeds size cap".into(),
                ));
            }
            Ok(JumbfExtraction::Present {
                jumbf: chunk.payload.clone(),
                covered_ranges: vec![chunk.total_range],
            })
        }
        n => Err(Error::MalformedContainer(format!(
            "{n} provenance chunks present"
        ))),
    }
}

/// CRC-32 (IEEE 802.3, reflected) as used by PNG.
pub fn crc32(data: &[u8]) -> u32 {
    const TABLE: [u32; 256] = crc32_table();
    let mut crc = 0xFFFF_FFFFu32;
    for &byte in data {
        crc = TABLE[((crc ^ byte as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ 0xFFFF_FFFF
}

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut n = 0;
    while n < 256 {
        let mut c = n as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[n] = c;
        n += 1;
    }
    table
}
