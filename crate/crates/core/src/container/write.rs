//! Carrier emission: embedding a JUMBF payload into JPEG/PNG containers and
//! stripping it back out. Used by the fixture signer and tamper tests.

use super::{
    crc32, scan_jpeg_segments, scan_png_chunks, ByteRange, ImageBytes, ImageFormat, APP11,
    APP11_COMMON_ID, PROVENANCE_CHUNK,
};
use crate::error::{Error, Result};

/// Largest JUMBF body carried per APP11 segment. Leaves room for the
/// segment length field, the common identifier header, and the repeated
/// box header within the 65535-byte marker limit.
pub const DEFAULT_SEGMENT_CAPACITY: usize = 60_000;

/// Embeds `jumbf` into the image, returning the new file plus the byte
/// ranges occupied by the carrier (the hard-binding exclusions).
pub fn embed_jumbf(image: &ImageBytes, jumbf: &[u8]) -> Result<(ImageBytes, Vec<ByteRange>)> {
    match image.format() {
        ImageFormat::Jpeg => embed_jumbf_jpeg_with_capacity(image, jumbf, DEFAULT_SEGMENT_CAPACITY),
        ImageFormat::Png => embed_jumbf_png(image, jumbf),
        ImageFormat::Unknown => Err(Error::UnsupportedFormat),
    }
}

/// JPEG embedding with an explicit per-segment body capacity, so tests can
/// force multi-segment reassembly with small payloads.
pub fn embed_jumbf_jpeg_with_capacity(
    image: &ImageBytes,
    jumbf: &[u8],
    capacity: usize,
) -> Result<(ImageBytes, Vec<ByteRange>)> {
    if image.format() != ImageFormat::Jpeg {
        return Err(Error::UnsupportedFormat);
    }
    if jumbf.len() < 8 {
        return Err(Error::InvalidTree("payload shorter than a box header".into()));
    }
    assert!(capacity >= 16, "segment capacity too small to carry a packet");

    let box_header: [u8; 8] = jumbf[..8].try_into().unwrap();
    let mut out = Vec::with_capacity(image.len() + jumbf.len() + 64);
    out.extend_from_slice(&image.bytes()[..2]); // SOI

    let mut ranges = Vec::new();
    let mut remaining = jumbf;
    let mut sequence: u32 = 1;
    while !remaining.is_empty() {
        // Continuation packets repeat the box header after the CI/En/Z
        // prefix, so their body share shrinks accordingly.
        let body_budget = if sequence == 1 { capacity } else { capacity - 8 };
        let take = body_budget.min(remaining.len());
        let (body, rest) = remaining.split_at(take);
        remaining = rest;

        let mut payload = Vec::with_capacity(16 + take);
        payload.extend_from_slice(&APP11_COMMON_ID);
        payload.extend_from_slice(&1u16.to_be_bytes()); // box instance
        payload.extend_from_slice(&sequence.to_be_bytes());
        if sequence > 1 {
            payload.extend_from_slice(&box_header);
        }
        payload.extend_from_slice(body);

        let declared = (payload.len() + 2) as u16;
        let start = out.len() as u64;
        out.push(0xFF);
        out.push(APP11);
        out.extend_from_slice(&declared.to_be_bytes());
        out.extend_from_slice(&payload);
        ranges.push(ByteRange::new(start, (2 + declared) as u64));
        sequence += 1;
    }

    out.extend_from_slice(&image.bytes()[2..]);
    Ok((ImageBytes::new(out), ranges))
}

fn embed_jumbf_png(image: &ImageBytes, jumbf: &[u8]) -> Result<(ImageBytes, Vec<ByteRange>)> {
    let chunks = scan_png_chunks(image)?;
    let ihdr = chunks
        .iter()
        .find(|c| &c.type_code == b"IHDR")
        .ok_or_else(|| Error::MalformedContainer("PNG lacks IHDR".into()))?;
    let insert_at = ihdr.total_range.end() as usize;

    let mut chunk = Vec::with_capacity(12 + jumbf.len());
    chunk.extend_from_slice(&(jumbf.len() as u32).to_be_bytes());
    chunk.extend_from_slice(&PROVENANCE_CHUNK);
    chunk.extend_from_slice(jumbf);
    let crc = crc32(&chunk[4..]);
    chunk.extend_from_slice(&crc.to_be_bytes());

    let mut out = Vec::with_capacity(image.len() + chunk.len());
    out.extend_from_slice(&image.bytes()[..insert_at]);
    out.extend_from_slice(&chunk);
    out.extend_from_slice(&image.bytes()[insert_at..]);

    let range = ByteRange::new(insert_at as u64, chunk.len() as u64);
    Ok((ImageBytes::new(out), vec![range]))
}

/// Re-emits the container without its provenance carrier, leaving all
/// other bytes untouched.
pub fn strip_provenance(image: &ImageBytes) -> Result<ImageBytes> {
    let carrier_ranges: Vec<ByteRange> = match image.format() {
        ImageFormat::Jpeg => scan_jpeg_segments(image)?
            .iter()
            .filter(|s| {
                s.marker == APP11
                    && s.payload.len() >= 16
                    && s.payload[..2] == APP11_COMMON_ID
                    && (s.payload[12..16] == *b"jumb" || {
                        // Continuation packets carry the repeated header at
                        // the same offset; match them by CI alone.
                        u32::from_be_bytes(s.payload[4..8].try_into().unwrap()) > 1
                    })
            })
            .map(|s| s.total_range)
            .collect(),
        ImageFormat::Png => scan_png_chunks(image)?
            .iter()
            .filter(|c| c.type_code == PROVENANCE_CHUNK)
            .map(|c| c.total_range)
            .collect(),
        ImageFormat::Unknown => return Err(Error::UnsupportedFormat),
    };

    let mut out = Vec::with_capacity(image.len());
    let mut pos = 0u64;
    for range in &carrier_ranges {
        out.extend_from_slice(&image.bytes()[pos as usize..range.offset as usize]);
        pos = range.end();
    }
    out.extend_from_slice(&image.bytes()[pos as usize..]);
    Ok(ImageBytes::new(out))
}
