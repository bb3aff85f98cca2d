//! Synthetic base images for fixtures: structurally valid JPEG/PNG
//! containers with controllable metadata. Pixel payloads are filler; the
//! engine never decodes them.

use std::io::Write;

use flate2::{write::ZlibEncoder, Compression};

use crate::container::{crc32, ImageBytes, APP1, APP13, PNG_SIGNATURE, SOI};

#[derive(Debug, Clone, Default)]
pub struct JpegOptions {
    pub width: u16,
    pub height: u16,
    /// Entropy-coded filler length; roughly the "pixel data" size.
    pub entropy_len: usize,
    /// EXIF ASCII tags (tag id, value).
    pub exif_tags: Vec<(u16, String)>,
    /// IPTC datasets (dataset number, value).
    pub iptc_datasets: Vec<(u8, String)>,
    pub seed: u64,
}

/// Builds `Exif\0\0` + a little-endian TIFF with one IFD0 of ASCII tags.
pub fn exif_app1_payload(tags: &[(u16, String)]) -> Vec<u8> {
    let mut tiff = Vec::new();
    tiff.extend_from_slice(b"II");
    tiff.extend_from_slice(&42u16.to_le_bytes());
    tiff.extend_from_slice(&8u32.to_le_bytes());

    let entry_area_end = 8 + 2 + tags.len() * 12 + 4;
    let mut data_area: Vec<u8> = Vec::new();
    tiff.extend_from_slice(&(tags.len() as u16).to_le_bytes());
    for (tag, text) in tags {
        let mut value = text.as_bytes().to_vec();
        value.push(0);
        tiff.extend_from_slice(&tag.to_le_bytes());
        tiff.extend_from_slice(&2u16.to_le_bytes());
        tiff.extend_from_slice(&(value.len() as u32).to_le_bytes());
        if value.len() <= 4 {
            value.resize(4, 0);
            tiff.extend_from_slice(&value);
        } else {
            tiff.extend_from_slice(&((entry_area_end + data_area.len()) as u32).to_le_bytes());
            data_area.extend_from_slice(&value);
        }
    }
    tiff.extend_from_slice(&0u32.to_le_bytes());
    tiff.extend_from_slice(&data_area);

    let mut payload = b"Exif\0\0".to_vec();
    payload.extend_from_slice(&tiff);
    payload
}

/// Builds a Photoshop IRB holding IPTC application datasets.
pub fn iptc_app13_payload(datasets: &[(u8, String)]) -> Vec<u8> {
    let mut iptc = Vec::new();
    for (dataset, value) in datasets {
        iptc.push(0x1C);
        iptc.push(2);
        iptc.push(*dataset);
        iptc.extend_from_slice(&(value.len() as u16).to_be_bytes());
        iptc.extend_from_slice(value.as_bytes());
    }
    let mut out = b"Photoshop 3.0\0".to_vec();
    out.extend_from_slice(b"8BIM");
    out.extend_from_slice(&0x0404u16.to_be_bytes());
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(iptc.len() as u32).to_be_bytes());
    out.extend_from_slice(&iptc);
    if iptc.len() % 2 != 0 {
        out.push(0);
    }
    out
}

fn push_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.push(0xFF);
    out.push(marker);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

/// Deterministic filler that never emits 0xFF, keeping the scan grammar
/// intact without byte stuffing.
fn entropy_filler(len: usize, seed: u64) -> Vec<u8> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    (0..len)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) % 255) as u8 // 0..=254
        })
        .collect()
}

pub fn base_jpeg(options: &JpegOptions) -> ImageBytes {
    let mut out = SOI.to_vec();
    if !options.exif_tags.is_empty() {
        push_segment(&mut out, APP1, &exif_app1_payload(&options.exif_tags));
    }
    if !options.iptc_datasets.is_empty() {
        push_segment(&mut out, APP13, &iptc_app13_payload(&options.iptc_datasets));
    }

    // DQT: one 8-bit table of ones.
    let mut dqt = vec![0u8];
    dqt.extend_from_slice(&[1u8; 64]);
    push_segment(&mut out, 0xDB, &dqt);

    // SOF0: baseline, one component.
    let mut sof = vec![8u8];
    sof.extend_from_slice(&options.height.max(1).to_be_bytes());
    sof.extend_from_slice(&options.width.max(1).to_be_bytes());
    sof.extend_from_slice(&[1, 0x01, 0x11, 0]);
    push_segment(&mut out, 0xC0, &sof);

    // SOS header, then filler standing in for entropy-coded data.
    push_segment(&mut out, 0xDA, &[1, 0x01, 0x00, 0, 63, 0]);
    out.extend_from_slice(&entropy_filler(options.entropy_len, options.seed ^ 0xA5A5));
    out.extend_from_slice(&[0xFF, 0xD9]);
    ImageBytes::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PngTextChunk {
    Text,
    CompressedText,
    International,
}

#[derive(Debug, Clone, Default)]
pub struct PngOptions {
    pub width: u32,
    pub height: u32,
    pub text: Vec<(PngTextChunk, String, String)>,
    /// Raw IDAT filler length before compression.
    pub idat_len: usize,
    pub seed: u64,
}

fn push_chunk(out: &mut Vec<u8>, type_code: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    let start = out.len();
    out.extend_from_slice(type_code);
    out.extend_from_slice(payload);
    let crc = crc32(&out[start..]);
    out.extend_from_slice(&crc.to_be_bytes());
}

pub fn base_png(options: &PngOptions) -> ImageBytes {
    let mut out = PNG_SIGNATURE.to_vec();
    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&options.width.max(1).to_be_bytes());
    ihdr.extend_from_slice(&options.height.max(1).to_be_bytes());
    ihdr.extend_from_slice(&[8, 2, 0, 0, 0]); // 8-bit truecolor
    push_chunk(&mut out, b"IHDR", &ihdr);

    for (kind, key, value) in &options.text {
        match kind {
            PngTextChunk::Text => {
                let mut payload = key.as_bytes().to_vec();
                payload.push(0);
                payload.extend_from_slice(value.as_bytes());
                push_chunk(&mut out, b"tEXt", &payload);
            }
            PngTextChunk::CompressedText => {
                let mut encoder = ZlibEncoder::new(Vec::new(), Compression::default());
                encoder.write_all(value.as_bytes()).expect("in-memory write");
                let mut payload = key.as_bytes().to_vec();
                payload.extend_from_slice(&[0, 0]);
                payload.extend_from_slice(&encoder.finish().expect("in-memory finish"));
                push_chunk(&mut out, b"zTXt", &payload);
            }
            PngTextChunk::International => {
                let mut payload = key.as_bytes().to_vec();
                payload.extend_from_slice(&[0, 0, 0]);
                payload.extend_from_slice(b"\0\0");
                payload.extend_from_slice(value.as_bytes());
                push_chunk(&mut out, b"iTXt", &payload);
            }
        }
    }

    let raw = entropy_filler(options.idat_len, options.seed ^ 0x5A5A);
    let mut encoder = ZlibEncoder::new(Vec::new(), Compression::fast());
    encoder.write_all(&raw).expect("in-memory write");
    push_chunk(&mut out, b"IDAT", &encoder.finish().expect("in-memory finish"));
    push_chunk(&mut out, b"IEND", &[]);
    ImageBytes::new(out)
}
