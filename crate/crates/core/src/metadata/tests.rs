use super::*;
use crate::container::{scan_png_chunks, ImageBytes, PNG_SIGNATURE};
use crate::error::Error;
use proptest::prelude::*;

// --- EXIF fixtures, laid out by hand against the TIFF IFD grammar ---

enum Order {
    Le,
    Be,
}

fn exif_with_ascii_tags(order: Order, tags: &[(u16, &str)]) -> Vec<u8> {
    let (bom, u16b, u32b): (&[u8], fn(u16) -> [u8; 2], fn(u32) -> [u8; 4]) = match order {
        Order::Le => (b"II", u16::to_le_bytes, u32::to_le_bytes),
        Order::Be => (b"MM", u16::to_be_bytes, u32::to_be_bytes),
    };
    let mut tiff = Vec::new();
    tiff.extend_from_slice(bom);
    tiff.extend_from_slice(&u16b(42));
    tiff.extend_from_slice(&u32b(8)); // IFD0 right after header

    let entry_area = 8 + 2 + tags.len() * 12 + 4;
    let mut data_area: Vec<u8> = Vec::new();

    tiff.extend_from_slice(&u16b(tags.len() as u16));
    for (tag, text) in tags {
        let mut value = text.as_bytes().to_vec();
        value.push(0);
        tiff.extend_from_slice(&u16b(*tag));
        tiff.extend_from_slice(&u16b(2)); // ASCII
        tiff.extend_from_slice(&u32b(value.len() as u32));
        if value.len() <= 4 {
            value.resize(4, 0);
            tiff.extend_from_slice(&value);
        } else {
            let offset = entry_area + data_area.len();
            tiff.extend_from_slice(&u32b(offset as u32));
            data_area.extend_from_slice(&value);
        }
    }
    tiff.extend_from_slice(&u32b(0)); // no next IFD
    tiff.extend_from_slice(&data_area);

    let mut payload = b"Exif\0\0".to_vec();
    payload.extend_from_slice(&tiff);
    payload
}

#[test]
fn exif_software_tag_decodes() {
    let payload = exif_with_ascii_tags(Order::Le, &[(0x0131, "Stable Diffusion v1.5")]);
    let records = parse_exif(&payload).unwrap();
    assert_eq!(
        records.value(MetadataSource::Exif, "Software"),
        Some("Stable Diffusion v1.5")
    );
}

#[test]
fn exif_big_endian_decodes() {
    let payload = exif_with_ascii_tags(
        Order::Be,
        &[(0x010F, "Acme"), (0x0110, "Shooter 9000"), (0x010E, "hi")],
    );
    let records = parse_exif(&payload).unwrap();
    assert_eq!(records.value(MetadataSource::Exif, "Make"), Some("Acme"));
    assert_eq!(
        records.value(MetadataSource::Exif, "Model"),
        Some("Shooter 9000")
    );
    assert_eq!(
        records.value(MetadataSource::Exif, "ImageDescription"),
        Some("hi")
    );
}

#[test]
fn exif_empty_ifd_yields_empty_set() {
    let payload = exif_with_ascii_tags(Order::Le, &[]);
    assert!(parse_exif(&payload).unwrap().is_empty());
}

#[test]
fn exif_ifd_self_loop_is_malformed() {
    // IFD0 at offset 8 with zero entries whose next-IFD pointer is 8.
    let mut payload = b"Exif\0\0".to_vec();
    payload.extend_from_slice(b"II");
    payload.extend_from_slice(&42u16.to_le_bytes());
    payload.extend_from_slice(&8u32.to_le_bytes());
    payload.extend_from_slice(&0u16.to_le_bytes());
    payload.extend_from_slice(&8u32.to_le_bytes());
    assert!(matches!(
        parse_exif(&payload),
        Err(Error::MalformedMetadata(_))
    ));
}

#[test]
fn exif_requires_identifier_and_valid_header() {
    assert!(parse_exif(b"not exif").is_err());
    assert!(parse_exif(b"Exif\0\0XX\x2a\x00").is_err());
    assert!(parse_exif(b"Exif\0\0II\x2b\x00\x08\x00\x00\x00").is_err());
}

#[test]
fn exif_sub_ifd_and_user_comment() {
    // IFD0: one Exif-IFD pointer. Sub-IFD: DateTimeOriginal + UserComment.
    let mut tiff: Vec<u8> = Vec::new();
    tiff.extend_from_slice(b"II");
    tiff.extend_from_slice(&42u16.to_le_bytes());
    tiff.extend_from_slice(&8u32.to_le_bytes());
    // IFD0 at 8: 1 entry + next-IFD → ends at 8+2+12+4 = 26
    tiff.extend_from_slice(&1u16.to_le_bytes());
    tiff.extend_from_slice(&0x8769u16.to_le_bytes());
    tiff.extend_from_slice(&4u16.to_le_bytes());
    tiff.extend_from_slice(&1u32.to_le_bytes());
    tiff.extend_from_slice(&26u32.to_le_bytes()); // sub-IFD offset
    tiff.extend_from_slice(&0u32.to_le_bytes());
    // Sub-IFD at 26: 2 entries, ends at 26+2+24+4 = 56
    let comment = b"ASCII\0\0\0made by hand";
    tiff.extend_from_slice(&2u16.to_le_bytes());
    tiff.extend_from_slice(&0x9003u16.to_le_bytes());
    tiff.extend_from_slice(&2u16.to_le_bytes());
    tiff.extend_from_slice(&20u32.to_le_bytes());
    tiff.extend_from_slice(&56u32.to_le_bytes());
    tiff.extend_from_slice(&0x9286u16.to_le_bytes());
    tiff.extend_from_slice(&7u16.to_le_bytes()); // UNDEFINED
    tiff.extend_from_slice(&(comment.len() as u32).to_le_bytes());
    tiff.extend_from_slice(&76u32.to_le_bytes());
    tiff.extend_from_slice(&0u32.to_le_bytes());
    tiff.extend_from_slice(b"2024:05:01 12:00:00\0"); // at 56, 20 bytes
    tiff.extend_from_slice(comment); // at 76

    let mut payload = b"Exif\0\0".to_vec();
    payload.extend_from_slice(&tiff);
    let records = parse_exif(&payload).unwrap();
    assert_eq!(
        records.value(MetadataSource::Exif, "DateTimeOriginal"),
        Some("2024:05:01 12:00:00")
    );
    assert_eq!(
        records.value(MetadataSource::Exif, "UserComment"),
        Some("made by hand")
    );
}

#[test]
fn exif_parse_is_total_on_junk() {
    for len in 0..64 {
        let junk: Vec<u8> = (0..len).map(|i| (i * 37 % 256) as u8).collect();
        let _ = parse_exif(&junk);
        let mut prefixed = b"Exif\0\0".to_vec();
        prefixed.extend_from_slice(&junk);
        let _ = parse_exif(&prefixed);
    }
}

// --- IPTC fixtures per the IIM dataset grammar ---

fn irb_with_datasets(datasets: &[(u8, &[u8])]) -> Vec<u8> {
    let mut iptc = Vec::new();
    for (dataset, body) in datasets {
        iptc.push(0x1C);
        iptc.push(2);
        iptc.push(*dataset);
        iptc.extend_from_slice(&(body.len() as u16).to_be_bytes());
        iptc.extend_from_slice(body);
    }
    let mut out = b"Photoshop 3.0\0".to_vec();
    out.extend_from_slice(b"8BIM");
    out.extend_from_slice(&0x0404u16.to_be_bytes());
    out.extend_from_slice(&[0, 0]); // empty pascal name, padded
    out.extend_from_slice(&(iptc.len() as u32).to_be_bytes());
    out.extend_from_slice(&iptc);
    if iptc.len() % 2 != 0 {
        out.push(0);
    }
    out
}

#[test]
fn iptc_credit_dataset_decodes() {
    let payload = irb_with_datasets(&[(110, b"Example News")]);
    let records = parse_iptc(&payload).unwrap();
    assert_eq!(
        records.value(MetadataSource::Iptc, "Credit"),
        Some("Example News")
    );
}

#[test]
fn iptc_caption_source_and_ignored_datasets() {
    let payload = irb_with_datasets(&[(120, b"A caption"), (115, b"Wire"), (5, b"ignored")]);
    let records = parse_iptc(&payload).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(
        records.value(MetadataSource::Iptc, "Caption"),
        Some("A caption")
    );
    assert_eq!(records.value(MetadataSource::Iptc, "Source"), Some("Wire"));
}

#[test]
fn iptc_without_signature_is_empty() {
    assert!(parse_iptc(b"anything else").unwrap().is_empty());
    assert!(parse_iptc(b"").unwrap().is_empty());
}

#[test]
fn iptc_overrunning_dataset_is_malformed() {
    let mut payload = irb_with_datasets(&[(110, b"Example News")]);
    let cut = payload.len() - 6;
    payload.truncate(cut);
    assert!(matches!(
        parse_iptc(&payload),
        Err(Error::MalformedMetadata(_))
    ));
}

// --- PNG text ---

fn png_with_chunks(extra: &[(&[u8; 4], Vec<u8>)]) -> Vec<Chunk> {
    use crate::container::crc32;
    let mut bytes = PNG_SIGNATURE.to_vec();
    let mut add = |tc: &[u8; 4], payload: &[u8]| {
        bytes.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        let body_start = bytes.len();
        bytes.extend_from_slice(tc);
        bytes.extend_from_slice(payload);
        let crc = crc32(&bytes[body_start..]);
        bytes.extend_from_slice(&crc.to_be_bytes());
    };
    add(b"IHDR", &[0; 13]);
    for (tc, payload) in extra {
        add(tc, payload);
    }
    add(b"IEND", &[]);
    scan_png_chunks(&ImageBytes::new(bytes)).unwrap()
}

use crate::container::Chunk;

#[test]
fn text_chunk_parameters_decodes() {
    let value = "masterpiece, Negative prompt: blur, Steps: 20";
    let chunks = png_with_chunks(&[(b"tEXt", format!("parameters\0{value}").into_bytes())]);
    let records = parse_png_text(&chunks).unwrap();
    assert_eq!(
        records.value(MetadataSource::PngText, "parameters"),
        Some(value)
    );
}

#[test]
fn no_text_chunks_yields_empty_set() {
    let chunks = png_with_chunks(&[]);
    assert!(parse_png_text(&chunks).unwrap().is_empty());
}

#[test]
fn ztxt_round_trips_through_deflate() {
    use flate2::{write::ZlibEncoder, Compression};
    use std::io::Write;
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(b"Midjourney v6 render").unwrap();
    let compressed = enc.finish().unwrap();
    let mut payload = b"Description\0\0".to_vec();
    payload.extend_from_slice(&compressed);
    let chunks = png_with_chunks(&[(b"zTXt", payload)]);
    let records = parse_png_text(&chunks).unwrap();
    assert_eq!(
        records.value(MetadataSource::PngText, "Description"),
        Some("Midjourney v6 render")
    );
}

#[test]
fn corrupt_ztxt_stream_is_malformed() {
    let payload = b"Description\0\0this is not deflate".to_vec();
    let chunks = png_with_chunks(&[(b"zTXt", payload)]);
    assert!(matches!(
        parse_png_text(&chunks),
        Err(Error::MalformedMetadata(_))
    ));
}

#[test]
fn itxt_plain_and_compressed() {
    use flate2::{write::ZlibEncoder, Compression};
    use std::io::Write;
    let plain = b"Software\0\0\0en\0\0DALL-E 3".to_vec();

    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all("prompt: ein Stillleben".as_bytes()).unwrap();
    let mut compressed = b"Comment\0\x01\0de\0\0".to_vec();
    compressed.extend_from_slice(&enc.finish().unwrap());

    let chunks = png_with_chunks(&[(b"iTXt", plain), (b"iTXt", compressed)]);
    let records = parse_png_text(&chunks).unwrap();
    assert_eq!(
        records.value(MetadataSource::PngText, "Software"),
        Some("DALL-E 3")
    );
    assert_eq!(
        records.value(MetadataSource::PngText, "Comment"),
        Some("prompt: ein Stillleben")
    );
}

// --- Rule engine ---

fn record_set(entries: &[(MetadataSource, &str, &str)]) -> MetadataRecordSet {
    let mut set = MetadataRecordSet::default();
    for (source, key, value) in entries {
        set.push(*source, *key, *value);
    }
    set
}

#[test]
fn default_rules_load_and_match_stable_diffusion() {
    let rules = default_rules();
    let records = record_set(&[(MetadataSource::Exif, "Software", "Stable Diffusion v1.5")]);
    let matches = detect_ai_signatures(&records, &rules);
    assert_eq!(matches.len(), 1);
    assert_eq!(matches[0].generator_name, "Stable Diffusion");
    assert_eq!(matches[0].matched_key, "Software");
}

#[test]
fn empty_records_match_nothing() {
    assert!(detect_ai_signatures(&MetadataRecordSet::default(), &default_rules()).is_empty());
}

#[test]
fn description_with_midjourney_matches() {
    let records = record_set(&[(
        MetadataSource::Exif,
        "ImageDescription",
        "rendered with Midjourney",
    )]);
    let matches = detect_ai_signatures(&records, &default_rules());
    assert_eq!(matches.len(), 1);
    assert_eq!(matches[0].generator_name, "Midjourney");
}

#[test]
fn scoped_rule_ignores_other_fields() {
    let rules = vec![AiSignatureRule {
        rule_id: "r".into(),
        field_scope: FieldScope::PngParameters,
        pattern: "steps:".into(),
        generator_name: "G".into(),
    }];
    let wrong_field = record_set(&[(MetadataSource::Exif, "Software", "Steps: 20")]);
    assert!(detect_ai_signatures(&wrong_field, &rules).is_empty());
    let right_field = record_set(&[(MetadataSource::PngText, "parameters", "Steps: 20")]);
    assert_eq!(detect_ai_signatures(&right_field, &rules).len(), 1);
}

#[test]
fn match_order_is_record_then_rule() {
    let records = record_set(&[
        (MetadataSource::PngText, "parameters", "midjourney dall-e"),
        (MetadataSource::Exif, "Software", "midjourney"),
    ]);
    let ids: Vec<String> = detect_ai_signatures(&records, &default_rules())
        .into_iter()
        .map(|m| m.rule_id)
        .collect();
    assert_eq!(ids, ["dall-e", "midjourney", "midjourney"]);
}

#[test]
fn rule_table_validation() {
    assert!(load_rules("not json").is_err());
    let dup = r#"[
        {"rule_id":"a","field_scope":"any_text","pattern":"x","generator_name":"X"},
        {"rule_id":"a","field_scope":"any_text","pattern":"y","generator_name":"Y"}
    ]"#;
    assert!(load_rules(dup).is_err());
    let empty_pattern =
        r#"[{"rule_id":"a","field_scope":"any_text","pattern":"","generator_name":"X"}]"#;
    assert!(load_rules(empty_pattern).is_err());
}

proptest! {
    #[test]
    fn matching_is_case_insensitive(flags in proptest::collection::vec(any::<bool>(), 16)) {
        let base = "stable diffusion";
        let cased: String = base
            .chars()
            .zip(flags.iter().cycle())
            .map(|(c, upper)| if *upper { c.to_ascii_uppercase() } else { c })
            .collect();
        let records = record_set(&[(MetadataSource::Exif, "Software", cased.as_str())]);
        let matches = detect_ai_signatures(&records, &default_rules());
        prop_assert_eq!(matches.len(), 1);
        prop_assert_eq!(matches[0].generator_name.as_str(), "Stable Diffusion");
    }

    #[test]
    fn adding_records_never_removes_matches(
        extra in proptest::collection::vec("[ -~]{0,24}", 0..6)
    ) {
        let rules = default_rules();
        let mut records = record_set(&[(MetadataSource::Exif, "Software", "DALL-E 3")]);
        let before = detect_ai_signatures(&records, &rules);
        for value in &extra {
            records.push(MetadataSource::PngText, "note", value.clone());
        }
        let after = detect_ai_signatures(&records, &rules);
        for m in &before {
            prop_assert!(after.contains(m));
        }
    }

    #[test]
    fn excerpt_is_substring_of_matched_value(value in "[ -~]{0,120}") {
        let spiked = format!("{value} midjourney {value}");
        let records = record_set(&[(MetadataSource::PngText, "note", spiked.as_str())]);
        for m in detect_ai_signatures(&records, &default_rules()) {
            prop_assert!(spiked.contains(&m.matched_excerpt));
            prop_assert!(m.matched_excerpt.chars().count() <= 80);
        }
    }
}
