//! Deterministic fixture corpus: six verification scenarios in both
//! container formats, plus the companion trust material.

use chrono::{DateTime, Duration as ChronoDuration, Utc};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    ai_actions_assertion, base_jpeg, base_png, capture_actions_assertion, make_test_ca,
    sign_and_embed, JpegOptions, PngOptions, PngTextChunk,
};
use crate::container::{scan_png_chunks, strip_provenance, ImageBytes, ImageFormat};
use crate::error::Result;

/// Verification outcome a corpus file is built to produce when analyzed
/// with the companion trust store at the corpus clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntendedStatus {
    Verified,
    AiGenerated,
    Warning,
    Invalid,
    NoData,
}

impl IntendedStatus {
    pub fn token(self) -> &'static str {
        match self {
            IntendedStatus::Verified => "verified",
            IntendedStatus::AiGenerated => "ai_generated",
            IntendedStatus::Warning => "warning",
            IntendedStatus::Invalid => "invalid",
            IntendedStatus::NoData => "no_data",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusFile {
    pub name: String,
    pub intended: IntendedStatus,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub files: Vec<CorpusFile>,
    /// PEM bundle holding the trusted fixture root.
    pub roots_pem: String,
    pub now: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusOptions {
    pub seed: u64,
    pub now: DateTime<Utc>,
}

fn base_image(format: ImageFormat, seed: u64) -> ImageBytes {
    match format {
        ImageFormat::Jpeg => base_jpeg(&JpegOptions {
            width: 96,
            height: 64,
            entropy_len: 8 * 1024,
            exif_tags: vec![
                (0x010F, "Acme".into()),
                (0x0110, "Shooter 9000".into()),
                (0x0131, "Acme Camera Firmware 1.0".into()),
                (0x0132, "2026:01:15 09:30:00".into()),
            ],
            iptc_datasets: vec![(110, "Example News".into())],
            seed,
        }),
        ImageFormat::Png => base_png(&PngOptions {
            width: 96,
            height: 64,
            text: vec![(PngTextChunk::Text, "Software".into(), "painter 2.1".into())],
            idat_len: 8 * 1024,
            seed,
        }),
        ImageFormat::Unknown => unreachable!("corpus formats are fixed"),
    }
}

/// Flips one deterministic byte outside the provenance carrier: the tail
/// of the entropy-coded data (JPEG) or the middle of IDAT (PNG).
fn tamper_outside_carrier(image: &ImageBytes) -> ImageBytes {
    let mut bytes = image.bytes().to_vec();
    let at = match image.format() {
        ImageFormat::Jpeg => bytes.len() - 3,
        ImageFormat::Png => {
            let chunks = scan_png_chunks(image).expect("corpus png scans");
            let idat = chunks
                .iter()
                .find(|c| &c.type_code == b"IDAT")
                .expect("corpus png has IDAT");
            (idat.total_range.offset + 8 + idat.total_range.length.saturating_sub(12) / 2) as usize
        }
        ImageFormat::Unknown => unreachable!(),
    };
    bytes[at] ^= 0x01;
    ImageBytes::new(bytes)
}

/// Builds the full corpus in memory. Output is byte-identical for equal
/// seed and clock.
pub fn build_corpus(options: &CorpusOptions) -> Result<Corpus> {
    let now = options.now;
    let mut rng = ChaCha20Rng::seed_from_u64(options.seed);

    let mut trusted_ca = make_test_ca("Origin Lens Fixture Root", now, 3650, &mut rng)?;
    let mut rogue_ca = make_test_ca("Origin Lens Rogue Root", now, 3650, &mut rng)?;

    let valid_id = trusted_ca.issue_es256(
        "corpus signer",
        now - ChronoDuration::days(1),
        now + ChronoDuration::days(3650),
        &mut rng,
    )?;
    let expired_id = trusted_ca.issue_es256(
        "corpus signer (expired)",
        now - ChronoDuration::days(730),
        now - ChronoDuration::days(365),
        &mut rng,
    )?;
    let rogue_id = rogue_ca.issue_es256(
        "rogue signer",
        now - ChronoDuration::days(1),
        now + ChronoDuration::days(3650),
        &mut rng,
    )?;

    let mut files = Vec::new();
    for (format, extension) in [(ImageFormat::Jpeg, "jpg"), (ImageFormat::Png, "png")] {
        let base = base_image(format, options.seed ^ extension.len() as u64);

        let clean = sign_and_embed(
            &base,
            &valid_id,
            &[capture_actions_assertion()],
            "Acme Camera Firmware 1.0",
            now,
        )?;
        let ai = sign_and_embed(
            &base,
            &valid_id,
            &[ai_actions_assertion("Adobe Firefly 2.0")],
            "Adobe Firefly 2.0",
            now,
        )?;
        let tampered = tamper_outside_carrier(&clean);
        let stripped = strip_provenance(&clean)?;
        let expired = sign_and_embed(
            &base,
            &expired_id,
            &[capture_actions_assertion()],
            "Acme Camera Firmware 1.0",
            now - ChronoDuration::days(400),
        )?;
        let untrusted = sign_and_embed(
            &base,
            &rogue_id,
            &[capture_actions_assertion()],
            "Acme Camera Firmware 1.0",
            now,
        )?;

        let variants: [(&str, IntendedStatus, ImageBytes); 6] = [
            ("clean", IntendedStatus::Verified, clean),
            ("ai", IntendedStatus::AiGenerated, ai),
            ("tampered", IntendedStatus::Invalid, tampered),
            ("stripped", IntendedStatus::NoData, stripped),
            ("expired", IntendedStatus::Warning, expired),
            ("untrusted", IntendedStatus::Invalid, untrusted),
        ];
        for (name, intended, image) in variants {
            files.push(CorpusFile {
                name: format!("{name}.{extension}"),
                intended,
                bytes: image.into_bytes(),
            });
        }
    }

    Ok(Corpus {
        files,
        roots_pem: trusted_ca.root_pem()?,
        now,
    })
}

/// Writes the corpus to `dir`: every variant file, `roots.pem`, and an
/// `expected.json` map of file name to intended status.
pub fn write_corpus(dir: &std::path::Path, options: &CorpusOptions) -> Result<Vec<String>> {
    let corpus = build_corpus(options)?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for file in &corpus.files {
        std::fs::write(dir.join(&file.name), &file.bytes)?;
        written.push(file.name.clone());
    }
    std::fs::write(dir.join("roots.pem"), corpus.roots_pem.as_bytes())?;
    written.push("roots.pem".into());

    let expected: Vec<String> = corpus
        .files
        .iter()
        .map(|f| format!("  \"{}\": \"{}\"", f.name, f.intended.token()))
        .collect();
    let expected_json = format!("{{\n{}\n}}\n", expected.join(",\n"));
    std::fs::write(dir.join("expected.json"), expected_json)?;
    written.push("expected.json".into());
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn options() -> CorpusOptions {
        CorpusOptions {
            seed: 42,
            now: Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap(),
        }
    }

    #[test]
    fn corpus_contains_all_variants_in_both_formats() {
        let corpus = build_corpus(&options()).unwrap();
        assert_eq!(corpus.files.len(), 12);
        for ext in ["jpg", "png"] {
            for name in ["clean", "ai", "tampered", "stripped", "expired", "untrusted"] {
                assert!(
                    corpus.files.iter().any(|f| f.name == format!("{name}.{ext}")),
                    "missing {name}.{ext}"
                );
            }
        }
        assert!(corpus.roots_pem.contains("BEGIN CERTIFICATE"));
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = build_corpus(&options()).unwrap();
        let b = build_corpus(&options()).unwrap();
        assert_eq!(a.roots_pem, b.roots_pem);
        for (x, y) in a.files.iter().zip(&b.files) {
            assert_eq!(x.name, y.name);
            assert_eq!(x.bytes, y.bytes, "{} differs between runs", x.name);
        }
    }

    #[test]
    fn different_seed_changes_key_material() {
        let a = build_corpus(&options()).unwrap();
        let b = build_corpus(&CorpusOptions {
            seed: 43,
            ..options()
        })
        .unwrap();
        assert_ne!(a.roots_pem, b.roots_pem);
    }

    #[test]
    fn write_corpus_emits_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let written = write_corpus(dir.path(), &options()).unwrap();
        assert_eq!(written.len(), 14); // 12 images + roots.pem + expected.json
        for name in &written {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let expected: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("expected.json")).unwrap())
                .unwrap();
        assert_eq!(expected["clean.jpg"], "verified");
        assert_eq!(expected["untrusted.png"], "invalid");
    }
}
