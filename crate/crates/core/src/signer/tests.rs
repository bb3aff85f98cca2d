use super::*;
use crate::container::JumbfExtraction;
use crate::manifest::resolve_assertions;
use crate::trust::{verify_chain, verify_hard_binding, BindingVerdict, ChainStatus, TrustStore};
use chrono::TimeZone;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn fixed_now() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, 1, 12, 0, 0).unwrap()
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn small_jpeg() -> ImageBytes {
    base_jpeg(&JpegOptions {
        width: 64,
        height: 48,
        entropy_len: 2048,
        exif_tags: vec![
            (0x010F, "Acme".into()),
            (0x0110, "Shooter 9000".into()),
            (0x0131, "Acme Camera Firmware 1.0".into()),
        ],
        iptc_datasets: vec![(110, "Example News".into())],
        seed: 7,
    })
}

fn small_png() -> ImageBytes {
    base_png(&PngOptions {
        width: 64,
        height: 48,
        text: vec![(PngTextChunk::Text, "Software".into(), "painter".into())],
        idat_len: 2048,
        seed: 7,
    })
}

fn store_trusting(ca: &TestCa) -> TrustStore {
    let mut store = TrustStore::new();
    store.add_root_der(ca.root_der()).unwrap();
    store
}

fn identity(ca: &mut TestCa, seed: u64) -> SigningIdentity {
    let now = fixed_now();
    ca.issue_es256(
        "fixture signer",
        now - ChronoDuration::days(1),
        now + ChronoDuration::days(365),
        &mut rng(seed),
    )
    .unwrap()
}

#[test]
fn fixture_chain_verifies_as_trusted() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let result = verify_chain(&id.cert_chain, &store_trusting(&ca), fixed_now());
    assert_eq!(result.status, ChainStatus::Trusted);
    assert_eq!(result.chain_length, 2);
    assert!(result.leaf_subject.contains("fixture signer"));
}

#[test]
fn clock_skewed_verification_is_expired() {
    let now = fixed_now();
    let mut ca = make_test_ca("Fixture Root", now, 3650, &mut rng(1)).unwrap();
    let id = ca
        .issue_es256("short lived", now, now + ChronoDuration::days(1), &mut rng(2))
        .unwrap();
    let result = verify_chain(&id.cert_chain, &store_trusting(&ca), now + ChronoDuration::days(2));
    assert_eq!(result.status, ChainStatus::Expired);
}

#[test]
fn leaf_from_other_ca_is_untrusted() {
    let mut ca_a = make_test_ca("Root A", fixed_now(), 3650, &mut rng(1)).unwrap();
    let ca_b = make_test_ca("Root B", fixed_now(), 3650, &mut rng(2)).unwrap();
    let id = identity(&mut ca_a, 3);
    let result = verify_chain(&id.cert_chain, &store_trusting(&ca_b), fixed_now());
    assert_eq!(result.status, ChainStatus::Untrusted);
}

// Fixture certificates cross-checked with system certificate tooling
// when present; skipped silently otherwise.
#[test]
fn fixture_chain_verifies_under_openssl() {
    use std::io::Write as _;
    use std::process::Command;
    if Command::new("openssl").arg("version").output().is_err() {
        return;
    }
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);

    let dir = tempfile::tempdir().unwrap();
    let root_path = dir.path().join("root.pem");
    std::fs::write(&root_path, ca.root_pem().unwrap()).unwrap();
    let leaf_pem = {
        use x509_cert::der::{Decode, EncodePem};
        let cert = x509_cert::Certificate::from_der(&id.cert_chain[0]).unwrap();
        cert.to_pem(x509_cert::der::pem::LineEnding::LF).unwrap()
    };
    let leaf_path = dir.path().join("leaf.pem");
    std::fs::File::create(&leaf_path)
        .unwrap()
        .write_all(leaf_pem.as_bytes())
        .unwrap();

    let output = Command::new("openssl")
        .args(["verify", "-CAfile"])
        .arg(&root_path)
        .arg(&leaf_path)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "openssl rejected the fixture chain: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn assert_fully_valid(image: &ImageBytes, ca: &TestCa) {
    let JumbfExtraction::Present { jumbf, covered_ranges } = extract_jumbf(image).unwrap() else {
        panic!("carrier missing");
    };
    let store = parse_manifest_store(&parse_box_tree(&jumbf).unwrap()).unwrap();
    let active = store.active();

    assert!(resolve_assertions(active).iter().all(|(_, ok)| *ok));
    let chain = verify_chain(&active.signature.cert_chain, &store_trusting(ca), fixed_now());
    assert_eq!(chain.status, ChainStatus::Trusted);
    assert!(crate::trust::verify_claim_signature(&active.signature, &active.claim_bytes).unwrap());
    assert_eq!(verify_hard_binding(&active.hard_binding, image), BindingVerdict::Match);
    // Binding exclusions are exactly the carrier ranges.
    assert_eq!(active.hard_binding.exclusions, covered_ranges);
}

#[test]
fn signed_jpeg_round_trips_fully_valid() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let signed = sign_and_embed(
        &small_jpeg(),
        &id,
        &[capture_actions_assertion()],
        "Acme Camera Firmware 1.0",
        fixed_now(),
    )
    .unwrap();
    assert_fully_valid(&signed, &ca);
}

#[test]
fn signed_png_round_trips_fully_valid() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let signed = sign_and_embed(
        &small_png(),
        &id,
        &[capture_actions_assertion()],
        "Acme Camera Firmware 1.0",
        fixed_now(),
    )
    .unwrap();
    assert_fully_valid(&signed, &ca);
}

#[test]
fn rs256_identity_round_trips() {
    let now = fixed_now();
    let mut ca = make_test_ca("Fixture Root", now, 3650, &mut rng(1)).unwrap();
    let id = ca
        .issue_rs256(
            "rsa signer",
            now - ChronoDuration::days(1),
            now + ChronoDuration::days(365),
            1024,
            &mut rng(5),
        )
        .unwrap();
    let signed = sign_and_embed(&small_jpeg(), &id, &[], "RSA Fixture", now).unwrap();
    assert_fully_valid(&signed, &ca);
}

#[test]
fn output_is_deterministic() {
    let build = || {
        let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
        let id = identity(&mut ca, 2);
        sign_and_embed(&small_jpeg(), &id, &[], "Determinism", fixed_now())
            .unwrap()
            .into_bytes()
    };
    assert_eq!(build(), build());
}

#[test]
fn two_pass_binding_reproduces_embedded_digest() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let signed = sign_and_embed(&small_jpeg(), &id, &[], "Binding", fixed_now()).unwrap();

    let JumbfExtraction::Present { jumbf, .. } = extract_jumbf(&signed).unwrap() else {
        panic!("carrier missing");
    };
    let store = parse_manifest_store(&parse_box_tree(&jumbf).unwrap()).unwrap();
    let binding = &store.active().hard_binding;
    let recomputed = compute_content_hash(&signed, &binding.exclusions).unwrap();
    assert_eq!(recomputed, binding.expected_digest);
}

#[test]
fn multi_segment_carrier_still_verifies() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let signed = sign_and_embed_with_capacity(
        &small_jpeg(),
        &id,
        &[capture_actions_assertion()],
        "Multi-segment",
        fixed_now(),
        600,
    )
    .unwrap();
    let JumbfExtraction::Present { covered_ranges, .. } = extract_jumbf(&signed).unwrap() else {
        panic!("carrier missing");
    };
    assert!(covered_ranges.len() > 1, "expected a segmented carrier");
    assert_fully_valid(&signed, &ca);
}

#[test]
fn pixel_tamper_breaks_binding_and_carrier_tamper_does_not() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let signed = sign_and_embed(&small_jpeg(), &id, &[], "Tamper", fixed_now()).unwrap();
    let JumbfExtraction::Present { jumbf, covered_ranges } = extract_jumbf(&signed).unwrap() else {
        panic!("carrier missing");
    };
    let store = parse_manifest_store(&parse_box_tree(&jumbf).unwrap()).unwrap();
    let binding = store.active().hard_binding.clone();

    // Flip the last byte before EOI: outside the carrier.
    let mut tampered = signed.bytes().to_vec();
    let at = tampered.len() - 3;
    tampered[at] ^= 0x01;
    assert!(matches!(
        verify_hard_binding(&binding, &ImageBytes::new(tampered)),
        BindingVerdict::Mismatch { .. }
    ));

    // Flip a byte strictly inside an exclusion: binding unaffected.
    let mut excluded = signed.bytes().to_vec();
    let inside = covered_ranges[0].offset as usize + covered_ranges[0].length as usize / 2;
    excluded[inside] ^= 0x01;
    assert_eq!(
        verify_hard_binding(&binding, &ImageBytes::new(excluded)),
        BindingVerdict::Match
    );
}

#[test]
fn ingredient_chain_builds_expected_history() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    for steps in [1usize, 3] {
        let image = make_ingredient_chain(&small_png(), steps, &id, "Editor", fixed_now()).unwrap();
        let JumbfExtraction::Present { jumbf, .. } = extract_jumbf(&image).unwrap() else {
            panic!("carrier missing");
        };
        let store = parse_manifest_store(&parse_box_tree(&jumbf).unwrap()).unwrap();
        assert_eq!(store.manifests.len(), steps);
        let history = crate::manifest::extract_edit_history(&store);
        assert_eq!(history.len(), steps);
        // Oldest first; the active manifest closes the list.
        assert_eq!(history.last().unwrap().manifest_label, store.active_label);
        assert!(history.iter().all(|e| !e.cycle_detected));
        // Each step still verifies as a whole.
        assert_fully_valid(&image, &ca);
    }
}

#[test]
fn unknown_format_is_rejected() {
    let mut ca = make_test_ca("Fixture Root", fixed_now(), 3650, &mut rng(1)).unwrap();
    let id = identity(&mut ca, 2);
    let err = sign_and_embed(
        &ImageBytes::new(b"plain text".to_vec()),
        &id,
        &[],
        "X",
        fixed_now(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::UnsupportedFormat));
}
