use super::testing::*;
use super::*;
use chrono::TimeZone;

#[test]
fn color_mapping_is_fixed_for_all_statuses() {
    assert_eq!(color_for(Status::Verified), Color::Green);
    assert_eq!(color_for(Status::AiGenerated), Color::Purple);
    assert_eq!(color_for(Status::Warning), Color::Orange);
    assert_eq!(color_for(Status::Invalid), Color::Red);
    assert_eq!(color_for(Status::NoData), Color::Gray);
}

#[test]
fn valid_manifest_without_ai_markers_is_verified_green_high() {
    let verdict = decide(&evidence_cell(
        ManifestAxis::ValidNonAi,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    ));
    assert_eq!(verdict.status, Status::Verified);
    assert_eq!(verdict.color, Color::Green);
    assert_eq!(verdict.confidence, Confidence::High);
}

#[test]
fn binding_mismatch_is_invalid_red() {
    let verdict = decide(&evidence_cell(
        ManifestAxis::InvalidBinding,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    ));
    assert_eq!(verdict.status, Status::Invalid);
    assert_eq!(verdict.color, Color::Red);
}

#[test]
fn metadata_ai_without_manifest_is_purple_medium() {
    let verdict = decide(&evidence_cell(
        ManifestAxis::Absent,
        true,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    ));
    assert_eq!(verdict.status, Status::AiGenerated);
    assert_eq!(verdict.color, Color::Purple);
    assert_eq!(verdict.confidence, Confidence::Medium);
}

#[test]
fn nothing_anywhere_is_no_data_gray_none() {
    let verdict = decide(&evidence_cell(
        ManifestAxis::Absent,
        false,
        WatermarkAxis::NotDetected,
        ContextAxis::Empty,
    ));
    assert_eq!(verdict.status, Status::NoData);
    assert_eq!(verdict.color, Color::Gray);
    assert_eq!(verdict.confidence, Confidence::None);
}

#[test]
fn forged_ai_manifest_is_invalid_not_purple() {
    // An untrusted chain on a manifest that claims generative origin must
    // not earn the softer AI verdict.
    let mut facts = provenance_cell(ManifestAxis::ValidAi);
    facts.chain = Some(ChainResult {
        status: ChainStatus::Untrusted,
        leaf_subject: "CN=spoof".into(),
        chain_length: 1,
    });
    let mut evidence = evidence_cell(
        ManifestAxis::ValidAi,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    );
    evidence[0].facts = LayerFacts::Provenance(facts);
    assert_eq!(decide(&evidence).status, Status::Invalid);
}

#[test]
fn broken_assertion_digest_downgrades_to_warning() {
    let mut facts = provenance_cell(ManifestAxis::ValidNonAi);
    facts.assertion_results = vec![("c2pa.actions".into(), false), ("c2pa.hash.data".into(), true)];
    let mut evidence = evidence_cell(
        ManifestAxis::ValidNonAi,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    );
    evidence[0].facts = LayerFacts::Provenance(facts);
    let verdict = decide(&evidence);
    assert_eq!(verdict.status, Status::Warning);
    assert!(verdict.reasons.iter().any(|r| r.contains("c2pa.actions")));
}

#[test]
fn decide_is_order_independent() {
    let mut evidence = evidence_cell(
        ManifestAxis::Expired,
        true,
        WatermarkAxis::Detected,
        ContextAxis::Hits,
    );
    let baseline = decide(&evidence);
    evidence.reverse();
    assert_eq!(decide(&evidence), baseline);
    evidence.swap(0, 2);
    assert_eq!(decide(&evidence), baseline);
}

#[test]
fn decide_is_total_on_empty_evidence() {
    let verdict = decide(&[]);
    assert_eq!(verdict.status, Status::NoData);
    assert_eq!(verdict.confidence, Confidence::None);
}

#[test]
fn reverse_hits_populate_reasons_without_changing_status() {
    let with_hits = decide(&evidence_cell(
        ManifestAxis::ValidNonAi,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Hits,
    ));
    assert_eq!(with_hits.status, Status::Verified);
    assert!(with_hits
        .reasons
        .iter()
        .any(|r| r.contains("prior attribution")));
}

#[test]
fn watermark_on_valid_manifest_lands_in_reasons_only() {
    let verdict = decide(&evidence_cell(
        ManifestAxis::ValidNonAi,
        false,
        WatermarkAxis::Detected,
        ContextAxis::Skipped,
    ));
    assert_eq!(verdict.status, Status::Verified);
    assert!(verdict.reasons.iter().any(|r| r.contains("SynthID")));
}

#[test]
fn unavailable_layers_are_reported_in_reasons() {
    let mut evidence = evidence_cell(
        ManifestAxis::Absent,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    );
    evidence[2].facts =
        LayerFacts::Watermark(NetCheck::Unavailable(crate::net::TransportError::Timeout));
    let verdict = decide(&evidence);
    assert_eq!(verdict.status, Status::NoData);
    assert!(verdict
        .reasons
        .iter()
        .any(|r| r.contains("watermark layer unavailable")));
}

fn sample_report() -> Report {
    let evidence = evidence_cell(
        ManifestAxis::ValidNonAi,
        false,
        WatermarkAxis::Skipped,
        ContextAxis::Skipped,
    );
    let verdict = decide(&evidence);
    Report {
        verdict,
        layers: evidence,
        edit_history: vec![
            crate::manifest::EditHistoryEntry {
                manifest_label: "urn:fixture:0001".into(),
                claim_generator: "Editor 1".into(),
                timestamp: Some(chrono::Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()),
                action: Some("c2pa.created".into()),
                ingredient_digest: Some(Digest256([1; 32])),
                cycle_detected: false,
            },
            crate::manifest::EditHistoryEntry {
                manifest_label: "urn:fixture:0002".into(),
                claim_generator: "Editor 2".into(),
                timestamp: None,
                action: None,
                ingredient_digest: None,
                cycle_detected: false,
            },
        ],
        input_digest: Digest256([0xAB; 32]),
    }
}

#[test]
fn json_rendering_is_byte_stable_and_schema_shaped() {
    let report = sample_report();
    let first = render_report(&report, RenderMode::Json);
    let second = render_report(&report, RenderMode::Json);
    assert_eq!(first, second);

    let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(parsed["schema"], "origin-lens/1");
    assert_eq!(parsed["status"], "verified");
    assert_eq!(parsed["color"], "green");
    assert_eq!(parsed["confidence"], "high");
    assert!(parsed["reasons"].is_array());
    let layers = parsed["layers"].as_array().unwrap();
    assert_eq!(layers.len(), 4);
    assert_eq!(layers[0]["layer"], "provenance");
    assert_eq!(layers[0]["executed"], true);
    assert!(layers[0]["timing_ms"].is_number());
    // Skipped layers omit the timing field.
    assert!(layers[2]["timing_ms"].is_null());
    let history = parsed["edit_history"].as_array().unwrap();
    assert_eq!(history.len(), 2);
    assert_eq!(history[0]["manifest_label"], "urn:fixture:0001");
    assert_eq!(history[1]["timestamp"], serde_json::Value::Null);
    assert_eq!(parsed["input_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn human_rendering_shows_status_history_and_layers() {
    let report = sample_report();
    let plain = render_report(&report, RenderMode::Human { ansi: false });
    assert!(plain.contains("status: Verified (green)"));
    assert!(plain.contains("confidence: high"));
    assert!(plain.contains("edit history (oldest first):"));
    assert!(plain.contains("urn:fixture:0002"));
    assert!(plain.contains("provenance [ran]"));
    assert!(plain.contains("watermark [skipped]"));
    assert!(!plain.contains('\x1b'));

    let colored = render_report(&report, RenderMode::Human { ansi: true });
    assert!(colored.contains("\x1b[32m"));
    // Identical reports render identically.
    assert_eq!(plain, render_report(&report, RenderMode::Human { ansi: false }));
}
