//! Layer orchestration: runs provenance and metadata always, the opt-in
//! network layers per policy, and assembles the graded report.

use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};

use crate::container::{
    extract_jumbf, scan_jpeg_segments, scan_png_chunks, ImageBytes, ImageFormat, JumbfExtraction,
    APP1, APP13,
};
use crate::error::{Error, Result};
use crate::jumbf::parse_box_tree;
use crate::manifest::{
    classify_generative_origin, extract_edit_history, parse_manifest_store, resolve_assertions,
    EditHistoryEntry,
};
use crate::metadata::{
    default_rules, detect_ai_signatures, parse_exif, parse_iptc, parse_png_text, AiSignatureRule,
    MetadataRecordSet,
};
use crate::net::{
    check_watermark, reverse_search, HttpTransport, NetCheck, NetPolicy, Transport,
};
use crate::trust::{verify_chain, verify_claim_signature, verify_hard_binding, Digest256, TrustStore};
use crate::verdict::{
    decide, Layer, LayerEvidence, LayerFacts, MetadataFacts, ProvenanceFacts, Report,
};

/// Whole-pipeline deadline covering the network layers.
pub const PIPELINE_DEADLINE: Duration = Duration::from_secs(30);

const EXIF_PREFIX: &[u8] = b"Exif\0\0";

#[derive(Clone)]
pub struct EngineConfig {
    pub trust_store: TrustStore,
    pub rules: Vec<AiSignatureRule>,
    pub net: NetPolicy,
    /// Verification clock; defaults to the system UTC clock.
    pub clock_override: Option<DateTime<Utc>>,
    pub transport: Arc<dyn Transport>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            trust_store: TrustStore::new(),
            rules: default_rules(),
            net: NetPolicy::default(),
            clock_override: None,
            transport: Arc::new(HttpTransport),
        }
    }
}

impl EngineConfig {
    /// Conditions worth telling the operator about before analyzing.
    pub fn startup_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.trust_store.is_empty() {
            warnings.push(
                "trust store is empty: every certificate chain will verify as untrusted".into(),
            );
        }
        warnings
    }

    fn now(&self) -> DateTime<Utc> {
        self.clock_override.unwrap_or_else(Utc::now)
    }
}

struct TimedLayer {
    evidence: LayerEvidence,
}

fn timed<F: FnOnce(&mut Vec<String>) -> LayerFacts>(layer: Layer, body: F) -> TimedLayer {
    let started = Instant::now();
    let mut findings = Vec::new();
    let facts = body(&mut findings);
    let timing_ms = started.elapsed().as_secs_f64() * 1000.0;
    TimedLayer {
        evidence: LayerEvidence {
            layer,
            executed: true,
            findings,
            timing_ms: Some(timing_ms),
            facts,
        },
    }
}

/// Runs the full defense-in-depth pipeline over one image.
///
/// The provenance and metadata layers always execute; metadata findings
/// corroborate even a valid manifest. Network layers run only when the
/// policy enables them, possibly concurrently, and their failures degrade
/// to evidence instead of aborting.
pub fn analyze(image: &ImageBytes, config: &EngineConfig) -> Result<Report> {
    if image.is_empty() {
        return Err(Error::UnreadableInput("empty input".into()));
    }
    let deadline = Instant::now() + PIPELINE_DEADLINE;
    let input_digest = Digest256::of(image.bytes());
    let now = config.now();

    let mut edit_history: Vec<EditHistoryEntry> = Vec::new();
    let provenance = timed(Layer::Provenance, |findings| {
        LayerFacts::Provenance(provenance_layer(image, config, now, findings, &mut edit_history))
    });
    let metadata = timed(Layer::Metadata, |findings| {
        LayerFacts::Metadata(metadata_layer(image, &config.rules, findings))
    });

    let (watermark, context) = network_layers(image, config, deadline);

    let layers = vec![
        provenance.evidence,
        metadata.evidence,
        watermark,
        context,
    ];
    let verdict = decide(&layers);
    Ok(Report {
        verdict,
        layers,
        edit_history,
        input_digest,
    })
}

fn provenance_layer(
    image: &ImageBytes,
    config: &EngineConfig,
    now: DateTime<Utc>,
    findings: &mut Vec<String>,
    edit_history: &mut Vec<EditHistoryEntry>,
) -> ProvenanceFacts {
    let mut facts = ProvenanceFacts::default();

    let jumbf = match extract_jumbf(image) {
        Ok(JumbfExtraction::Present { jumbf, .. }) => {
            facts.carrier_present = true;
            jumbf
        }
        Ok(JumbfExtraction::Absent) => {
            findings.push("no provenance carrier in container".into());
            return facts;
        }
        Err(err) => {
            facts.parse_error = Some(err.to_string());
            findings.push(format!("container scan failed: {err}"));
            return facts;
        }
    };

    let store = match parse_box_tree(&jumbf).and_then(|root| parse_manifest_store(&root)) {
        Ok(store) => store,
        Err(err) => {
            facts.parse_error = Some(err.to_string());
            findings.push(format!("manifest not parseable: {err}"));
            return facts;
        }
    };
    let active = store.active();
    findings.push(format!(
        "manifest store: {} manifest(s), active {}",
        store.manifests.len(),
        active.label
    ));
    findings.push(format!("claim generator: {}", active.claim.claim_generator));

    facts.assertion_results = resolve_assertions(active);
    let broken = facts
        .assertion_results
        .iter()
        .filter(|(_, ok)| !ok)
        .count();
    findings.push(format!(
        "assertions: {} referenced, {} digest failure(s)",
        facts.assertion_results.len(),
        broken
    ));

    let chain = verify_chain(&active.signature.cert_chain, &config.trust_store, now);
    findings.push(format!(
        "certificate chain ({} cert(s), leaf {}): {}",
        chain.chain_length, chain.leaf_subject, chain.status
    ));
    facts.chain = Some(chain);

    match verify_claim_signature(&active.signature, &active.claim_bytes) {
        Ok(valid) => {
            facts.signature_valid = Some(valid);
            findings.push(format!(
                "claim signature ({}): {}",
                active.signature.algorithm.name(),
                if valid { "verifies" } else { "does not verify" }
            ));
        }
        Err(err) => {
            facts.signature_error = Some(err.to_string());
            findings.push(format!("claim signature not checkable: {err}"));
        }
    }

    let binding = verify_hard_binding(&active.hard_binding, image);
    findings.push(match &binding {
        crate::trust::BindingVerdict::Match => "hard binding: content digest matches".into(),
        crate::trust::BindingVerdict::Mismatch { note } => format!("hard binding: {note}"),
    });
    facts.binding = Some(binding);

    facts.generative_origin = classify_generative_origin(active, &config.rules);
    if let Some(generator) = &facts.generative_origin {
        findings.push(format!("manifest declares generative origin: {generator}"));
    }

    *edit_history = extract_edit_history(&store);
    if edit_history.iter().any(|e| e.cycle_detected) {
        findings.push("ingredient graph contains a cycle".into());
    }

    facts
}

fn metadata_layer(
    image: &ImageBytes,
    rules: &[AiSignatureRule],
    findings: &mut Vec<String>,
) -> MetadataFacts {
    let mut facts = MetadataFacts::default();
    let mut records = MetadataRecordSet::default();

    match image.format() {
        ImageFormat::Jpeg => match scan_jpeg_segments(image) {
            Ok(segments) => {
                for segment in &segments {
                    if segment.marker == APP1 && segment.payload.starts_with(EXIF_PREFIX) {
                        match parse_exif(&segment.payload) {
                            Ok(set) => records.extend(set),
                            Err(err) => facts.parse_notes.push(format!("exif: {err}")),
                        }
                    } else if segment.marker == APP13 {
                        match parse_iptc(&segment.payload) {
                            Ok(set) => records.extend(set),
                            Err(err) => facts.parse_notes.push(format!("iptc: {err}")),
                        }
                    }
                }
            }
            Err(err) => facts.parse_notes.push(format!("container: {err}")),
        },
        ImageFormat::Png => match scan_png_chunks(image) {
            Ok(chunks) => match parse_png_text(&chunks) {
                Ok(set) => records.extend(set),
                Err(err) => facts.parse_notes.push(format!("png text: {err}")),
            },
            Err(err) => facts.parse_notes.push(format!("container: {err}")),
        },
        ImageFormat::Unknown => {
            findings.push("unrecognized container; no metadata to read".into());
        }
    }

    facts.record_count = records.len();
    facts.ai_matches = detect_ai_signatures(&records, rules);
    findings.push(format!(
        "{} metadata record(s), {} AI-signature match(es)",
        facts.record_count,
        facts.ai_matches.len()
    ));
    for matched in &facts.ai_matches {
        findings.push(format!(
            "{} {} matches {} rule {}: \"{}\"",
            matched.matched_source,
            matched.matched_key,
            matched.generator_name,
            matched.rule_id,
            matched.matched_excerpt
        ));
    }
    for note in &facts.parse_notes {
        findings.push(format!("metadata parser degraded: {note}"));
    }
    facts
}

fn network_layers(
    image: &ImageBytes,
    config: &EngineConfig,
    deadline: Instant,
) -> (LayerEvidence, LayerEvidence) {
    let wm_enabled = config.net.watermark_enabled;
    let ctx_enabled = config.net.reverse_search_enabled;
    if !wm_enabled && !ctx_enabled {
        return (
            LayerEvidence::skipped(Layer::Watermark, LayerFacts::Watermark(NetCheck::Skipped)),
            LayerEvidence::skipped(Layer::Context, LayerFacts::Context(NetCheck::Skipped)),
        );
    }

    // Clamp the per-call timeout to what is left of the pipeline deadline.
    let remaining = deadline.saturating_duration_since(Instant::now());
    let mut policy = config.net.clone();
    policy.timeout = policy.timeout.min(remaining);

    let transport = config.transport.as_ref();
    let (wm_outcome, ctx_outcome) = std::thread::scope(|scope| {
        let wm_handle = wm_enabled.then(|| {
            scope.spawn(|| {
                let started = Instant::now();
                let outcome = check_watermark(image, &policy, transport);
                (outcome, started.elapsed())
            })
        });
        let ctx_handle = ctx_enabled.then(|| {
            scope.spawn(|| {
                let started = Instant::now();
                let outcome = reverse_search(image, &policy, transport);
                (outcome, started.elapsed())
            })
        });
        (
            wm_handle.map(|h| h.join().expect("watermark layer panicked")),
            ctx_handle.map(|h| h.join().expect("context layer panicked")),
        )
    });

    let watermark = match wm_outcome {
        None => LayerEvidence::skipped(Layer::Watermark, LayerFacts::Watermark(NetCheck::Skipped)),
        Some((outcome, elapsed)) => {
            let mut findings = Vec::new();
            match &outcome {
                NetCheck::Completed(r) if r.detected => findings.push(format!(
                    "provider {} detected {}{}",
                    r.provider,
                    r.watermark_kind.as_deref().unwrap_or("a watermark"),
                    r.provider_confidence
                        .map(|c| format!(" (confidence {c:.2})"))
                        .unwrap_or_default()
                )),
                NetCheck::Completed(r) => {
                    findings.push(format!("provider {} found no watermark", r.provider))
                }
                NetCheck::Unavailable(err) => findings.push(format!("unavailable: {err}")),
                NetCheck::Skipped => {}
            }
            LayerEvidence {
                layer: Layer::Watermark,
                executed: true,
                findings,
                timing_ms: Some(elapsed.as_secs_f64() * 1000.0),
                facts: LayerFacts::Watermark(outcome),
            }
        }
    };

    let context = match ctx_outcome {
        None => LayerEvidence::skipped(Layer::Context, LayerFacts::Context(NetCheck::Skipped)),
        Some((outcome, elapsed)) => {
            let mut findings = Vec::new();
            match &outcome {
                NetCheck::Completed(hits) => {
                    findings.push(format!("{} prior attribution(s)", hits.len()));
                    for hit in hits.iter().take(5) {
                        findings.push(hit.to_string());
                    }
                }
                NetCheck::Unavailable(err) => findings.push(format!("unavailable: {err}")),
                NetCheck::Skipped => {}
            }
            LayerEvidence {
                layer: Layer::Context,
                executed: true,
                findings,
                timing_ms: Some(elapsed.as_secs_f64() * 1000.0),
                facts: LayerFacts::Context(outcome),
            }
        }
    };

    (watermark, context)
}
