//! Graded trust verdicts: the layer-evidence model, the decision rules
//! mapping evidence to a status, and report rendering.

use serde::Serialize;

use crate::manifest::EditHistoryEntry;
use crate::metadata::AiMatch;
use crate::net::{NetCheck, ReverseSearchHit, WatermarkResult};
use crate::trust::{BindingVerdict, ChainResult, ChainStatus, Digest256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Provenance,
    Metadata,
    Watermark,
    Context,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Layer::Provenance => "provenance",
            Layer::Metadata => "metadata",
            Layer::Watermark => "watermark",
            Layer::Context => "context",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    AiGenerated,
    Warning,
    Invalid,
    NoData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Green,
    Purple,
    Orange,
    Red,
    Gray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    High,
    Medium,
    Low,
    None,
}

/// The traffic-light color is a pure function of status.
pub fn color_for(status: Status) -> Color {
    match status {
        Status::Verified => Color::Green,
        Status::AiGenerated => Color::Purple,
        Status::Warning => Color::Orange,
        Status::Invalid => Color::Red,
        Status::NoData => Color::Gray,
    }
}

impl Status {
    pub fn word(self) -> &'static str {
        match self {
            Status::Verified => "Verified",
            Status::AiGenerated => "AI Generated",
            Status::Warning => "Warning",
            Status::Invalid => "Invalid",
            Status::NoData => "No Data",
        }
    }
}

impl Color {
    pub fn word(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Purple => "purple",
            Color::Orange => "orange",
            Color::Red => "red",
            Color::Gray => "gray",
        }
    }

    pub fn ansi(self) -> &'static str {
        match self {
            Color::Green => "\x1b[32m",
            Color::Purple => "\x1b[35m",
            Color::Orange => "\x1b[33m",
            Color::Red => "\x1b[31m",
            Color::Gray => "\x1b[90m",
        }
    }
}

impl Confidence {
    pub fn word(self) -> &'static str {
        match self {
            Confidence::High => "high",
            Confidence::Medium => "medium",
            Confidence::Low => "low",
            Confidence::None => "none",
        }
    }
}

/// Everything Layer 1 learned about the manifest.
#[derive(Debug, Clone, Default)]
pub struct ProvenanceFacts {
    /// A provenance carrier was found in the container.
    pub carrier_present: bool,
    pub parse_error: Option<String>,
    pub chain: Option<ChainResult>,
    pub signature_valid: Option<bool>,
    /// Set when the declared algorithm is outside the supported set.
    pub signature_error: Option<String>,
    pub binding: Option<BindingVerdict>,
    pub assertion_results: Vec<(String, bool)>,
    pub generative_origin: Option<String>,
}

impl ProvenanceFacts {
    fn assertions_ok(&self) -> bool {
        self.assertion_results.iter().all(|(_, ok)| *ok)
    }

    /// Cryptographically valid: trusted chain, true signature, matching
    /// binding, intact assertions, clean parse.
    fn fully_valid(&self) -> bool {
        self.parse_error.is_none()
            && matches!(&self.chain, Some(c) if c.status == ChainStatus::Trusted)
            && self.signature_valid == Some(true)
            && matches!(self.binding, Some(BindingVerdict::Match))
            && self.assertions_ok()
    }

    fn hard_failure(&self) -> bool {
        matches!(self.binding, Some(BindingVerdict::Mismatch { .. }))
            || matches!(
                &self.chain,
                Some(c) if matches!(
                    c.status,
                    ChainStatus::Untrusted | ChainStatus::Revoked | ChainStatus::PinMismatch
                )
            )
            || self.signature_valid == Some(false)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MetadataFacts {
    pub record_count: usize,
    pub ai_matches: Vec<AiMatch>,
    /// Parser failures surfaced as notes, never as aborts.
    pub parse_notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum LayerFacts {
    Provenance(ProvenanceFacts),
    Metadata(MetadataFacts),
    Watermark(NetCheck<WatermarkResult>),
    Context(NetCheck<Vec<ReverseSearchHit>>),
}

#[derive(Debug, Clone)]
pub struct LayerEvidence {
    pub layer: Layer,
    pub executed: bool,
    pub findings: Vec<String>,
    pub timing_ms: Option<f64>,
    pub facts: LayerFacts,
}

impl LayerEvidence {
    pub fn skipped(layer: Layer, facts: LayerFacts) -> Self {
        LayerEvidence {
            layer,
            executed: false,
            findings: Vec::new(),
            timing_ms: None,
            facts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub color: Color,
    pub confidence: Confidence,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub verdict: Verdict,
    pub layers: Vec<LayerEvidence>,
    pub edit_history: Vec<EditHistoryEntry>,
    pub input_digest: Digest256,
}

fn provenance<'a>(evidence: &'a [LayerEvidence]) -> Option<&'a ProvenanceFacts> {
    evidence.iter().find_map(|e| match &e.facts {
        LayerFacts::Provenance(f) => Some(f),
        _ => None,
    })
}

fn metadata<'a>(evidence: &'a [LayerEvidence]) -> Option<&'a MetadataFacts> {
    evidence.iter().find_map(|e| match &e.facts {
        LayerFacts::Metadata(f) => Some(f),
        _ => None,
    })
}

fn watermark<'a>(evidence: &'a [LayerEvidence]) -> Option<&'a NetCheck<WatermarkResult>> {
    evidence.iter().find_map(|e| match &e.facts {
        LayerFacts::Watermark(f) => Some(f),
        _ => None,
    })
}

fn context<'a>(evidence: &'a [LayerEvidence]) -> Option<&'a NetCheck<Vec<ReverseSearchHit>>> {
    evidence.iter().find_map(|e| match &e.facts {
        LayerFacts::Context(f) => Some(f),
        _ => None,
    })
}

/// Maps layer evidence to a verdict. Total and deterministic; evidence
/// order never matters. Precedence:
///
/// 1. Manifest with a binding mismatch, an untrusted / revoked / pinned-out
///    chain, or a false signature → Invalid.
/// 2. Cryptographically valid manifest declaring generative origin
///    → AI Generated, high confidence.
/// 3. Cryptographically valid manifest otherwise → Verified, high.
/// 4. Any other manifest defect (parse error, expired or malformed chain,
///    unsupported algorithm, broken assertion digest) → Warning, high.
/// 5. No manifest, but metadata AI signatures or a detected watermark
///    → AI Generated, medium.
/// 6. No manifest, no AI signals: reverse-search hits give No Data at low
///    confidence, otherwise No Data with none.
pub fn decide(evidence: &[LayerEvidence]) -> Verdict {
    let default_prov = ProvenanceFacts::default();
    let prov = provenance(evidence).unwrap_or(&default_prov);
    let ai_matches = metadata(evidence).map(|m| m.ai_matches.as_slice()).unwrap_or(&[]);
    let skipped = NetCheck::Skipped;
    let wm = watermark(evidence).unwrap_or(&skipped);
    let ctx_skipped = NetCheck::Skipped;
    let ctx = context(evidence).unwrap_or(&ctx_skipped);

    let watermark_detected = matches!(wm, NetCheck::Completed(r) if r.detected);
    let hits = ctx.completed().map(Vec::as_slice).unwrap_or(&[]);

    let mut reasons: Vec<String> = Vec::new();
    // A container that cannot be scanned counts as a manifest-layer
    // parsing issue even though no carrier was confirmed.
    let manifest_layer_engaged = prov.carrier_present || prov.parse_error.is_some();
    let (status, confidence) = if manifest_layer_engaged {
        if prov.carrier_present && prov.hard_failure() {
            if let Some(BindingVerdict::Mismatch { note }) = &prov.binding {
                reasons.push(format!("hard binding does not match content: {note}"));
            }
            if let Some(chain) = &prov.chain {
                match chain.status {
                    ChainStatus::Untrusted => {
                        reasons.push("certificate chain does not lead to a trusted root".into())
                    }
                    ChainStatus::Revoked => {
                        reasons.push("a certificate in the chain is revoked".into())
                    }
                    ChainStatus::PinMismatch => {
                        reasons.push("signer key is not in the pinned allow-list".into())
                    }
                    _ => {}
                }
            }
            if prov.signature_valid == Some(false) {
                reasons.push("claim signature does not verify".into());
            }
            (Status::Invalid, Confidence::High)
        } else if prov.carrier_present && prov.fully_valid() {
            if let Some(generator) = &prov.generative_origin {
                reasons.push(format!(
                    "valid manifest declares generative origin: {generator}"
                ));
                (Status::AiGenerated, Confidence::High)
            } else {
                let signer = prov
                    .chain
                    .as_ref()
                    .map(|c| c.leaf_subject.clone())
                    .unwrap_or_default();
                reasons.push(format!(
                    "valid manifest signed by trusted certificate {signer}"
                ));
                (Status::Verified, Confidence::High)
            }
        } else {
            if let Some(err) = &prov.parse_error {
                reasons.push(format!("manifest present but not parseable: {err}"));
            }
            if let Some(chain) = &prov.chain {
                match chain.status {
                    ChainStatus::Expired => {
                        reasons.push("signing certificate outside its validity window".into())
                    }
                    ChainStatus::Malformed => {
                        reasons.push("certificate chain is malformed".into())
                    }
                    _ => {}
                }
            }
            if let Some(err) = &prov.signature_error {
                reasons.push(format!("signature not verifiable: {err}"));
            }
            for (label, ok) in &prov.assertion_results {
                if !ok {
                    reasons.push(format!("assertion {label} fails its declared digest"));
                }
            }
            if reasons.is_empty() {
                reasons.push("manifest present but incompletely verifiable".into());
            }
            (Status::Warning, Confidence::High)
        }
    } else if !ai_matches.is_empty() || watermark_detected {
        for m in ai_matches {
            reasons.push(format!(
                "{} {} matches {} signature ({})",
                m.matched_source, m.matched_key, m.generator_name, m.rule_id
            ));
        }
        (Status::AiGenerated, Confidence::Medium)
    } else if !hits.is_empty() {
        reasons.push("no provenance or AI signals; prior attributions found".into());
        (Status::NoData, Confidence::Low)
    } else {
        reasons.push("no provenance manifest or recognizable signals".into());
        (Status::NoData, Confidence::None)
    };

    // Network evidence never changes rules 1-4; it lands in reasons.
    if watermark_detected && prov.carrier_present {
        if let NetCheck::Completed(r) = wm {
            reasons.push(format!(
                "watermark provider {} reports {}",
                r.provider,
                r.watermark_kind.as_deref().unwrap_or("a watermark")
            ));
        }
    } else if let NetCheck::Completed(r) = wm {
        if r.detected && status == Status::AiGenerated {
            reasons.push(format!(
                "watermark provider {} reports {}{}",
                r.provider,
                r.watermark_kind.as_deref().unwrap_or("a watermark"),
                r.provider_confidence
                    .map(|c| format!(" (confidence {c:.2})"))
                    .unwrap_or_default()
            ));
        }
    }
    for hit in hits.iter().take(5) {
        reasons.push(format!("prior attribution: {hit}"));
    }
    if let NetCheck::Unavailable(err) = wm {
        reasons.push(format!("watermark layer unavailable: {err}"));
    }
    if let NetCheck::Unavailable(err) = ctx {
        reasons.push(format!("context layer unavailable: {err}"));
    }

    Verdict {
        status,
        color: color_for(status),
        confidence,
        reasons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Human { ansi: bool },
    Json,
}

#[derive(Serialize)]
struct JsonLayer<'a> {
    layer: Layer,
    executed: bool,
    findings: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

#[derive(Serialize)]
struct JsonHistoryEntry<'a> {
    manifest_label: &'a str,
    claim_generator: &'a str,
    timestamp: Option<String>,
    action: Option<&'a str>,
    ingredient_digest: Option<String>,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: &'static str,
    status: Status,
    color: Color,
    confidence: Confidence,
    reasons: &'a [String],
    layers: Vec<JsonLayer<'a>>,
    edit_history: Vec<JsonHistoryEntry<'a>>,
    input_sha256: String,
}

pub const REPORT_SCHEMA: &str = "origin-lens/1";

/// Renders the report. Output is byte-stable for identical reports.
pub fn render_report(report: &Report, mode: RenderMode) -> String {
    match mode {
        RenderMode::Json => {
            let json = JsonReport {
                schema: REPORT_SCHEMA,
                status: report.verdict.status,
                color: report.verdict.color,
                confidence: report.verdict.confidence,
                reasons: &report.verdict.reasons,
                layers: report
                    .layers
                    .iter()
                    .map(|l| JsonLayer {
                        layer: l.layer,
                        executed: l.executed,
                        findings: &l.findings,
                        timing_ms: l.timing_ms,
                    })
                    .collect(),
                edit_history: report
                    .edit_history
                    .iter()
                    .map(|e| JsonHistoryEntry {
                        manifest_label: &e.manifest_label,
                        claim_generator: &e.claim_generator,
                        timestamp: e.timestamp.map(|t| {
                            t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
                        }),
                        action: e.action.as_deref(),
                        ingredient_digest: e.ingredient_digest.map(|d| d.to_hex()),
                    })
                    .collect(),
                input_sha256: report.input_digest.to_hex(),
            };
            let mut out = serde_json::to_string_pretty(&json).expect("report serializes");
            out.push('\n');
            out
        }
        RenderMode::Human { ansi } => render_human(report, ansi),
    }
}

fn render_human(report: &Report, ansi: bool) -> String {
    use std::fmt::Write;
    let verdict = &report.verdict;
    let mut out = String::new();

    let status_line = format!("{} ({})", verdict.status.word(), verdict.color.word());
    if ansi {
        let _ = writeln!(
            out,
            "status: {}{}\x1b[0m",
            verdict.color.ansi(),
            status_line
        );
    } else {
        let _ = writeln!(out, "status: {status_line}");
    }
    let _ = writeln!(out, "confidence: {}", verdict.confidence.word());
    let _ = writeln!(out, "input sha256: {}", report.input_digest);

    if !verdict.reasons.is_empty() {
        let _ = writeln!(out, "reasons:");
        for reason in &verdict.reasons {
            let _ = writeln!(out, "  - {reason}");
        }
    }

    if !report.edit_history.is_empty() {
        let _ = writeln!(out, "edit history (oldest first):");
        for (index, entry) in report.edit_history.iter().enumerate() {
            let when = entry
                .timestamp
                .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
                .unwrap_or_else(|| "unknown".into());
            let action = entry.action.as_deref().unwrap_or("-");
            let digest = entry
                .ingredient_digest
                .map(|d| d.to_hex()[..16].to_string())
                .unwrap_or_else(|| "-".into());
            let cycle = if entry.cycle_detected { " [cycle]" } else { "" };
            let _ = writeln!(
                out,
                "  {:>2}. {}  {}  {}  ingredient-digest {}{}",
                index + 1,
                when,
                entry.manifest_label,
                action,
                digest,
                cycle
            );
            let _ = writeln!(out, "      generator: {}", entry.claim_generator);
        }
    }

    let _ = writeln!(out, "layers:");
    for layer in &report.layers {
        let timing = layer
            .timing_ms
            .map(|ms| format!(" ({ms:.2} ms)"))
            .unwrap_or_default();
        let state = if layer.executed { "ran" } else { "skipped" };
        let _ = writeln!(out, "  {} [{}]{}", layer.layer.name(), state, timing);
        for finding in &layer.findings {
            let _ = writeln!(out, "    - {finding}");
        }
    }
    out
}

pub mod testing;

#[cfg(test)]
mod tests;
