//! Evidence builders for decision-table enumeration in tests.

use super::*;
use crate::metadata::MetadataSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifestAxis {
    Absent,
    ParseError,
    InvalidSig,
    InvalidBinding,
    Expired,
    ValidAi,
    ValidNonAi,
}

impl ManifestAxis {
    pub const ALL: [ManifestAxis; 7] = [
        ManifestAxis::Absent,
        ManifestAxis::ParseError,
        ManifestAxis::InvalidSig,
        ManifestAxis::InvalidBinding,
        ManifestAxis::Expired,
        ManifestAxis::ValidAi,
        ManifestAxis::ValidNonAi,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ManifestAxis::Absent => "absent",
            ManifestAxis::ParseError => "parse-error",
            ManifestAxis::InvalidSig => "invalid-sig",
            ManifestAxis::InvalidBinding => "invalid-binding",
            ManifestAxis::Expired => "expired",
            ManifestAxis::ValidAi => "valid-ai",
            ManifestAxis::ValidNonAi => "valid-nonai",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatermarkAxis {
    Detected,
    NotDetected,
    Skipped,
}

impl WatermarkAxis {
    pub const ALL: [WatermarkAxis; 3] = [
        WatermarkAxis::Detected,
        WatermarkAxis::NotDetected,
        WatermarkAxis::Skipped,
    ];

    pub fn token(self) -> &'static str {
        match self {
            WatermarkAxis::Detected => "detected",
            WatermarkAxis::NotDetected => "none",
            WatermarkAxis::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextAxis {
    Hits,
    Empty,
    Skipped,
}

impl ContextAxis {
    pub const ALL: [ContextAxis; 3] = [ContextAxis::Hits, ContextAxis::Empty, ContextAxis::Skipped];

    pub fn token(self) -> &'static str {
        match self {
            ContextAxis::Hits => "hits",
            ContextAxis::Empty => "none",
            ContextAxis::Skipped => "skipped",
        }
    }
}

fn trusted_chain() -> ChainResult {
    ChainResult {
        status: ChainStatus::Trusted,
        leaf_subject: "CN=cell signer".into(),
        chain_length: 2,
    }
}

pub fn provenance_cell(axis: ManifestAxis) -> ProvenanceFacts {
    let base = ProvenanceFacts {
        carrier_present: true,
        parse_error: None,
        chain: Some(trusted_chain()),
        signature_valid: Some(true),
        signature_error: None,
        binding: Some(BindingVerdict::Match),
        assertion_results: vec![("c2pa.hash.data".into(), true)],
        generative_origin: None,
    };
    match axis {
        ManifestAxis::Absent => ProvenanceFacts::default(),
        ManifestAxis::ParseError => ProvenanceFacts {
            carrier_present: true,
            parse_error: Some("missing claim box".into()),
            ..ProvenanceFacts::default()
        },
        ManifestAxis::InvalidSig => ProvenanceFacts {
            signature_valid: Some(false),
            ..base
        },
        ManifestAxis::InvalidBinding => ProvenanceFacts {
            binding: Some(BindingVerdict::Mismatch {
                note: "digest differs".into(),
            }),
            ..base
        },
        ManifestAxis::Expired => ProvenanceFacts {
            chain: Some(ChainResult {
                status: ChainStatus::Expired,
                ..trusted_chain()
            }),
            ..base
        },
        ManifestAxis::ValidAi => ProvenanceFacts {
            generative_origin: Some("Cell Generator".into()),
            ..base
        },
        ManifestAxis::ValidNonAi => base,
    }
}

pub fn metadata_cell(ai: bool) -> MetadataFacts {
    MetadataFacts {
        record_count: if ai { 1 } else { 0 },
        ai_matches: if ai {
            vec![AiMatch {
                rule_id: "stable-diffusion".into(),
                generator_name: "Stable Diffusion".into(),
                matched_source: MetadataSource::Exif,
                matched_key: "Software".into(),
                matched_excerpt: "Stable Diffusion".into(),
            }]
        } else {
            Vec::new()
        },
        parse_notes: Vec::new(),
    }
}

pub fn watermark_cell(axis: WatermarkAxis) -> NetCheck<WatermarkResult> {
    match axis {
        WatermarkAxis::Skipped => NetCheck::Skipped,
        WatermarkAxis::Detected => NetCheck::Completed(WatermarkResult {
            detected: true,
            watermark_kind: Some("SynthID".into()),
            provider_confidence: Some(0.91),
            provider: "wm.example".into(),
        }),
        WatermarkAxis::NotDetected => NetCheck::Completed(WatermarkResult {
            detected: false,
            watermark_kind: None,
            provider_confidence: None,
            provider: "wm.example".into(),
        }),
    }
}

pub fn context_cell(axis: ContextAxis) -> NetCheck<Vec<ReverseSearchHit>> {
    match axis {
        ContextAxis::Skipped => NetCheck::Skipped,
        ContextAxis::Empty => NetCheck::Completed(Vec::new()),
        ContextAxis::Hits => NetCheck::Completed(vec![ReverseSearchHit {
            url: "https://archive.example/earliest".into(),
            first_seen: chrono::NaiveDate::from_ymd_opt(2022, 6, 1),
            title: Some("earlier posting".into()),
        }]),
    }
}

/// Builds the four-layer evidence list for one enumeration cell.
pub fn evidence_cell(
    manifest: ManifestAxis,
    metadata_ai: bool,
    watermark: WatermarkAxis,
    context: ContextAxis,
) -> Vec<LayerEvidence> {
    vec![
        LayerEvidence {
            layer: Layer::Provenance,
            executed: true,
            findings: Vec::new(),
            timing_ms: Some(1.0),
            facts: LayerFacts::Provenance(provenance_cell(manifest)),
        },
        LayerEvidence {
            layer: Layer::Metadata,
            executed: true,
            findings: Vec::new(),
            timing_ms: Some(1.0),
            facts: LayerFacts::Metadata(metadata_cell(metadata_ai)),
        },
        LayerEvidence {
            layer: Layer::Watermark,
            executed: watermark != WatermarkAxis::Skipped,
            findings: Vec::new(),
            timing_ms: if watermark == WatermarkAxis::Skipped {
                None
            } else {
                Some(1.0)
            },
            facts: LayerFacts::Watermark(watermark_cell(watermark)),
        },
        LayerEvidence {
            layer: Layer::Context,
            executed: context != ContextAxis::Skipped,
            findings: Vec::new(),
            timing_ms: if context == ContextAxis::Skipped {
                None
            } else {
                Some(1.0)
            },
            facts: LayerFacts::Context(context_cell(context)),
        },
    ]
}
