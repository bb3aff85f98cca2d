//! Provenance manifest store: the assertions → claim → signature →
//! hard-binding spine decoded from (and encoded to) a JUMBF box tree.
//!
//! Claims are deterministic CBOR so signed bytes are reproducible; an
//! assertion's declared digest is SHA-256 over the assertion's stored
//! content bytes; an ingredient's digest is SHA-256 over the ingredient
//! manifest's canonical claim bytes.

use std::collections::HashSet;

use chrono::{DateTime, SecondsFormat, Utc};
use sha2::{Digest, Sha256};

use crate::cbor::{self, Value};
use crate::container::ByteRange;
use crate::error::{Error, Result};
use crate::jumbf::{BoxDescription, JumbfBox, CBOR_TYPE};
use crate::metadata::{AiSignatureRule, FieldScope};
use crate::trust::Digest256;

/// Box labels of the provenance subset.
pub mod labels {
    pub const STORE: &str = "c2pa";
    pub const ASSERTIONS: &str = "c2pa.assertions";
    pub const CLAIM: &str = "c2pa.claim";
    pub const SIGNATURE: &str = "c2pa.signature";
    pub const HASH_DATA: &str = "c2pa.hash.data";
    pub const ACTIONS: &str = "c2pa.actions";
}

/// IPTC digital source type token declaring generative output.
pub const TRAINED_ALGORITHMIC_MEDIA: &str = "trainedAlgorithmicMedia";

// Box content-type UUIDs follow the ISO pattern: four-character code
// followed by the fixed JUMBF suffix.
const UUID_SUFFIX: [u8; 12] = [
    0x00, 0x11, 0x00, 0x10, 0x80, 0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71,
];

pub fn content_type_uuid(fourcc: [u8; 4]) -> [u8; 16] {
    let mut uuid = [0u8; 16];
    uuid[..4].copy_from_slice(&fourcc);
    uuid[4..].copy_from_slice(&UUID_SUFFIX);
    uuid
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssertionContent {
    /// Decoded CBOR for structured assertions.
    Structured(Value),
    /// Anything we do not interpret; bytes are still digest-checked.
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assertion {
    pub label: String,
    /// Stored content bytes; the claim's declared digest covers exactly
    /// these.
    pub bytes: Vec<u8>,
    pub content: AssertionContent,
}

impl Assertion {
    pub fn structured(label: &str, value: Value) -> Self {
        let bytes = cbor::encode(&value);
        Assertion {
            label: label.to_string(),
            bytes,
            content: AssertionContent::Structured(value),
        }
    }

    pub fn digest(&self) -> Digest256 {
        Digest256(Sha256::digest(&self.bytes).into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngredientTarget {
    /// Label of a manifest inside the same store.
    Internal(String),
    /// Reference to provenance kept elsewhere.
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngredientRef {
    pub target: IngredientTarget,
    pub digest: Digest256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub claim_generator: String,
    pub instance_id: String,
    pub assertion_refs: Vec<(String, Digest256)>,
    pub signature_ref: String,
    pub ingredient_refs: Vec<IngredientRef>,
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KnownAlgorithm {
    Es256,
    Rs256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignatureAlgorithm {
    Es256,
    Rs256,
    /// Preserved so verification can report it as unsupported instead of
    /// failing the parse.
    Other(String),
}

impl SignatureAlgorithm {
    pub fn name(&self) -> &str {
        match self {
            SignatureAlgorithm::Es256 => "ES256",
            SignatureAlgorithm::Rs256 => "RS256",
            SignatureAlgorithm::Other(s) => s,
        }
    }

    fn from_name(name: &str) -> Self {
        match name {
            "ES256" => SignatureAlgorithm::Es256,
            "RS256" => SignatureAlgorithm::Rs256,
            other => SignatureAlgorithm::Other(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureEnvelope {
    pub algorithm: SignatureAlgorithm,
    /// DER certificates, leaf first.
    pub cert_chain: Vec<Vec<u8>>,
    pub signature_bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardBinding {
    pub exclusions: Vec<ByteRange>,
    pub expected_digest: Digest256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub label: String,
    pub claim: Claim,
    /// Canonical claim bytes exactly as stored; the signature covers these.
    pub claim_bytes: Vec<u8>,
    pub assertions: Vec<Assertion>,
    pub signature: SignatureEnvelope,
    pub hard_binding: HardBinding,
}

impl Manifest {
    pub fn assertion(&self, label: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestStore {
    /// Manifests in stored order; the active manifest is last.
    pub manifests: Vec<Manifest>,
    pub active_label: String,
}

impl ManifestStore {
    pub fn active(&self) -> &Manifest {
        self.get(&self.active_label)
            .expect("active label always resolves")
    }

    pub fn get(&self, label: &str) -> Option<&Manifest> {
        self.manifests.iter().find(|m| m.label == label)
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::ManifestParse(msg.into())
}

/// Decodes a provenance store from its root superbox.
pub fn parse_manifest_store(root: &JumbfBox) -> Result<ManifestStore> {
    if root.label() != Some(labels::STORE) {
        return Err(parse_err(format!(
            "root box label {:?} is not a provenance store",
            root.label()
        )));
    }
    let mut manifests = Vec::new();
    for child in root.children() {
        manifests.push(parse_manifest(child)?);
    }
    let active_label = manifests
        .last()
        .map(|m| m.label.clone())
        .ok_or_else(|| parse_err("store holds no manifests"))?;

    let labels_in_store: HashSet<&str> = manifests.iter().map(|m| m.label.as_str()).collect();
    if labels_in_store.len() != manifests.len() {
        return Err(parse_err("duplicate manifest labels in store"));
    }
    Ok(ManifestStore {
        manifests,
        active_label,
    })
}

fn parse_manifest(node: &JumbfBox) -> Result<Manifest> {
    let label = node
        .label()
        .ok_or_else(|| parse_err("manifest box lacks a label"))?
        .to_string();

    let mut assertions = Vec::new();
    let mut claim_bytes: Option<Vec<u8>> = None;
    let mut signature: Option<SignatureEnvelope> = None;

    for child in node.children() {
        match child.label() {
            Some(labels::ASSERTIONS) => {
                for assertion_box in child.children() {
                    assertions.push(parse_assertion(assertion_box)?);
                }
            }
            Some(labels::CLAIM) => {
                let leaf = child
                    .content_leaf()
                    .ok_or_else(|| parse_err("claim box has no content"))?;
                claim_bytes = leaf.payload().map(<[u8]>::to_vec);
            }
            Some(labels::SIGNATURE) => {
                let leaf = child
                    .content_leaf()
                    .ok_or_else(|| parse_err("signature box has no content"))?;
                signature = Some(parse_signature_envelope(leaf.payload().unwrap_or(&[]))?);
            }
            _ => {} // vendor boxes are ignored, not rejected
        }
    }

    let claim_bytes = claim_bytes.ok_or_else(|| parse_err("manifest has no claim box"))?;
    let signature = signature.ok_or_else(|| parse_err("manifest has no signature box"))?;
    let claim = parse_claim(&claim_bytes)?;

    for (assertion_label, _) in &claim.assertion_refs {
        if !assertions.iter().any(|a| &a.label == assertion_label) {
            return Err(parse_err(format!(
                "claim references missing assertion {assertion_label:?}"
            )));
        }
    }

    let hard_binding = assertions
        .iter()
        .find(|a| a.label == labels::HASH_DATA)
        .map(|a| parse_hard_binding(a))
        .transpose()?
        .ok_or_else(|| parse_err("manifest has no hard-binding assertion"))?;

    Ok(Manifest {
        label,
        claim,
        claim_bytes,
        assertions,
        signature,
        hard_binding,
    })
}

fn parse_assertion(node: &JumbfBox) -> Result<Assertion> {
    let label = node
        .label()
        .ok_or_else(|| parse_err("assertion box lacks a label"))?
        .to_string();
    let leaf = node
        .content_leaf()
        .ok_or_else(|| parse_err(format!("assertion {label:?} has no content box")))?;
    let bytes = leaf.payload().unwrap_or(&[]).to_vec();
    let content = if leaf.box_type == CBOR_TYPE {
        match cbor::decode(&bytes) {
            Ok(value) => AssertionContent::Structured(value),
            Err(_) => AssertionContent::Opaque,
        }
    } else {
        AssertionContent::Opaque
    };
    Ok(Assertion {
        label,
        bytes,
        content,
    })
}

fn parse_claim(bytes: &[u8]) -> Result<Claim> {
    let value = cbor::decode(bytes).map_err(|e| parse_err(format!("claim cbor: {e}")))?;
    let text_field = |key: &str| -> Result<String> {
        value
            .get(key)
            .and_then(Value::as_text)
            .map(str::to_string)
            .ok_or_else(|| parse_err(format!("claim lacks text field {key:?}")))
    };

    let mut assertion_refs = Vec::new();
    for entry in value
        .get("assertions")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("claim lacks assertions list"))?
    {
        let label = entry
            .get("label")
            .and_then(Value::as_text)
            .ok_or_else(|| parse_err("assertion ref lacks label"))?;
        let digest = entry
            .get("digest")
            .and_then(Value::as_bytes)
            .and_then(Digest256::from_slice)
            .ok_or_else(|| parse_err("assertion ref lacks 32-byte digest"))?;
        assertion_refs.push((label.to_string(), digest));
    }

    let mut ingredient_refs = Vec::new();
    if let Some(items) = value.get("ingredients").and_then(Value::as_array) {
        for entry in items {
            let digest = entry
                .get("digest")
                .and_then(Value::as_bytes)
                .and_then(Digest256::from_slice)
                .ok_or_else(|| parse_err("ingredient ref lacks 32-byte digest"))?;
            let target = if let Some(label) = entry.get("label").and_then(Value::as_text) {
                IngredientTarget::Internal(label.to_string())
            } else if let Some(uri) = entry.get("uri").and_then(Value::as_text) {
                IngredientTarget::External(uri.to_string())
            } else {
                return Err(parse_err("ingredient ref lacks label or uri"));
            };
            ingredient_refs.push(IngredientRef { target, digest });
        }
    }

    let created_at = match value.get("created_at") {
        None => None,
        Some(v) => {
            let text = v
                .as_text()
                .ok_or_else(|| parse_err("created_at is not a text timestamp"))?;
            let parsed = DateTime::parse_from_rfc3339(text)
                .map_err(|e| parse_err(format!("created_at: {e}")))?;
            Some(parsed.with_timezone(&Utc))
        }
    };

    Ok(Claim {
        claim_generator: text_field("claim_generator")?,
        instance_id: text_field("instance_id")?,
        assertion_refs,
        signature_ref: text_field("signature")?,
        ingredient_refs,
        created_at,
    })
}

fn parse_signature_envelope(bytes: &[u8]) -> Result<SignatureEnvelope> {
    let value = cbor::decode(bytes).map_err(|e| parse_err(format!("signature cbor: {e}")))?;
    let alg = value
        .get("alg")
        .and_then(Value::as_text)
        .ok_or_else(|| parse_err("signature envelope lacks alg"))?;
    let certs = value
        .get("certs")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("signature envelope lacks certs"))?;
    let cert_chain: Vec<Vec<u8>> = certs
        .iter()
        .map(|c| {
            c.as_bytes()
                .map(<[u8]>::to_vec)
                .ok_or_else(|| parse_err("certs entries must be byte strings"))
        })
        .collect::<Result<_>>()?;
    if cert_chain.is_empty() {
        return Err(parse_err("signature envelope has empty cert chain"));
    }
    let signature_bytes = value
        .get("sig")
        .and_then(Value::as_bytes)
        .ok_or_else(|| parse_err("signature envelope lacks sig"))?
        .to_vec();
    Ok(SignatureEnvelope {
        algorithm: SignatureAlgorithm::from_name(alg),
        cert_chain,
        signature_bytes,
    })
}

fn parse_hard_binding(assertion: &Assertion) -> Result<HardBinding> {
    let AssertionContent::Structured(value) = &assertion.content else {
        return Err(parse_err("hard-binding assertion is not structured cbor"));
    };
    let alg = value
        .get("alg")
        .and_then(Value::as_text)
        .ok_or_else(|| parse_err("hard binding lacks alg"))?;
    // SHA-256 is the only accepted binding algorithm.
    if alg != "sha256" {
        return Err(parse_err(format!("hard binding algorithm {alg:?} not accepted")));
    }
    let mut exclusions = Vec::new();
    for entry in value
        .get("exclusions")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("hard binding lacks exclusions"))?
    {
        let start = entry
            .get("start")
            .and_then(Value::as_int)
            .and_then(|n| u64::try_from(n).ok())
            .ok_or_else(|| parse_err("exclusion lacks start"))?;
        let length = entry
            .get("length")
            .and_then(Value::as_int)
            .and_then(|n| u64::try_from(n).ok())
            .ok_or_else(|| parse_err("exclusion lacks length"))?;
        exclusions.push(ByteRange::new(start, length));
    }
    let expected_digest = value
        .get("hash")
        .and_then(Value::as_bytes)
        .and_then(Digest256::from_slice)
        .ok_or_else(|| parse_err("hard binding lacks 32-byte hash"))?;
    Ok(HardBinding {
        exclusions,
        expected_digest,
    })
}

// --- Encoding (used by the fixture signer and round-trip tests) ---

pub fn claim_to_cbor(claim: &Claim) -> Value {
    let mut entries = vec![
        ("claim_generator", Value::text(&claim.claim_generator)),
        ("instance_id", Value::text(&claim.instance_id)),
        (
            "assertions",
            Value::Array(
                claim
                    .assertion_refs
                    .iter()
                    .map(|(label, digest)| {
                        Value::map(vec![
                            ("label", Value::text(label)),
                            ("digest", Value::Bytes(digest.0.to_vec())),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("signature", Value::text(&claim.signature_ref)),
    ];
    if !claim.ingredient_refs.is_empty() {
        entries.push((
            "ingredients",
            Value::Array(
                claim
                    .ingredient_refs
                    .iter()
                    .map(|ingredient| {
                        let (key, text) = match &ingredient.target {
                            IngredientTarget::Internal(label) => ("label", label),
                            IngredientTarget::External(uri) => ("uri", uri),
                        };
                        Value::map(vec![
                            (key, Value::text(text)),
                            ("digest", Value::Bytes(ingredient.digest.0.to_vec())),
                        ])
                    })
                    .collect(),
            ),
        ));
    }
    if let Some(ts) = claim.created_at {
        entries.push((
            "created_at",
            Value::text(ts.to_rfc3339_opts(SecondsFormat::Secs, true)),
        ));
    }
    Value::map(entries)
}

pub fn hard_binding_to_cbor(binding: &HardBinding) -> Value {
    Value::map(vec![
        ("alg", Value::text("sha256")),
        (
            "exclusions",
            Value::Array(
                binding
                    .exclusions
                    .iter()
                    .map(|r| {
                        Value::map(vec![
                            ("start", Value::Int(r.offset as i128)),
                            ("length", Value::Int(r.length as i128)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("hash", Value::Bytes(binding.expected_digest.0.to_vec())),
    ])
}

pub fn signature_envelope_to_cbor(envelope: &SignatureEnvelope) -> Value {
    Value::map(vec![
        ("alg", Value::text(envelope.algorithm.name())),
        (
            "certs",
            Value::Array(
                envelope
                    .cert_chain
                    .iter()
                    .map(|der| Value::Bytes(der.clone()))
                    .collect(),
            ),
        ),
        ("sig", Value::Bytes(envelope.signature_bytes.clone())),
    ])
}

fn cbor_leaf_box(label: &str, fourcc: [u8; 4], payload: Vec<u8>) -> JumbfBox {
    JumbfBox::superbox(
        BoxDescription::labeled(content_type_uuid(fourcc), label),
        vec![JumbfBox::leaf(CBOR_TYPE, payload)],
    )
}

/// Builds the box tree for one manifest from raw parts. `claim_bytes`
/// must already be the canonical claim encoding.
pub fn manifest_to_box(
    label: &str,
    assertions: &[Assertion],
    claim_bytes: Vec<u8>,
    envelope: &SignatureEnvelope,
) -> JumbfBox {
    let assertion_boxes = assertions
        .iter()
        .map(|a| cbor_leaf_box(&a.label, *b"cbas", a.bytes.clone()))
        .collect();
    JumbfBox::superbox(
        BoxDescription::labeled(content_type_uuid(*b"c2ma"), label),
        vec![
            JumbfBox::superbox(
                BoxDescription::labeled(content_type_uuid(*b"c2as"), labels::ASSERTIONS),
                assertion_boxes,
            ),
            cbor_leaf_box(labels::CLAIM, *b"c2cl", claim_bytes),
            cbor_leaf_box(
                labels::SIGNATURE,
                *b"c2cs",
                cbor::encode(&signature_envelope_to_cbor(envelope)),
            ),
        ],
    )
}

pub fn store_root_box(manifest_boxes: Vec<JumbfBox>) -> JumbfBox {
    JumbfBox::superbox(
        BoxDescription::labeled(content_type_uuid(*b"c2pa"), labels::STORE),
        manifest_boxes,
    )
}

/// Re-encodes a parsed store to its box tree; `parse_manifest_store` of
/// the result is structurally equal to the input.
pub fn store_to_box_tree(store: &ManifestStore) -> JumbfBox {
    let manifest_boxes = store
        .manifests
        .iter()
        .map(|m| manifest_to_box(&m.label, &m.assertions, m.claim_bytes.clone(), &m.signature))
        .collect();
    store_root_box(manifest_boxes)
}

/// Recomputes each referenced assertion's digest against the claim's
/// declared value. Mismatches are results, not errors.
pub fn resolve_assertions(manifest: &Manifest) -> Vec<(String, bool)> {
    manifest
        .claim
        .assertion_refs
        .iter()
        .map(|(label, declared)| {
            let ok = manifest
                .assertion(label)
                .map(|a| a.digest() == *declared)
                .unwrap_or(false);
            (label.clone(), ok)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditHistoryEntry {
    pub manifest_label: String,
    pub claim_generator: String,
    pub timestamp: Option<DateTime<Utc>>,
    pub action: Option<String>,
    /// Digest by which a later manifest references this one; none for the
    /// active manifest.
    pub ingredient_digest: Option<Digest256>,
    pub cycle_detected: bool,
}

/// Walks the ingredient graph from the active manifest to its roots,
/// returning entries oldest-first. A reference back into the walk is
/// reported once with `cycle_detected` set instead of recursing.
pub fn extract_edit_history(store: &ManifestStore) -> Vec<EditHistoryEntry> {
    let mut entries = Vec::new();
    let mut emitted: HashSet<String> = HashSet::new();
    let mut in_progress: HashSet<String> = HashSet::new();
    walk_history(
        store,
        &store.active_label,
        None,
        &mut in_progress,
        &mut emitted,
        &mut entries,
    );
    entries
}

fn walk_history(
    store: &ManifestStore,
    label: &str,
    referenced_as: Option<Digest256>,
    in_progress: &mut HashSet<String>,
    emitted: &mut HashSet<String>,
    entries: &mut Vec<EditHistoryEntry>,
) {
    let Some(manifest) = store.get(label) else {
        return; // dangling internal reference; surfaced elsewhere
    };
    if emitted.contains(label) {
        return; // diamond in the DAG, already listed
    }
    in_progress.insert(label.to_string());

    let mut cycle_detected = false;
    for ingredient in &manifest.claim.ingredient_refs {
        let IngredientTarget::Internal(target) = &ingredient.target else {
            continue;
        };
        if in_progress.contains(target) {
            cycle_detected = true;
            continue;
        }
        walk_history(
            store,
            target,
            Some(ingredient.digest),
            in_progress,
            emitted,
            entries,
        );
    }

    in_progress.remove(label);
    emitted.insert(label.to_string());
    entries.push(EditHistoryEntry {
        manifest_label: manifest.label.clone(),
        claim_generator: manifest.claim.claim_generator.clone(),
        timestamp: manifest.claim.created_at,
        action: first_action(manifest),
        ingredient_digest: referenced_as,
        cycle_detected,
    });
}

fn first_action(manifest: &Manifest) -> Option<String> {
    let assertion = manifest.assertion(labels::ACTIONS)?;
    let AssertionContent::Structured(value) = &assertion.content else {
        return None;
    };
    value
        .get("actions")?
        .as_array()?
        .first()?
        .get("action")?
        .as_text()
        .map(str::to_string)
}

/// Names the generator when the manifest itself declares generative
/// origin: either an actions assertion with the trained-algorithmic-media
/// source type, or a claim generator matching the rule table.
pub fn classify_generative_origin(manifest: &Manifest, rules: &[AiSignatureRule]) -> Option<String> {
    if let Some(assertion) = manifest.assertion(labels::ACTIONS) {
        if let AssertionContent::Structured(value) = &assertion.content {
            let actions = value.get("actions").and_then(Value::as_array).unwrap_or(&[]);
            for action in actions {
                let source_type = action
                    .get("digitalSourceType")
                    .and_then(Value::as_text)
                    .unwrap_or("");
                if source_type
                    .to_lowercase()
                    .contains(&TRAINED_ALGORITHMIC_MEDIA.to_lowercase())
                {
                    let generator = action
                        .get("softwareAgent")
                        .and_then(Value::as_text)
                        .unwrap_or(&manifest.claim.claim_generator);
                    return Some(generator.to_string());
                }
            }
        }
    }

    let generator_text = &manifest.claim.claim_generator;
    rules
        .iter()
        .filter(|rule| {
            matches!(
                rule.field_scope,
                FieldScope::ClaimGenerator | FieldScope::AnyText
            )
        })
        .find(|rule| {
            generator_text
                .to_lowercase()
                .contains(&rule.pattern.to_lowercase())
        })
        .map(|rule| rule.generator_name.clone())
}
