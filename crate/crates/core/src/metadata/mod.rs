//! Metadata heuristics: EXIF, IPTC, and PNG text parsing into normalized
//! records, plus the configurable AI-generator signature rule engine.

mod exif;
mod iptc;
mod png_text;

pub use exif::parse_exif;
pub use iptc::parse_iptc;
pub use png_text::parse_png_text;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataSource {
    Exif,
    Iptc,
    PngText,
}

impl std::fmt::Display for MetadataSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetadataSource::Exif => "EXIF",
            MetadataSource::Iptc => "IPTC",
            MetadataSource::PngText => "PNG text",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataRecord {
    pub source: MetadataSource,
    pub key: String,
    pub value: String,
}

/// Normalized key/value records, order preserved per source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataRecordSet {
    pub records: Vec<MetadataRecord>,
}

impl MetadataRecordSet {
    pub fn push(&mut self, source: MetadataSource, key: impl Into<String>, value: impl Into<String>) {
        self.records.push(MetadataRecord {
            source,
            key: key.into(),
            value: value.into(),
        });
    }

    pub fn extend(&mut self, other: MetadataRecordSet) {
        self.records.extend(other.records);
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn value(&self, source: MetadataSource, key: &str) -> Option<&str> {
        self.records
            .iter()
            .find(|r| r.source == source && r.key == key)
            .map(|r| r.value.as_str())
    }
}

/// Text rendering for values that fail to decode: hex with a marker
/// suffix, so downstream display never chokes on raw bytes.
pub(crate) fn binary_fallback(bytes: &[u8]) -> String {
    format!("{} (binary)", hex::encode(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldScope {
    AnyText,
    ExifSoftware,
    ExifDescription,
    PngParameters,
    ClaimGenerator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AiSignatureRule {
    pub rule_id: String,
    pub field_scope: FieldScope,
    /// Case-insensitive substring; no regular expressions, so the table
    /// stays auditable and rule cost stays linear.
    pub pattern: String,
    pub generator_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AiMatch {
    pub rule_id: String,
    pub generator_name: String,
    pub matched_source: MetadataSource,
    pub matched_key: String,
    pub matched_excerpt: String,
}

const DEFAULT_RULES_JSON: &str = include_str!("default_rules.json");

pub fn default_rules() -> Vec<AiSignatureRule> {
    load_rules(DEFAULT_RULES_JSON).expect("embedded rule table is valid")
}

pub fn load_rules(json: &str) -> Result<Vec<AiSignatureRule>> {
    let rules: Vec<AiSignatureRule> =
        serde_json::from_str(json).map_err(|e| Error::MalformedMetadata(format!("rule table: {e}")))?;
    let mut seen = std::collections::HashSet::new();
    for rule in &rules {
        if rule.pattern.is_empty() {
            return Err(Error::MalformedMetadata(format!(
                "rule {:?} has an empty pattern",
                rule.rule_id
            )));
        }
        if !seen.insert(rule.rule_id.as_str()) {
            return Err(Error::MalformedMetadata(format!(
                "duplicate rule id {:?}",
                rule.rule_id
            )));
        }
    }
    Ok(rules)
}

/// Case-insensitive substring search returning the byte offset of the
/// match in `haystack`.
pub(crate) fn ci_find(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() {
        return Some(0);
    }
    'outer: for (start, _) in haystack.char_indices() {
        let mut hay_chars = haystack[start..].chars().flat_map(char::to_lowercase);
        for needle_char in needle.chars().flat_map(char::to_lowercase) {
            match hay_chars.next() {
                Some(c) if c == needle_char => {}
                _ => continue 'outer,
            }
        }
        return Some(start);
    }
    None
}

fn scope_admits(scope: FieldScope, record: &MetadataRecord) -> bool {
    match scope {
        FieldScope::AnyText => true,
        FieldScope::ExifSoftware => {
            record.source == MetadataSource::Exif && record.key == "Software"
        }
        FieldScope::ExifDescription => {
            record.source == MetadataSource::Exif && record.key == "ImageDescription"
        }
        FieldScope::PngParameters => {
            record.source == MetadataSource::PngText && record.key == "parameters"
        }
        // Claim generators are not metadata records; that scope is applied
        // by the manifest classifier.
        FieldScope::ClaimGenerator => false,
    }
}

const EXCERPT_CHARS: usize = 80;

/// Runs every rule over every record, in record order then rule order.
pub fn detect_ai_signatures(
    records: &MetadataRecordSet,
    rules: &[AiSignatureRule],
) -> Vec<AiMatch> {
    let mut matches = Vec::new();
    for record in &records.records {
        for rule in rules {
            if !scope_admits(rule.field_scope, record) {
                continue;
            }
            let Some(at) = ci_find(&record.value, &rule.pattern) else {
                continue;
            };
            let excerpt_end = record.value[at..]
                .char_indices()
                .nth(EXCERPT_CHARS)
                .map(|(i, _)| at + i)
                .unwrap_or(record.value.len());
            matches.push(AiMatch {
                rule_id: rule.rule_id.clone(),
                generator_name: rule.generator_name.clone(),
                matched_source: record.source,
                matched_key: record.key.clone(),
                matched_excerpt: record.value[at..excerpt_end].to_string(),
            });
        }
    }
    matches
}

#[cfg(test)]
mod tests;
