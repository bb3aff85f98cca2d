//! Certificate-chain validation against a local trust store, claim
//! signature verification, and hard-binding hash computation.
//!
//! All trust decisions are local: roots, pins, and revocations come from
//! files; no network lookups of any kind.

use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, Utc};
use p256::ecdsa::signature::Verifier;
use sha2::{Digest, Sha256};
use x509_cert::certificate::Certificate;
use x509_cert::der::{Decode, Encode};

use crate::container::{ByteRange, ImageBytes};
use crate::error::{Error, Result};
use crate::manifest::{HardBinding, SignatureAlgorithm, SignatureEnvelope};

// Signature algorithm OIDs accepted on certificates.
const OID_ECDSA_WITH_SHA256: &str = "1.2.840.10045.4.3.2";
const OID_SHA256_WITH_RSA: &str = "1.2.840.113549.1.1.11";

// Extension OIDs.
const OID_BASIC_CONSTRAINTS: &str = "2.5.29.19";
const OID_KEY_USAGE: &str = "2.5.29.15";

/// A SHA-256 digest value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest256(pub [u8; 32]);

impl Digest256 {
    pub fn of(data: &[u8]) -> Self {
        Digest256(Sha256::digest(data).into())
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        <[u8; 32]>::try_from(bytes).ok().map(Digest256)
    }

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Local trust anchors plus pinning and revocation material. An empty
/// store is valid and rejects every chain.
#[derive(Debug, Default, Clone)]
pub struct TrustStore {
    roots: Vec<Certificate>,
    pinned_spki_digests: HashSet<[u8; 32]>,
    revoked_serials: HashSet<([u8; 32], Vec<u8>)>,
}

impl TrustStore {
    pub fn new() -> Self {
        TrustStore::default()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    pub fn pinning_enabled(&self) -> bool {
        !self.pinned_spki_digests.is_empty()
    }

    pub fn add_root_der(&mut self, der: &[u8]) -> Result<()> {
        let cert = Certificate::from_der(der)
            .map_err(|e| Error::TrustStore(format!("bad root certificate: {e}")))?;
        self.roots.push(cert);
        Ok(())
    }

    /// Loads every CERTIFICATE block from a PEM bundle.
    pub fn add_roots_pem(&mut self, pem: &str) -> Result<usize> {
        let certs = Certificate::load_pem_chain(pem.as_bytes())
            .map_err(|e| Error::TrustStore(format!("bad PEM bundle: {e}")))?;
        let count = certs.len();
        self.roots.extend(certs);
        Ok(count)
    }

    pub fn pin_spki(&mut self, digest: Digest256) {
        self.pinned_spki_digests.insert(digest.0);
    }

    /// Pin list file: one hex SPKI SHA-256 per line; blank lines and
    /// `#` comments ignored.
    pub fn add_pins_text(&mut self, text: &str) -> Result<usize> {
        let mut count = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let raw = hex::decode(line)
                .map_err(|_| Error::TrustStore(format!("pin line {}: bad hex", lineno + 1)))?;
            let digest = Digest256::from_slice(&raw)
                .ok_or_else(|| Error::TrustStore(format!("pin line {}: not 32 bytes", lineno + 1)))?;
            self.pin_spki(digest);
            count += 1;
        }
        Ok(count)
    }

    pub fn revoke(&mut self, issuer_hash: Digest256, serial: &[u8]) {
        self.revoked_serials.insert((issuer_hash.0, serial.to_vec()));
    }

    /// Revocation list file: `issuerhash:serial` hex pairs, one per line.
    pub fn add_revocations_text(&mut self, text: &str) -> Result<usize> {
        let mut count = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::TrustStore(format!("revocation line {}: {msg}", lineno + 1));
            let (ih, serial) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let issuer_hash = Digest256::from_slice(
                &hex::decode(ih.trim()).map_err(|_| bad("bad issuer hash hex"))?,
            )
            .ok_or_else(|| bad("issuer hash not 32 bytes"))?;
            let serial = hex::decode(serial.trim()).map_err(|_| bad("bad serial hex"))?;
            self.revoke(issuer_hash, &serial);
            count += 1;
        }
        Ok(count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChainStatus {
    Trusted,
    Untrusted,
    Expired,
    Revoked,
    PinMismatch,
    Malformed,
}

impl fmt::Display for ChainStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChainStatus::Trusted => "trusted",
            ChainStatus::Untrusted => "untrusted",
            ChainStatus::Expired => "expired",
            ChainStatus::Revoked => "revoked",
            ChainStatus::PinMismatch => "pin mismatch",
            ChainStatus::Malformed => "malformed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub status: ChainStatus,
    pub leaf_subject: String,
    pub chain_length: usize,
}

/// Validates a leaf-first DER chain against the store at time `now`.
///
/// Every defect is evaluated independently and the most severe one wins:
/// Malformed > Revoked > Expired > PinMismatch > Untrusted. `Trusted`
/// means every signature link verified to a store root, every certificate
/// was inside its validity window, nothing was revoked, and the leaf
/// passed pinning (when pinning is configured).
pub fn verify_chain(chain: &[Vec<u8>], store: &TrustStore, now: DateTime<Utc>) -> ChainResult {
    if chain.is_empty() {
        return ChainResult {
            status: ChainStatus::Malformed,
            leaf_subject: String::new(),
            chain_length: 0,
        };
    }

    let mut certs = Vec::with_capacity(chain.len());
    for der in chain {
        match Certificate::from_der(der) {
            Ok(cert) => certs.push(cert),
            Err(_) => {
                return ChainResult {
                    status: ChainStatus::Malformed,
                    leaf_subject: String::new(),
                    chain_length: chain.len(),
                }
            }
        }
    }
    let leaf_subject = certs[0].tbs_certificate.subject.to_string();

    let mut untrusted = false;
    let mut expired = false;
    let mut revoked = false;
    let mut pin_mismatch = false;
    let mut malformed = false;

    // Validity windows and revocation, for every presented certificate.
    let now_secs = now.timestamp();
    for cert in &certs {
        let validity = &cert.tbs_certificate.validity;
        let nb = validity.not_before.to_unix_duration().as_secs() as i64;
        let na = validity.not_after.to_unix_duration().as_secs() as i64;
        if now_secs < nb || now_secs > na {
            expired = true;
        }
        match issuer_name_hash(cert) {
            Ok(ih) => {
                let serial = cert.tbs_certificate.serial_number.as_bytes().to_vec();
                if store.revoked_serials.contains(&(ih.0, serial)) {
                    revoked = true;
                }
            }
            Err(_) => malformed = true,
        }
    }

    // Leaf must carry the digital-signature usage marker.
    match leaf_allows_content_signing(&certs[0]) {
        Ok(true) => {}
        Ok(false) => untrusted = true,
        Err(_) => malformed = true,
    }

    // Signature links within the presented chain.
    for pair in certs.windows(2) {
        if !issued_by(&pair[0], &pair[1]) {
            untrusted = true;
        }
    }

    // Path must terminate at a store root: either the top certificate is
    // itself a root, or a root issued it.
    let top = certs.last().unwrap();
    let anchored = store.roots.iter().any(|root| {
        same_certificate(root, top) || (is_ca(root).unwrap_or(false) && issued_by(top, root))
    });
    if !anchored {
        untrusted = true;
    }

    // Intermediates must be CA certificates.
    for cert in &certs[1..] {
        if !is_ca(cert).unwrap_or(false) {
            untrusted = true;
        }
    }

    if store.pinning_enabled() {
        match spki_sha256(&certs[0]) {
            Ok(digest) => {
                if !store.pinned_spki_digests.contains(&digest.0) {
                    pin_mismatch = true;
                }
            }
            Err(_) => malformed = true,
        }
    }

    let status = if malformed {
        ChainStatus::Malformed
    } else if revoked {
        ChainStatus::Revoked
    } else if expired {
        ChainStatus::Expired
    } else if pin_mismatch {
        ChainStatus::PinMismatch
    } else if untrusted {
        ChainStatus::Untrusted
    } else {
        ChainStatus::Trusted
    };

    ChainResult {
        status,
        leaf_subject,
        chain_length: chain.len(),
    }
}

fn same_certificate(a: &Certificate, b: &Certificate) -> bool {
    a.to_der().ok() == b.to_der().ok()
}

/// Checks that `issuer` names and cryptographically issued `cert`.
fn issued_by(cert: &Certificate, issuer: &Certificate) -> bool {
    if cert.tbs_certificate.issuer != issuer.tbs_certificate.subject {
        return false;
    }
    let Ok(tbs) = cert.tbs_certificate.to_der() else {
        return false;
    };
    let Some(sig) = cert.signature.as_bytes() else {
        return false;
    };
    let Ok(spki) = issuer.tbs_certificate.subject_public_key_info.to_der() else {
        return false;
    };
    match cert.signature_algorithm.oid.to_string().as_str() {
        OID_ECDSA_WITH_SHA256 => {
            use p256::ecdsa::{DerSignature, VerifyingKey};
            use p256::pkcs8::DecodePublicKey;
            let Ok(key) = VerifyingKey::from_public_key_der(&spki) else {
                return false;
            };
            let Ok(sig) = DerSignature::try_from(sig) else {
                return false;
            };
            key.verify(&tbs, &sig).is_ok()
        }
        OID_SHA256_WITH_RSA => {
            use rsa::pkcs1v15::{Signature, VerifyingKey};
            use rsa::pkcs8::DecodePublicKey;
            use rsa::RsaPublicKey;
            let Ok(key) = RsaPublicKey::from_public_key_der(&spki) else {
                return false;
            };
            let verifier = VerifyingKey::<Sha256>::new(key);
            let Ok(sig) = Signature::try_from(sig) else {
                return false;
            };
            verifier.verify(&tbs, &sig).is_ok()
        }
        _ => false,
    }
}

fn find_extension<'a>(cert: &'a Certificate, oid: &str) -> Option<&'a x509_cert::ext::Extension> {
    cert.tbs_certificate
        .extensions
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .find(|ext| ext.extn_id.to_string() == oid)
}

fn is_ca(cert: &Certificate) -> Result<bool> {
    let Some(ext) = find_extension(cert, OID_BASIC_CONSTRAINTS) else {
        return Ok(false);
    };
    let bc = x509_cert::ext::pkix::BasicConstraints::from_der(ext.extn_value.as_bytes())
        .map_err(|e| Error::TrustStore(format!("bad basicConstraints: {e}")))?;
    Ok(bc.ca)
}

fn leaf_allows_content_signing(cert: &Certificate) -> Result<bool> {
    let Some(ext) = find_extension(cert, OID_KEY_USAGE) else {
        return Ok(false);
    };
    let ku = x509_cert::ext::pkix::KeyUsage::from_der(ext.extn_value.as_bytes())
        .map_err(|e| Error::TrustStore(format!("bad keyUsage: {e}")))?;
    Ok(ku.digital_signature())
}

/// SHA-256 over the DER SubjectPublicKeyInfo; the value that pin lists hold.
pub fn spki_sha256(cert: &Certificate) -> Result<Digest256> {
    let der = cert
        .tbs_certificate
        .subject_public_key_info
        .to_der()
        .map_err(|e| Error::TrustStore(format!("bad SPKI: {e}")))?;
    Ok(Digest256::of(&der))
}

/// SHA-256 over the DER issuer Name; pairs with the serial in revocation
/// lists.
pub fn issuer_name_hash(cert: &Certificate) -> Result<Digest256> {
    let der = cert
        .tbs_certificate
        .issuer
        .to_der()
        .map_err(|e| Error::TrustStore(format!("bad issuer name: {e}")))?;
    Ok(Digest256::of(&der))
}

pub fn spki_sha256_der(cert_der: &[u8]) -> Result<Digest256> {
    let cert = Certificate::from_der(cert_der)
        .map_err(|e| Error::TrustStore(format!("bad certificate: {e}")))?;
    spki_sha256(&cert)
}

/// True iff `signature_bytes` verifies over `canonical_claim` under the
/// leaf certificate's key with the declared algorithm. ES256 signatures
/// are the raw fixed-width `r||s` form; RS256 is PKCS#1 v1.5.
pub fn verify_claim_signature(envelope: &SignatureEnvelope, canonical_claim: &[u8]) -> Result<bool> {
    let Some(leaf_der) = envelope.cert_chain.first() else {
        return Ok(false);
    };
    let Ok(leaf) = Certificate::from_der(leaf_der) else {
        return Ok(false);
    };
    let Ok(spki) = leaf.tbs_certificate.subject_public_key_info.to_der() else {
        return Ok(false);
    };

    match &envelope.algorithm {
        SignatureAlgorithm::Es256 => {
            use p256::ecdsa::{Signature, VerifyingKey};
            use p256::pkcs8::DecodePublicKey;
            let Ok(key) = VerifyingKey::from_public_key_der(&spki) else {
                return Ok(false);
            };
            let Ok(sig) = Signature::from_slice(&envelope.signature_bytes) else {
                return Ok(false);
            };
            Ok(key.verify(canonical_claim, &sig).is_ok())
        }
        SignatureAlgorithm::Rs256 => {
            use rsa::pkcs1v15::{Signature, VerifyingKey};
            use rsa::pkcs8::DecodePublicKey;
            use rsa::RsaPublicKey;
            let Ok(key) = RsaPublicKey::from_public_key_der(&spki) else {
                return Ok(false);
            };
            let verifier = VerifyingKey::<Sha256>::new(key);
            let Ok(sig) = Signature::try_from(envelope.signature_bytes.as_slice()) else {
                return Ok(false);
            };
            Ok(verifier.verify(canonical_claim, &sig).is_ok())
        }
        SignatureAlgorithm::Other(name) => Err(Error::UnsupportedAlgorithm(name.clone())),
    }
}

/// Sorts and merges byte ranges into a disjoint, offset-ordered set.
pub fn normalize_exclusions(exclusions: &[ByteRange]) -> Vec<ByteRange> {
    let mut sorted: Vec<ByteRange> = exclusions.iter().copied().filter(|r| r.length > 0).collect();
    sorted.sort();
    let mut merged: Vec<ByteRange> = Vec::with_capacity(sorted.len());
    for range in sorted {
        match merged.last_mut() {
            Some(last) if range.offset <= last.end() => {
                let end = last.end().max(range.end());
                last.length = end - last.offset;
            }
            _ => merged.push(range),
        }
    }
    merged
}

/// SHA-256 over the file with the excluded ranges skipped. Streams over
/// the included spans; nothing is copied.
pub fn compute_content_hash(image: &ImageBytes, exclusions: &[ByteRange]) -> Result<Digest256> {
    let bytes = image.bytes();
    let file_len = bytes.len() as u64;
    for range in exclusions {
        if range.offset.checked_add(range.length).is_none() || range.end() > file_len {
            return Err(Error::RangeOutOfBounds {
                offset: range.offset,
                length: range.length,
                file_len,
            });
        }
    }
    let mut hasher = Sha256::new();
    let mut pos = 0u64;
    for range in normalize_exclusions(exclusions) {
        hasher.update(&bytes[pos as usize..range.offset as usize]);
        pos = range.end();
    }
    hasher.update(&bytes[pos as usize..]);
    Ok(Digest256(hasher.finalize().into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BindingVerdict {
    Match,
    /// The binding does not cover this file; the note says why.
    Mismatch { note: String },
}

/// Match iff the recomputed content hash equals the binding's digest. A
/// binding whose exclusions point outside the file cannot bind it and
/// reports Mismatch with a diagnostic rather than an error.
pub fn verify_hard_binding(binding: &HardBinding, image: &ImageBytes) -> BindingVerdict {
    match compute_content_hash(image, &binding.exclusions) {
        Ok(digest) if digest == binding.expected_digest => BindingVerdict::Match,
        Ok(digest) => BindingVerdict::Mismatch {
            note: format!(
                "content digest {} != declared {}",
                digest, binding.expected_digest
            ),
        },
        Err(err) => BindingVerdict::Mismatch {
            note: format!("binding not computable: {err}"),
        },
    }
}
