//! Fixture signer: generates keypairs and certificate chains, builds
//! manifests, and embeds them into JPEG/PNG carriers. Test support and
//! the `fixture` CLI subcommand only; verification never calls in here.

mod corpus;
mod media;

pub use corpus::{build_corpus, write_corpus, Corpus, CorpusFile, CorpusOptions, IntendedStatus};
pub use media::{
    base_jpeg, base_png, exif_app1_payload, iptc_app13_payload, JpegOptions, PngOptions,
    PngTextChunk,
};

use chrono::{DateTime, Duration as ChronoDuration, Utc};
use p256::ecdsa::signature::Signer as _;
use rand_core::CryptoRngCore;
use sha2::{Digest, Sha256};
use x509_cert::builder::{Builder, CertificateBuilder, Profile};
use x509_cert::der::pem::LineEnding;
use x509_cert::der::{Encode, EncodePem};
use x509_cert::name::Name;
use x509_cert::serial_number::SerialNumber;
use x509_cert::spki::SubjectPublicKeyInfoOwned;
use x509_cert::time::Validity;

use crate::cbor::{self, Value};
use crate::container::{
    self, embed_jumbf_jpeg_with_capacity, extract_jumbf, strip_provenance, ByteRange, ImageBytes,
    ImageFormat, JumbfExtraction,
};
use crate::error::{Error, Result};
use crate::jumbf::{parse_box_tree, serialize_box_tree, JumbfBox};
use crate::manifest::{
    self, labels, manifest_to_box, parse_manifest_store, store_root_box, Assertion, Claim,
    HardBinding, IngredientRef, IngredientTarget, SignatureAlgorithm, SignatureEnvelope,
};
use crate::trust::{compute_content_hash, Digest256};

/// IPTC digital source type URI declared by generative tools.
pub const TRAINED_ALGORITHMIC_MEDIA_URI: &str =
    "http://cv.iptc.org/newscodes/digitalsourcetype/trainedAlgorithmicMedia";

enum KeyMaterial {
    Es256(p256::ecdsa::SigningKey),
    Rs256(rsa::pkcs1v15::SigningKey<sha2::Sha256>),
}

/// A private key plus its leaf-first certificate chain.
pub struct SigningIdentity {
    key: KeyMaterial,
    pub cert_chain: Vec<Vec<u8>>,
}

impl SigningIdentity {
    pub fn algorithm(&self) -> SignatureAlgorithm {
        match self.key {
            KeyMaterial::Es256(_) => SignatureAlgorithm::Es256,
            KeyMaterial::Rs256(_) => SignatureAlgorithm::Rs256,
        }
    }

    /// Detached signature over `message`. ES256 emits the fixed-width
    /// r||s form; both algorithms sign deterministically, which keeps
    /// fixture output byte-stable.
    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        match &self.key {
            KeyMaterial::Es256(key) => {
                let signature: p256::ecdsa::Signature = key.sign(message);
                signature.to_bytes().to_vec()
            }
            KeyMaterial::Rs256(key) => {
                let signature: rsa::pkcs1v15::Signature = key.sign(message);
                Box::<[u8]>::from(signature).into_vec()
            }
        }
    }

    fn signature_len(&self) -> usize {
        match &self.key {
            KeyMaterial::Es256(_) => 64,
            KeyMaterial::Rs256(key) => {
                use p256::ecdsa::signature::Keypair;
                use rsa::traits::PublicKeyParts;
                let verifying: rsa::pkcs1v15::VerifyingKey<sha2::Sha256> = key.verifying_key();
                verifying.as_ref().size()
            }
        }
    }
}

/// A self-signed root that can issue content-signing leaves.
pub struct TestCa {
    name: String,
    key: p256::ecdsa::SigningKey,
    root_der: Vec<u8>,
    next_serial: u32,
}

/// Builds a root CA valid for `validity_days` from `now`.
pub fn make_test_ca(
    name: &str,
    now: DateTime<Utc>,
    validity_days: i64,
    rng: &mut impl CryptoRngCore,
) -> Result<TestCa> {
    assert!(validity_days >= 1, "CA validity must be at least one day");
    let key = p256::ecdsa::SigningKey::random(rng);
    let subject: Name = format!("CN={name}")
        .parse()
        .map_err(|e| Error::Signing(format!("bad CA name: {e}")))?;
    let spki = es256_spki(&key)?;
    let builder = CertificateBuilder::new(
        Profile::Root,
        SerialNumber::from(1u32),
        validity_window(now, now + ChronoDuration::days(validity_days))?,
        subject,
        spki,
        &key,
    )
    .map_err(|e| Error::Signing(format!("root builder: {e}")))?;
    let cert = builder
        .build::<p256::ecdsa::DerSignature>()
        .map_err(|e| Error::Signing(format!("root build: {e}")))?;
    let root_der = cert
        .to_der()
        .map_err(|e| Error::Signing(format!("root der: {e}")))?;
    Ok(TestCa {
        name: name.to_string(),
        key,
        root_der,
        next_serial: 2,
    })
}

impl TestCa {
    pub fn root_der(&self) -> &[u8] {
        &self.root_der
    }

    pub fn root_pem(&self) -> Result<String> {
        use x509_cert::der::Decode;
        let cert = x509_cert::Certificate::from_der(&self.root_der)
            .map_err(|e| Error::Signing(format!("root reparse: {e}")))?;
        cert.to_pem(LineEnding::LF)
            .map_err(|e| Error::Signing(format!("root pem: {e}")))
    }

    /// Issues an ES256 content-signing leaf valid over the given window.
    pub fn issue_es256(
        &mut self,
        common_name: &str,
        not_before: DateTime<Utc>,
        not_after: DateTime<Utc>,
        rng: &mut impl CryptoRngCore,
    ) -> Result<SigningIdentity> {
        let key = p256::ecdsa::SigningKey::random(rng);
        let leaf_der = self.issue_leaf_cert(common_name, not_before, not_after, es256_spki(&key)?)?;
        Ok(SigningIdentity {
            key: KeyMaterial::Es256(key),
            cert_chain: vec![leaf_der, self.root_der.clone()],
        })
    }

    /// Issues an RS256 leaf. RSA keygen is slow; tests use small keys.
    pub fn issue_rs256(
        &mut self,
        common_name: &str,
        not_before: DateTime<Utc>,
        not_after: DateTime<Utc>,
        bits: usize,
        rng: &mut impl CryptoRngCore,
    ) -> Result<SigningIdentity> {
        let private = rsa::RsaPrivateKey::new(rng, bits)
            .map_err(|e| Error::Signing(format!("rsa keygen: {e}")))?;
        let spki = {
            use rsa::pkcs8::EncodePublicKey;
            let der = private
                .to_public_key()
                .to_public_key_der()
                .map_err(|e| Error::Signing(format!("rsa spki: {e}")))?;
            SubjectPublicKeyInfoOwned::try_from(der.as_bytes())
                .map_err(|e| Error::Signing(format!("rsa spki decode: {e}")))?
        };
        let leaf_der = self.issue_leaf_cert(common_name, not_before, not_after, spki)?;
        Ok(SigningIdentity {
            key: KeyMaterial::Rs256(rsa::pkcs1v15::SigningKey::new(private)),
            cert_chain: vec![leaf_der, self.root_der.clone()],
        })
    }

    fn issue_leaf_cert(
        &mut self,
        common_name: &str,
        not_before: DateTime<Utc>,
        not_after: DateTime<Utc>,
        spki: SubjectPublicKeyInfoOwned,
    ) -> Result<Vec<u8>> {
        let issuer: Name = format!("CN={}", self.name)
            .parse()
            .map_err(|e| Error::Signing(format!("bad issuer name: {e}")))?;
        let subject: Name = format!("CN={common_name}")
            .parse()
            .map_err(|e| Error::Signing(format!("bad subject name: {e}")))?;
        let serial = SerialNumber::from(self.next_serial);
        self.next_serial += 1;
        // The Leaf profile carries the digital-signature key usage the
        // verifier requires of content signers.
        let builder = CertificateBuilder::new(
            Profile::Leaf {
                issuer,
                enable_key_agreement: false,
                enable_key_encipherment: false,
            },
            serial,
            validity_window(not_before, not_after)?,
            subject,
            spki,
            &self.key,
        )
        .map_err(|e| Error::Signing(format!("leaf builder: {e}")))?;
        let cert = builder
            .build::<p256::ecdsa::DerSignature>()
            .map_err(|e| Error::Signing(format!("leaf build: {e}")))?;
        cert.to_der()
            .map_err(|e| Error::Signing(format!("leaf der: {e}")))
    }
}

fn es256_spki(key: &p256::ecdsa::SigningKey) -> Result<SubjectPublicKeyInfoOwned> {
    use p256::pkcs8::EncodePublicKey;
    let der = key
        .verifying_key()
        .to_public_key_der()
        .map_err(|e| Error::Signing(format!("spki: {e}")))?;
    SubjectPublicKeyInfoOwned::try_from(der.as_bytes())
        .map_err(|e| Error::Signing(format!("spki decode: {e}")))
}

fn validity_window(not_before: DateTime<Utc>, not_after: DateTime<Utc>) -> Result<Validity> {
    let to_time = |ts: DateTime<Utc>| -> Result<x509_cert::time::Time> {
        let system = std::time::SystemTime::UNIX_EPOCH
            + std::time::Duration::from_secs(
                u64::try_from(ts.timestamp())
                    .map_err(|_| Error::Signing("timestamp before epoch".into()))?,
            );
        x509_cert::time::Time::try_from(system)
            .map_err(|e| Error::Signing(format!("validity time: {e}")))
    };
    Ok(Validity {
        not_before: to_time(not_before)?,
        not_after: to_time(not_after)?,
    })
}

/// Actions assertion declaring generative origin via the
/// trained-algorithmic-media source type.
pub fn ai_actions_assertion(software_agent: &str) -> Assertion {
    Assertion::structured(
        labels::ACTIONS,
        Value::map(vec![(
            "actions",
            Value::Array(vec![Value::map(vec![
                ("action", Value::text("c2pa.created")),
                ("digitalSourceType", Value::text(TRAINED_ALGORITHMIC_MEDIA_URI)),
                ("softwareAgent", Value::text(software_agent)),
            ])]),
        )]),
    )
}

/// Plain capture-style actions assertion.
pub fn capture_actions_assertion() -> Assertion {
    Assertion::structured(
        labels::ACTIONS,
        Value::map(vec![(
            "actions",
            Value::Array(vec![Value::map(vec![(
                "action",
                Value::text("c2pa.created"),
            )])]),
        )]),
    )
}

/// Builds the manifest (assertions, claim, signature, hard binding) and
/// embeds it into the carrier. The hard binding is computed over the
/// emitted file with exclusions exactly covering the inserted carrier;
/// the digest and signature are fixed-width, so carrier geometry is
/// found by fixed-point iteration and then filled in.
///
/// An image that already carries a manifest store keeps its manifests,
/// and the new claim references the previously active one as an
/// ingredient.
pub fn sign_and_embed(
    image: &ImageBytes,
    identity: &SigningIdentity,
    assertions: &[Assertion],
    claim_generator: &str,
    now: DateTime<Utc>,
) -> Result<ImageBytes> {
    sign_and_embed_with_capacity(
        image,
        identity,
        assertions,
        claim_generator,
        now,
        container::DEFAULT_SEGMENT_CAPACITY,
    )
}

/// `sign_and_embed` with an explicit APP11 body capacity so tests can
/// force multi-segment carriers.
pub fn sign_and_embed_with_capacity(
    image: &ImageBytes,
    identity: &SigningIdentity,
    assertions: &[Assertion],
    claim_generator: &str,
    now: DateTime<Utc>,
    capacity: usize,
) -> Result<ImageBytes> {
    if image.format() == ImageFormat::Unknown {
        return Err(Error::UnsupportedFormat);
    }

    // Retain any existing store; the new manifest cites its active
    // manifest as an ingredient.
    let (base, prior_boxes, ingredient) = match extract_jumbf(image)? {
        JumbfExtraction::Present { jumbf, .. } => {
            let store = parse_manifest_store(&parse_box_tree(&jumbf)?)?;
            let active = store.active();
            let ingredient = IngredientRef {
                target: IngredientTarget::Internal(active.label.clone()),
                digest: Digest256::of(&active.claim_bytes),
            };
            let boxes = store
                .manifests
                .iter()
                .map(|m| manifest_to_box(&m.label, &m.assertions, m.claim_bytes.clone(), &m.signature))
                .collect::<Vec<_>>();
            (strip_provenance(image)?, boxes, Some(ingredient))
        }
        JumbfExtraction::Absent => (image.clone(), Vec::new(), None),
    };

    let label = format!("urn:fixture:{:04}", prior_boxes.len() + 1);
    let instance_id = {
        let mut hasher = Sha256::new();
        hasher.update(base.bytes());
        hasher.update(label.as_bytes());
        hasher.update(claim_generator.as_bytes());
        format!("xmp:iid:{}", hex::encode(&hasher.finalize()[..16]))
    };

    let build_file = |binding: &HardBinding,
                      signature_bytes: Vec<u8>|
     -> Result<(ImageBytes, Vec<ByteRange>, Vec<u8>)> {
        let mut all_assertions: Vec<Assertion> = assertions.to_vec();
        all_assertions.push(Assertion::structured(
            labels::HASH_DATA,
            manifest::hard_binding_to_cbor(binding),
        ));

        let claim = Claim {
            claim_generator: claim_generator.to_string(),
            instance_id: instance_id.clone(),
            assertion_refs: all_assertions
                .iter()
                .map(|a| (a.label.clone(), a.digest()))
                .collect(),
            signature_ref: labels::SIGNATURE.to_string(),
            ingredient_refs: ingredient.clone().into_iter().collect(),
            created_at: Some(now),
        };
        let claim_bytes = cbor::encode(&manifest::claim_to_cbor(&claim));
        let envelope = SignatureEnvelope {
            algorithm: identity.algorithm(),
            cert_chain: identity.cert_chain.clone(),
            signature_bytes,
        };

        let mut boxes: Vec<JumbfBox> = prior_boxes.clone();
        boxes.push(manifest_to_box(&label, &all_assertions, claim_bytes.clone(), &envelope));
        let jumbf = serialize_box_tree(&store_root_box(boxes))?;

        let (file, ranges) = match base.format() {
            ImageFormat::Jpeg => embed_jumbf_jpeg_with_capacity(&base, &jumbf, capacity)?,
            ImageFormat::Png => container::embed_jumbf(&base, &jumbf)?,
            ImageFormat::Unknown => return Err(Error::UnsupportedFormat),
        };
        Ok((file, ranges, claim_bytes))
    };

    // Pass 1: find the carrier geometry. Exclusion integers change the
    // carrier size, so iterate until the emitted ranges reproduce
    // themselves.
    let placeholder_sig = vec![0u8; identity.signature_len()];
    let mut exclusions = vec![ByteRange::new(2, 1024)];
    let mut emitted = None;
    for _ in 0..16 {
        let binding = HardBinding {
            exclusions: exclusions.clone(),
            expected_digest: Digest256([0; 32]),
        };
        let (file, ranges, _) = build_file(&binding, placeholder_sig.clone())?;
        if ranges == exclusions {
            emitted = Some(file);
            break;
        }
        exclusions = ranges;
    }
    let draft = emitted.ok_or_else(|| Error::Signing("carrier geometry did not converge".into()))?;

    // Pass 2: the content digest ignores excluded bytes, so the draft
    // file already hashes like the final one. Fill in digest + signature.
    let binding = HardBinding {
        exclusions: exclusions.clone(),
        expected_digest: compute_content_hash(&draft, &exclusions)?,
    };
    let (_, _, claim_bytes) = build_file(&binding, placeholder_sig)?;
    let signature = identity.sign(&claim_bytes);
    let (file, ranges, _) = build_file(&binding, signature)?;
    if ranges != exclusions {
        return Err(Error::Signing("carrier geometry shifted after signing".into()));
    }
    Ok(file)
}

/// Repeated sign-and-embed; each step's manifest references the prior as
/// an ingredient, producing a `steps`-deep edit history.
pub fn make_ingredient_chain(
    base: &ImageBytes,
    steps: usize,
    identity: &SigningIdentity,
    claim_generator: &str,
    start: DateTime<Utc>,
) -> Result<ImageBytes> {
    assert!(steps >= 1, "an ingredient chain needs at least one step");
    let mut image = base.clone();
    for step in 0..steps {
        let generator = format!("{claim_generator} step {}", step + 1);
        image = sign_and_embed(
            &image,
            identity,
            &[capture_actions_assertion()],
            &generator,
            start + ChronoDuration::minutes(step as i64),
        )?;
    }
    Ok(image)
}

#[cfg(test)]
mod tests;
