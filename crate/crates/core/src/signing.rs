//! Sidecar attestations with sign-and-discard keys.
//!
//! Each signing generates a fresh Ed25519 keypair, signs the 32 raw bytes of
//! the artifact's SHA-256 digest, emits the public key and signer identity
//! in a JSON sidecar, and drops the private key. Nothing secret is ever
//! written to disk. Human and AI signers use the same record; they differ
//! only in [`SignerKind`].

use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use ed25519_dalek::{Signature, Signer as _, SigningKey, Verifier as _, VerifyingKey};
use rand_core::{CryptoRngCore, OsRng};
use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use crate::canonical;
use crate::digest::Digest;
use crate::error::{Error, IoContext, Result};
use crate::manifest::AuthorKind;
use crate::project::{slugify, AuthorRef};
use crate::timefmt::{self, Timestamp};

pub const SIGNING_MANIFEST: &str = "signing-manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignerKind {
    Human,
    Ai,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignerIdentity {
    pub kind: SignerKind,
    pub display_name: String,
    pub model_name: String,
    pub provider: String,
    pub release: String,
}

impl SignerIdentity {
    pub fn human(display_name: impl Into<String>) -> Self {
        SignerIdentity {
            kind: SignerKind::Human,
            display_name: display_name.into(),
            model_name: String::new(),
            provider: String::new(),
            release: String::new(),
        }
    }

    pub fn ai(
        display_name: impl Into<String>,
        model_name: impl Into<String>,
        provider: impl Into<String>,
        release: impl Into<String>,
    ) -> Self {
        SignerIdentity {
            kind: SignerKind::Ai,
            display_name: display_name.into(),
            model_name: model_name.into(),
            provider: provider.into(),
            release: release.into(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.display_name.trim().is_empty() {
            return Err(Error::invalid("signer.display_name", "must not be empty"));
        }
        if self.kind == SignerKind::Ai
            && [&self.model_name, &self.provider, &self.release].iter().any(|s| s.trim().is_empty())
        {
            return Err(Error::invalid("signer", "AI signers need model_name, provider and release"));
        }
        Ok(())
    }

    pub fn slug(&self) -> String {
        slugify(&self.display_name)
    }

    /// Whether this signer stands for the given project author. People
    /// sign for organizational authors.
    pub fn represents(&self, author: &AuthorRef) -> bool {
        let kind_ok = match author.kind {
            AuthorKind::Ai => self.kind == SignerKind::Ai,
            AuthorKind::Human | AuthorKind::Organizational => self.kind == SignerKind::Human,
        };
        kind_ok && self.display_name == author.name
    }
}

/// Secondary context about where a signature was produced. Recorded only;
/// verification ignores it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CustodyEvidence {
    pub machine_id: Option<String>,
    pub container_id: Option<String>,
    pub hardware_uuid: Option<String>,
}

impl CustodyEvidence {
    /// Best-effort probe of the local host.
    pub fn collect() -> Self {
        let read = |p: &str| {
            fs::read_to_string(p)
                .ok()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
        };
        let container_id = if Path::new("/.dockerenv").exists() || Path::new("/run/.containerenv").exists() {
            std::env::var("HOSTNAME").ok().filter(|s| !s.is_empty())
        } else {
            None
        };
        CustodyEvidence {
            machine_id: read("/etc/machine-id"),
            container_id,
            hardware_uuid: read("/sys/class/dmi/id/product_uuid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarAttestation {
    pub signer: SignerIdentity,
    pub artifact_sha256: Digest,
    /// Base64 of the 32-byte Ed25519 public key.
    pub public_key: String,
    /// Base64 of the 64-byte signature over the raw digest bytes.
    pub signature: String,
    #[serde(with = "timefmt::serde_secs")]
    pub created_at: Timestamp,
    pub custody: CustodyEvidence,
}

impl SidecarAttestation {
    pub fn file_name(&self) -> String {
        format!("{}-{}.json", self.artifact_sha256.prefix8(), self.signer.slug())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        canonical::to_canonical_bytes(self)
    }

    /// Parse a stored attestation. Only the canonical encoding is accepted.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let att: Self = serde_json::from_slice(bytes).map_err(|e| Error::parse("attestation", e.to_string()))?;
        if att.to_bytes()? != bytes {
            return Err(Error::parse("attestation", "not in canonical encoding"));
        }
        Ok(att)
    }

    pub fn write_to(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).at(dir)?;
        let p = dir.join(self.file_name());
        fs::write(&p, self.to_bytes()?).at(&p)?;
        Ok(p)
    }

    /// Check the signature against the recorded digest alone.
    pub fn check_signature(&self) -> Result<(), Rejection> {
        let key = decode_public_key(&self.public_key).map_err(Rejection::Malformed)?;
        let sig = decode_signature(&self.signature).map_err(Rejection::Malformed)?;
        key.verify(self.artifact_sha256.as_bytes(), &sig)
            .map_err(|_| Rejection::SignatureInvalid)
    }
}

pub fn decode_public_key(b64: &str) -> std::result::Result<VerifyingKey, String> {
    let bytes = B64.decode(b64).map_err(|e| format!("public key: {e}"))?;
    let arr: [u8; 32] = bytes
        .try_into()
        .map_err(|_| "public key: expected 32 bytes".to_string())?;
    VerifyingKey::from_bytes(&arr).map_err(|e| format!("public key: {e}"))
}

pub fn decode_signature(b64: &str) -> std::result::Result<Signature, String> {
    let bytes = B64.decode(b64).map_err(|e| format!("signature: {e}"))?;
    let arr: [u8; 64] = bytes
        .try_into()
        .map_err(|_| "signature: expected 64 bytes".to_string())?;
    Ok(Signature::from_bytes(&arr))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum Rejection {
    Malformed(String),
    DigestMismatch,
    SignatureInvalid,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::Malformed(d) => write!(f, "malformed attestation: {d}"),
            Rejection::DigestMismatch => f.write_str("artifact digest mismatch"),
            Rejection::SignatureInvalid => f.write_str("signature invalid"),
        }
    }
}

pub fn sign_artifact(artifact: &[u8], signer: &SignerIdentity, custody: CustodyEvidence) -> Result<SidecarAttestation> {
    sign_digest_with(&mut OsRng, Digest::of(artifact), signer, custody)
}

/// Sign an already computed digest with a fresh key drawn from `rng`.
pub fn sign_digest_with<R: CryptoRngCore + ?Sized>(
    rng: &mut R,
    digest: Digest,
    signer: &SignerIdentity,
    custody: CustodyEvidence,
) -> Result<SidecarAttestation> {
    signer.check()?;
    let mut seed = [0u8; 32];
    rng.try_fill_bytes(&mut seed).map_err(|e| Error::Randomness(e.to_string()))?;
    let key = SigningKey::from_bytes(&seed);
    seed.zeroize();
    let signature = key.sign(digest.as_bytes());
    let public = key.verifying_key();
    // SigningKey zeroizes itself on drop.
    drop(key);
    Ok(SidecarAttestation {
        signer: signer.clone(),
        artifact_sha256: digest,
        public_key: B64.encode(public.as_bytes()),
        signature: B64.encode(signature.to_bytes()),
        created_at: timefmt::now(),
        custody,
    })
}

pub fn verify_attestation(artifact: &[u8], att: &SidecarAttestation) -> Result<(), Rejection> {
    verify_attestation_digest(&Digest::of(artifact), att)
}

pub fn verify_attestation_digest(digest: &Digest, att: &SidecarAttestation) -> Result<(), Rejection> {
    if att.artifact_sha256 != *digest {
        return Err(Rejection::DigestMismatch);
    }
    att.check_signature()
}

/// Parse and verify raw attestation bytes. Never panics on bad input.
pub fn verify_attestation_bytes(artifact: &[u8], bytes: &[u8]) -> Result<(), Rejection> {
    let att = SidecarAttestation::from_bytes(bytes).map_err(|e| Rejection::Malformed(e.to_string()))?;
    verify_attestation(artifact, &att)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigningManifest {
    pub artifact_sha256: Option<Digest>,
    pub attestations: Vec<SidecarAttestation>,
    pub required: Vec<String>,
    pub present: Vec<String>,
    pub missing: Vec<String>,
    pub complete: bool,
}

/// Aggregate attestations over one digest and record which project authors
/// have signed. Complete means at least one attestation and no author
/// missing.
pub fn build_signing_manifest(authors: &[AuthorRef], attestations: &[SidecarAttestation]) -> Result<SigningManifest> {
    let digest = attestations.first().map(|a| a.artifact_sha256);
    for a in attestations {
        if Some(a.artifact_sha256) != digest {
            return Err(Error::invalid("attestations", "attestations cover different digests"));
        }
        a.check_signature()
            .map_err(|r| Error::invalid("attestations", format!("{}: {r}", a.signer.display_name)))?;
    }
    let mut sorted = attestations.to_vec();
    sorted.sort_by(|a, b| {
        (a.signer.kind, &a.signer.display_name, &a.public_key).cmp(&(b.signer.kind, &b.signer.display_name, &b.public_key))
    });
    let mut present = Vec::new();
    let mut missing = Vec::new();
    for author in authors {
        if sorted.iter().any(|a| a.signer.represents(author)) {
            present.push(author.to_string());
        } else {
            missing.push(author.to_string());
        }
    }
    Ok(SigningManifest {
        artifact_sha256: digest,
        complete: !sorted.is_empty() && missing.is_empty(),
        attestations: sorted,
        required: authors.iter().map(|a| a.to_string()).collect(),
        present,
        missing,
    })
}

pub fn write_signing_manifest(dir: &Path, m: &SigningManifest) -> Result<PathBuf> {
    fs::create_dir_all(dir).at(dir)?;
    let p = dir.join(SIGNING_MANIFEST);
    fs::write(&p, canonical::to_canonical_bytes(m)?).at(&p)?;
    Ok(p)
}

/// Load every attestation sidecar in `dir`, skipping the signing manifest.
/// Unparseable files are returned as errors next to their path.
pub fn load_attestations(dir: &Path) -> Result<Vec<(PathBuf, std::result::Result<SidecarAttestation, String>)>> {
    let mut out = Vec::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .at(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| p.file_name().is_some_and(|n| n != SIGNING_MANIFEST))
        .collect();
    paths.sort();
    for p in paths {
        let parsed = fs::read(&p)
            .map_err(|e| e.to_string())
            .and_then(|b| SidecarAttestation::from_bytes(&b).map_err(|e| e.to_string()));
        out.push((p, parsed));
    }
    Ok(out)
}
