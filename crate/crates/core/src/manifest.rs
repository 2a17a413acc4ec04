//! Bundle manifest data model, deterministic encoding, and the Merkle-root
//! bundle identifier.
//!
//! The bundle root is a binary Merkle tree over one leaf per file entry
//! (in manifest order) followed by one final leaf for the manifest
//! metadata, i.e. every field except `files` and `bundle_root`. Leaves are
//! `SHA-256(0x00 ‖ canonical bytes)`, interior nodes `SHA-256(0x01 ‖ L ‖ R)`,
//! and an unpaired node at the end of a level is carried up unchanged.

use std::fs;
use std::io::Read;
use std::path::{Component, Path};

use ed25519_dalek::pkcs8::DecodePublicKey;
use ed25519_dalek::VerifyingKey;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::canonical;
use crate::digest::{is_lower_hex64, Digest};
use crate::error::{Error, IoContext, Result};
use crate::timefmt::{self, Timestamp};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: Digest,
    pub size: u64,
    pub mime: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorKind {
    Human,
    Ai,
    Organizational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Responsibility {
    Corresponding,
    Contributor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Role {
    pub kind: AuthorKind,
    pub responsibility: Responsibility,
}

impl AuthorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AuthorKind::Human => "human",
            AuthorKind::Ai => "ai",
            AuthorKind::Organizational => "organizational",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(AuthorKind::Human),
            "ai" => Ok(AuthorKind::Ai),
            "organizational" => Ok(AuthorKind::Organizational),
            other => Err(Error::parse("author kind", format!("unknown kind {other:?}"))),
        }
    }
}

impl Responsibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Responsibility::Corresponding => "corresponding",
            Responsibility::Contributor => "contributor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "corresponding" => Ok(Responsibility::Corresponding),
            "contributor" => Ok(Responsibility::Contributor),
            other => Err(Error::parse("author responsibility", format!("unknown value {other:?}"))),
        }
    }
}

/// An author as recorded in a manifest. `pubkey_pem` is empty for authors
/// who only sign with per-artifact ephemeral keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub pubkey_pem: String,
    pub claims: Vec<String>,
    pub verified_credentials: Vec<String>,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    #[serde(rename = "type")]
    pub kind: String,
    pub hash: String,
    /// Base64 detached signature, if any.
    pub signature: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildPin {
    pub engine: String,
    pub container_digest: String,
    pub cmd: String,
}

/// Everything in a manifest except `files` and `bundle_root`; this is the
/// content of the metadata leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub manifest_version: u32,
    #[serde(with = "timefmt::serde_secs")]
    pub created_at: Timestamp,
    pub build: BuildPin,
    pub authors: Vec<AuthorRecord>,
    pub provenance: Vec<ProvenanceRecord>,
    pub licenses: Vec<String>,
    pub tags_self: Vec<String>,
    pub tags_official_ref: Vec<String>,
}

impl Metadata {
    pub fn new(created_at: Timestamp) -> Self {
        Metadata {
            manifest_version: MANIFEST_VERSION,
            created_at,
            build: BuildPin::default(),
            authors: Vec::new(),
            provenance: Vec::new(),
            licenses: Vec::new(),
            tags_self: Vec::new(),
            tags_official_ref: Vec::new(),
        }
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        canonical::to_canonical_bytes(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Lowercase hex root, or empty before sealing.
    pub bundle_root: String,
    pub files: Vec<FileEntry>,
    #[serde(flatten)]
    pub metadata: Metadata,
}

impl Manifest {
    pub fn new(files: Vec<FileEntry>, metadata: Metadata) -> Self {
        Manifest {
            bundle_root: String::new(),
            files,
            metadata,
        }
    }

    /// Compute the bundle root and store it. Sealing an already sealed,
    /// unmodified manifest yields the same root.
    pub fn seal(&mut self) -> Result<Digest> {
        let root = compute_bundle_root(&self.files, &self.metadata)?;
        self.bundle_root = root.to_hex();
        Ok(root)
    }

    pub fn is_sealed(&self) -> bool {
        !self.bundle_root.is_empty()
    }

    pub fn root(&self) -> Result<Digest> {
        Digest::from_hex(&self.bundle_root)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::parse(MANIFEST_FILE, e.to_string()))
    }
}

/// Deterministic byte encoding of a manifest.
pub fn canonical_encode(manifest: &Manifest) -> Result<Vec<u8>> {
    canonical::to_canonical_bytes(manifest)
}

pub fn leaf_hash(content: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([0x00]);
    h.update(content);
    Digest(h.finalize().into())
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([0x01]);
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

/// Fold a non-empty level of hashes up to a single root, pairing left to
/// right and carrying an odd trailing node up unchanged.
pub fn merkle_root(leaves: &[Digest]) -> Option<Digest> {
    let mut level = leaves.to_vec();
    if level.is_empty() {
        return None;
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => node_hash(l, r),
                [odd] => *odd,
                _ => unreachable!(),
            })
            .collect();
    }
    Some(level[0])
}

pub fn file_leaf(entry: &FileEntry) -> Result<Digest> {
    Ok(leaf_hash(&canonical::to_canonical_bytes(entry)?))
}

pub fn compute_bundle_root(files: &[FileEntry], metadata: &Metadata) -> Result<Digest> {
    check_order(files)?;
    let mut leaves = files.iter().map(file_leaf).collect::<Result<Vec<_>>>()?;
    leaves.push(leaf_hash(&metadata.canonical_bytes()?));
    Ok(merkle_root(&leaves).expect("metadata leaf is always present"))
}

fn check_order(files: &[FileEntry]) -> Result<()> {
    for pair in files.windows(2) {
        match pair[0].path.as_bytes().cmp(pair[1].path.as_bytes()) {
            std::cmp::Ordering::Less => {}
            std::cmp::Ordering::Equal => {
                return Err(Error::invalid("files", format!("duplicate path {}", pair[0].path)))
            }
            std::cmp::Ordering::Greater => {
                return Err(Error::invalid(
                    "files",
                    format!("{} sorts after {}", pair[0].path, pair[1].path),
                ))
            }
        }
    }
    Ok(())
}

/// Check that a manifest path is relative, `/`-separated, and free of `.`
/// and `..` segments.
pub fn check_rel_path(path: &str) -> std::result::Result<(), String> {
    if path.is_empty() {
        return Err("empty path".into());
    }
    if path.starts_with('/') {
        return Err("leading '/'".into());
    }
    if path.contains('\\') {
        return Err("backslash separator".into());
    }
    for seg in path.split('/') {
        match seg {
            "" => return Err("empty segment".into()),
            "." | ".." => return Err(format!("'{seg}' segment")),
            _ => {}
        }
    }
    Ok(())
}

pub fn guess_mime(path: &str) -> &'static str {
    let ext = path
        .rsplit_once('.')
        .map(|(_, e)| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "tex" | "sty" | "cls" | "ltx" => "text/x-tex",
        "bib" | "bst" => "text/x-bibtex",
        "txt" | "log" | "md" | "bbl" => "text/plain",
        "json" => "application/json",
        "yaml" | "yml" => "application/yaml",
        "py" => "text/x-python",
        "sh" => "application/x-sh",
        "csv" => "text/csv",
        "pdf" => "application/pdf",
        "eps" | "ps" => "application/postscript",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        "tif" | "tiff" => "image/tiff",
        "bmp" => "image/bmp",
        "emf" => "image/emf",
        "wmf" => "image/wmf",
        _ => "application/octet-stream",
    }
}

/// Exclusion rule for [`scan_tree`]: matches the path itself or anything
/// beneath it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion(pub String);

impl Exclusion {
    pub fn new(prefix: impl Into<String>) -> Self {
        Exclusion(prefix.into().trim_end_matches('/').to_string())
    }

    pub fn matches(&self, path: &str) -> bool {
        path == self.0
            || (path.len() > self.0.len() && path.starts_with(&self.0) && path.as_bytes()[self.0.len()] == b'/')
    }
}

/// List every regular file under `root` as a [`FileEntry`], sorted
/// byte-wise by path. Symlinks are refused.
pub fn scan_tree(root: &Path, exclusions: &[Exclusion]) -> Result<Vec<FileEntry>> {
    let meta = fs::symlink_metadata(root).at(root)?;
    if !meta.is_dir() {
        return Err(Error::invalid("scan root", format!("{} is not a directory", root.display())));
    }
    let mut out = Vec::new();
    walk(root, "", exclusions, &mut out)?;
    out.sort_by(|a, b| a.path.as_bytes().cmp(b.path.as_bytes()));
    Ok(out)
}

fn walk(dir: &Path, prefix: &str, exclusions: &[Exclusion], out: &mut Vec<FileEntry>) -> Result<()> {
    for dent in fs::read_dir(dir).at(dir)? {
        let dent = dent.at(dir)?;
        let full = dent.path();
        let name = dent
            .file_name()
            .into_string()
            .map_err(|_| Error::NonUtf8Path(full.clone()))?;
        let rel = if prefix.is_empty() {
            name
        } else {
            format!("{prefix}/{name}")
        };
        if exclusions.iter().any(|x| x.matches(&rel)) {
            continue;
        }
        let ft = fs::symlink_metadata(&full).at(&full)?.file_type();
        if ft.is_symlink() {
            return Err(Error::Symlink(full));
        } else if ft.is_dir() {
            walk(&full, &rel, exclusions, out)?;
        } else if ft.is_file() {
            out.push(hash_file(&full, rel)?);
        } else {
            return Err(Error::invalid("file type", format!("{} is not a regular file", full.display())));
        }
    }
    Ok(())
}

fn hash_file(full: &Path, rel: String) -> Result<FileEntry> {
    let mut f = fs::File::open(full).at(full)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    let mut size = 0u64;
    loop {
        let n = f.read(&mut buf).at(full)?;
        if n == 0 {
            break;
        }
        size += n as u64;
        h.update(&buf[..n]);
    }
    let mime = guess_mime(&rel).to_string();
    Ok(FileEntry {
        path: rel,
        sha256: Digest(h.finalize().into()),
        size,
        mime,
    })
}

/// Convert a relative filesystem path to a manifest path.
pub fn to_manifest_path(rel: &Path) -> Result<String> {
    let mut parts = Vec::new();
    for c in rel.components() {
        match c {
            Component::Normal(s) => parts.push(s.to_str().ok_or_else(|| Error::NonUtf8Path(rel.to_path_buf()))?),
            _ => return Err(Error::invalid("path", format!("{} is not a plain relative path", rel.display()))),
        }
    }
    Ok(parts.join("/"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

/// Every rule the manifest breaks. Empty means valid.
pub fn validate_manifest(m: &Manifest) -> Vec<Violation> {
    let mut v = Vec::new();
    if m.metadata.manifest_version < 1 {
        v.push(Violation::new("manifest_version", "must be >= 1"));
    }
    let mut order_ok = true;
    for pair in m.files.windows(2) {
        match pair[0].path.as_bytes().cmp(pair[1].path.as_bytes()) {
            std::cmp::Ordering::Less => {}
            std::cmp::Ordering::Equal => {
                order_ok = false;
                v.push(Violation::new("files", format!("duplicate path {}", pair[0].path)));
            }
            std::cmp::Ordering::Greater => {
                order_ok = false;
                v.push(Violation::new(
                    "files ordering",
                    format!("{} must sort before {}", pair[1].path, pair[0].path),
                ));
            }
        }
    }
    for f in &m.files {
        if let Err(why) = check_rel_path(&f.path) {
            v.push(Violation::new(format!("files[{}].path", f.path), why));
        }
        if f.mime.is_empty() {
            v.push(Violation::new(format!("files[{}].mime", f.path), "must not be empty"));
        }
    }
    for (i, a) in m.metadata.authors.iter().enumerate() {
        if !a.pubkey_pem.is_empty() && VerifyingKey::from_public_key_pem(&a.pubkey_pem).is_err() {
            v.push(Violation::new(format!("authors[{i}].pubkey_pem"), "not a valid Ed25519 public key"));
        }
    }
    for (i, p) in m.metadata.provenance.iter().enumerate() {
        if !is_lower_hex64(&p.hash) {
            v.push(Violation::new(format!("provenance[{i}].hash"), "must be 64 lowercase hex characters"));
        }
        if p.kind.is_empty() {
            v.push(Violation::new(format!("provenance[{i}].type"), "must not be empty"));
        }
    }
    for (i, l) in m.metadata.licenses.iter().enumerate() {
        if l.trim().is_empty() {
            v.push(Violation::new(format!("licenses[{i}]"), "must not be empty"));
        }
    }
    if m.is_sealed() {
        if !is_lower_hex64(&m.bundle_root) {
            v.push(Violation::new("bundle_root", "must be 64 lowercase hex characters or empty"));
        } else if order_ok {
            match compute_bundle_root(&m.files, &m.metadata) {
                Ok(root) if root.to_hex() == m.bundle_root => {}
                Ok(_) => v.push(Violation::new("bundle_root", "does not match recomputed root")),
                Err(e) => v.push(Violation::new("bundle_root", e.to_string())),
            }
        }
    }
    v
}
