//! Gated publication of sealed bundles to local mirrors and HTTP gateways.
//!
//! Gateway wire format: the bundle directory as an uncompressed ustar
//! archive (regular files only, sorted by path, mode 0644, zero mtime and
//! ownership) is POSTed to the gateway base URL. The first line of the
//! response body is the content id. `GET <base>/<content_id>` returns the
//! same archive.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use ed25519_dalek::SigningKey;
use rand_core::OsRng;
use serde::{Deserialize, Serialize};

use crate::antispam::{self, Admission, AdmissionPolicy, AuthorIndex, Evidence};
use crate::bundle::{self, Bundle};
use crate::digest::{is_lower_hex64, Digest};
use crate::error::{Error, IoContext, Result};
use crate::figsafe::{self, SafetyProvider, Screener};
use crate::fsutil;
use crate::manifest::{check_rel_path, scan_tree, MANIFEST_FILE};
use crate::project::{Project, PublicationIds};
use crate::signing;
use crate::timefmt::{self, Timestamp};
use crate::translog::{self, LogEntry, LogState, TransparencyLog};

pub const ENV_PUSH_TARGETS: &str = "CLAWXIV_PUSH_TARGETS";
const HTTP_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_ARCHIVE: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatewayFlavor {
    SwarmLike,
    IpfsLike,
}

/// `mirror:<dir>`, `gateway:swarm:<url>` or `gateway:ipfs:<url>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PushTarget {
    LocalMirror(PathBuf),
    Gateway { url: String, flavor: GatewayFlavor },
}

impl fmt::Display for PushTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PushTarget::LocalMirror(p) => write!(f, "mirror:{}", p.display()),
            PushTarget::Gateway { url, flavor } => {
                let kind = match flavor {
                    GatewayFlavor::SwarmLike => "swarm",
                    GatewayFlavor::IpfsLike => "ipfs",
                };
                write!(f, "gateway:{kind}:{url}")
            }
        }
    }
}

impl FromStr for PushTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("mirror:") {
            if path.is_empty() {
                return Err(Error::invalid("push target", "mirror needs a directory"));
            }
            return Ok(PushTarget::LocalMirror(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("gateway:") {
            let (flavor, url) = match rest.split_once(':') {
                Some(("swarm", url)) => (GatewayFlavor::SwarmLike, url),
                Some(("ipfs", url)) => (GatewayFlavor::IpfsLike, url),
                _ => return Err(Error::invalid("push target", format!("`{s}`: expected gateway:swarm:<url> or gateway:ipfs:<url>"))),
            };
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(Error::invalid("push target", format!("`{url}` is not an http(s) URL")));
            }
            return Ok(PushTarget::Gateway {
                url: url.trim_end_matches('/').to_string(),
                flavor,
            });
        }
        Err(Error::invalid("push target", format!("`{s}`: expected mirror:<dir> or gateway:<flavor>:<url>")))
    }
}

pub fn parse_targets<S: AsRef<str>>(specs: &[S]) -> Result<Vec<PushTarget>> {
    specs.iter().map(|s| s.as_ref().parse()).collect()
}

/// Targets from `CLAWXIV_PUSH_TARGETS` (comma separated) when set,
/// otherwise from the project's `push_targets`.
pub fn configured_targets(project: &Project) -> Result<Vec<PushTarget>> {
    match std::env::var(ENV_PUSH_TARGETS) {
        Ok(v) if !v.trim().is_empty() => {
            let specs: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
            parse_targets(&specs)
        }
        _ => parse_targets(&project.metadata()?.push_targets),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PushReceipt {
    pub target: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(with = "timefmt::serde_secs")]
    pub pushed_at: Timestamp,
}

#[derive(Debug, Clone, Serialize)]
pub struct PushOutcome {
    pub bundle_root: Digest,
    pub admission: Admission,
    pub receipts: Vec<PushReceipt>,
    /// Index of the publication entry, absent when every target failed.
    pub log_index: Option<u64>,
    pub log_state: Option<LogState>,
}

impl PushOutcome {
    pub fn all_ok(&self) -> bool {
        self.receipts.iter().all(|r| r.ok)
    }
}

pub struct PushRequest<'a> {
    pub targets: &'a [PushTarget],
    pub evidence: &'a Evidence,
    pub author_index: &'a AuthorIndex,
    pub policy: &'a AdmissionPolicy,
    pub provider: &'a dyn SafetyProvider,
}

/// Where `endorse` and `pow` leave admission evidence for a bundle.
pub fn admission_dir(project: &Project, root: &Digest) -> PathBuf {
    project.out().join(antispam::ADMISSION_DIR).join(root.to_hex())
}

fn bundle_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files: Vec<(String, PathBuf)> = scan_tree(dir, &[])?
        .into_iter()
        .map(|e| {
            let p = dir.join(&e.path);
            (e.path, p)
        })
        .collect();
    files.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    Ok(files)
}

/// Deterministic ustar archive of every regular file under `dir`.
pub fn pack_tar(dir: &Path) -> Result<Vec<u8>> {
    let mut builder = tar::Builder::new(Vec::new());
    for (rel, path) in bundle_files(dir)? {
        let data = fs::read(&path).at(&path)?;
        let mut h = tar::Header::new_ustar();
        h.set_path(&rel)
            .map_err(|e| Error::invalid("archive path", format!("{rel}: {e}")))?;
        h.set_entry_type(tar::EntryType::Regular);
        h.set_size(data.len() as u64);
        h.set_mode(0o644);
        h.set_mtime(0);
        h.set_uid(0);
        h.set_gid(0);
        h.set_cksum();
        builder.append(&h, data.as_slice()).at(&path)?;
    }
    builder.into_inner().map_err(|e| Error::io("finishing archive", e))
}

/// Unpack an archive produced by [`pack_tar`] into a new directory.
pub fn unpack_tar(archive: &[u8], dest: &Path) -> Result<()> {
    let mut ar = tar::Archive::new(archive);
    fs::create_dir_all(dest).at(dest)?;
    let bad = |why: String| Error::parse("bundle archive", why);
    for entry in ar.entries().map_err(|e| bad(e.to_string()))? {
        let mut entry = entry.map_err(|e| bad(e.to_string()))?;
        if entry.header().entry_type() != tar::EntryType::Regular {
            return Err(bad("non-regular entry".into()));
        }
        let path = entry.path().map_err(|e| bad(e.to_string()))?.into_owned();
        let rel = path.to_str().ok_or_else(|| bad("non-UTF-8 path".into()))?.to_string();
        check_rel_path(&rel).map_err(|why| bad(format!("{rel}: {why}")))?;
        let out = dest.join(&rel);
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        let mut data = Vec::new();
        entry.read_to_end(&mut data).map_err(|e| bad(e.to_string()))?;
        fs::write(&out, data).at(&out)?;
    }
    Ok(())
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(HTTP_TIMEOUT))
        .build()
        .into()
}

fn gateway_upload(url: &str, archive: &[u8]) -> std::result::Result<String, String> {
    let mut resp = agent()
        .post(url)
        .header("Content-Type", "application/x-tar")
        .send(archive)
        .map_err(|e| e.to_string())?;
    let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
    match body.lines().next().map(str::trim) {
        Some(id) if !id.is_empty() => Ok(id.to_string()),
        _ => Err("gateway returned an empty content id".into()),
    }
}

fn mirror_copy(mirror: &Path, bundle_dir: &Path, root: &Digest, archive: &[u8]) -> std::result::Result<String, String> {
    fs::create_dir_all(mirror).map_err(|e| format!("{}: {e}", mirror.display()))?;
    let dest = mirror.join(root.to_hex());
    if dest.exists() {
        let existing = pack_tar(&dest).map_err(|e| e.to_string())?;
        return if existing == archive {
            Ok(root.to_hex())
        } else {
            Err(format!("{} exists with different content", dest.display()))
        };
    }
    let staging = fsutil::scratch_dir(mirror, ".incoming").map_err(|e| e.to_string())?;
    let copied = fsutil::copy_tree(bundle_dir, &staging).and_then(|_| fs::rename(&staging, &dest).at(&dest));
    if let Err(e) = copied {
        let _ = fs::remove_dir_all(&staging);
        return Err(e.to_string());
    }
    Ok(root.to_hex())
}

fn transmit(target: &PushTarget, bundle_dir: &Path, root: &Digest, archive: &[u8]) -> PushReceipt {
    let result = match target {
        PushTarget::LocalMirror(dir) => mirror_copy(dir, bundle_dir, root, archive),
        PushTarget::Gateway { url, .. } => gateway_upload(url, archive),
    };
    let (ok, content_id, error) = match result {
        Ok(id) => (true, Some(id), None),
        Err(e) => (false, None, Some(e)),
    };
    PushReceipt {
        target: target.to_string(),
        ok,
        content_id,
        error,
        pushed_at: timefmt::now(),
    }
}

/// Run every gate in order, stopping at the first failure. Nothing has been
/// transmitted when this returns an error.
fn check_gates(project: &Project, bundle_dir: &Path, req: &PushRequest<'_>) -> Result<(Bundle, Admission)> {
    let meta = project.metadata()?;
    if !meta.version_label.is_release() {
        return Err(Error::Gate(format!(
            "version gate: {} is a review candidate and is never pushed publicly",
            meta.version_label
        )));
    }
    let recheck = figsafe::recheck_all(&project.root, &Screener::new(req.provider, project.out()))?;
    if recheck.blocking {
        return Err(Error::SafetyRefusal(format!(
            "re-check blocked publication: {}",
            recheck.blocking_paths().join(", ")
        )));
    }
    let report = bundle::bundle_verify(bundle_dir, req.provider)?;
    if !report.safety_ok {
        return Err(Error::SafetyRefusal(format!(
            "bundle {} fails the safety re-check",
            report.bundle_root.as_deref().unwrap_or("?")
        )));
    }
    if !report.pass {
        let text: Vec<String> = report.problems.iter().map(|p| format!("{}: {}", p.path, p.issue)).collect();
        return Err(Error::Gate(format!("bundle verification failed: {}", text.join("; "))));
    }
    let bundle = Bundle::open(bundle_dir)?;
    let sm = signing::build_signing_manifest(&meta.authors, &bundle::current_attestations(&bundle)?)?;
    if !sm.complete {
        return Err(Error::Gate(format!("signature gate: unsigned authors: {}", sm.missing.join(", "))));
    }
    let admission = antispam::admissible(&bundle.bundle_root, req.evidence, req.author_index, req.policy);
    if let Admission::Inadmissible { reason } = &admission {
        return Err(Error::Gate(format!("admission gate: {reason}")));
    }
    Ok((bundle, admission))
}

/// Gate, transmit to every target, then record receipts, the publication
/// log entry, and identifiers.
pub fn bundle_push(project: &Project, bundle_dir: &Path, req: &PushRequest<'_>) -> Result<PushOutcome> {
    if req.targets.is_empty() {
        return Err(Error::invalid("push targets", "none configured"));
    }
    let _lock = project.lock()?;
    let (bundle, admission) = check_gates(project, bundle_dir, req)?;
    let root = bundle.bundle_root;
    let archive = pack_tar(bundle_dir)?;

    let receipts: Vec<PushReceipt> = std::thread::scope(|s| {
        let handles: Vec<_> = req
            .targets
            .iter()
            .map(|t| s.spawn(|| transmit(t, bundle_dir, &root, &archive)))
            .collect();
        handles
            .into_iter()
            .zip(req.targets)
            .map(|(h, t)| {
                h.join().unwrap_or_else(|_| PushReceipt {
                    target: t.to_string(),
                    ok: false,
                    content_id: None,
                    error: Some("transmission thread panicked".into()),
                    pushed_at: timefmt::now(),
                })
            })
            .collect()
    });

    for r in &receipts {
        let detail = match (&r.content_id, &r.error) {
            (Some(id), _) => format!("{root} {} ok {id}", r.target),
            (None, Some(e)) => format!("{root} {} failed {}", r.target, e.replace(['\t', '\n'], " ")),
            (None, None) => format!("{root} {} failed", r.target),
        };
        project.append_release_log("push", &detail)?;
    }

    let mut outcome = PushOutcome {
        bundle_root: root,
        admission,
        receipts,
        log_index: None,
        log_state: None,
    };
    if !outcome.receipts.iter().any(|r| r.ok) {
        return Ok(outcome);
    }

    let summary = serde_json::to_value(&outcome.receipts).map_err(|e| Error::Encoding(e.to_string()))?;
    let key = SigningKey::generate(&mut OsRng);
    let entry = LogEntry::publication(root, summary, &key)?;
    drop(key);
    let mut log = TransparencyLog::open(&translog::log_path(&project.out()))?;
    let state = log.append(&entry)?;
    outcome.log_index = Some(state.tree_size - 1);
    outcome.log_state = Some(state);

    let mut ids = PublicationIds {
        bundle_root: Some(root),
        ..Default::default()
    };
    for (t, r) in req.targets.iter().zip(&outcome.receipts) {
        let (PushTarget::Gateway { flavor, .. }, Some(id)) = (t, &r.content_id) else {
            continue;
        };
        match flavor {
            GatewayFlavor::SwarmLike if is_lower_hex64(id) => ids.swarm_hash = Some(id.clone()),
            GatewayFlavor::IpfsLike => ids.ipfs_cid = Some(id.clone()),
            _ => {}
        }
    }
    project.record_publication_ids(&ids, true)?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub target: String,
    pub archive: Vec<u8>,
}

enum Miss {
    Integrity(String),
    Transport(String),
}

fn resolve_mirror(dir: &Path, content_id: &str) -> std::result::Result<Option<Vec<u8>>, Miss> {
    let path = dir.join(content_id);
    if !path.join(MANIFEST_FILE).is_file() {
        return Ok(None);
    }
    let report = bundle::bundle_verify(&path, &figsafe::StubProvider).map_err(|e| Miss::Integrity(e.to_string()))?;
    if !(report.root_ok && report.hashes_ok && report.signatures != bundle::SignatureStatus::Invalid) {
        let text: Vec<String> = report.problems.iter().map(|p| format!("{}: {}", p.path, p.issue)).collect();
        return Err(Miss::Integrity(format!("integrity check failed: {}", text.join("; "))));
    }
    if report.bundle_root.as_deref() != Some(content_id) {
        return Err(Miss::Integrity(format!(
            "content id {content_id} does not match bundle root {}",
            report.bundle_root.as_deref().unwrap_or("?")
        )));
    }
    pack_tar(&path).map(Some).map_err(|e| Miss::Transport(e.to_string()))
}

fn resolve_gateway(url: &str, content_id: &str) -> std::result::Result<Option<Vec<u8>>, Miss> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(HTTP_TIMEOUT))
        .http_status_as_error(false)
        .build()
        .into();
    let mut resp = agent.get(&format!("{url}/{content_id}")).call()
        .map_err(|e| Miss::Transport(e.to_string()))?;
    match resp.status().as_u16() {
        404 => Ok(None),
        200..=299 => resp
            .body_mut()
            .with_config()
            .limit(MAX_ARCHIVE)
            .read_to_vec()
            .map(Some)
            .map_err(|e| Miss::Transport(e.to_string())),
        code => Err(Miss::Transport(format!("HTTP {code}"))),
    }
}

/// Fetch the archive for `content_id` from the first target that serves
/// it. Mirror copies are re-verified so the id is enforced on read.
pub fn resolve(content_id: &str, targets: &[PushTarget]) -> Result<Resolved> {
    if content_id.is_empty() || content_id.contains(['/', '\\']) || content_id.starts_with('.') {
        return Err(Error::invalid("content id", format!("`{content_id}` is not a content id")));
    }
    let mut tried = Vec::new();
    let mut failures = Vec::new();
    let mut integrity = Vec::new();
    for t in targets {
        tried.push(t.to_string());
        let got = match t {
            PushTarget::LocalMirror(dir) => resolve_mirror(dir, content_id),
            PushTarget::Gateway { url, .. } => resolve_gateway(url, content_id),
        };
        match got {
            Ok(Some(archive)) => {
                return Ok(Resolved {
                    target: t.to_string(),
                    archive,
                })
            }
            Ok(None) => {}
            Err(Miss::Integrity(e)) => integrity.push(format!("{t}: {e}")),
            Err(Miss::Transport(e)) => failures.push(format!("{t}: {e}")),
        }
    }
    if !integrity.is_empty() {
        integrity.extend(failures);
        Err(Error::invalid("integrity", integrity.join("; ")))
    } else if failures.is_empty() {
        Err(Error::NotFound(format!("{content_id} not found on: {}", tried.join(", "))))
    } else {
        Err(Error::Transmit(format!("{content_id} could not be resolved: {}", failures.join("; "))))
    }
}

/// Resolve and unpack into `dest`, which must not exist yet.
pub fn resolve_to(content_id: &str, targets: &[PushTarget], dest: &Path) -> Result<Resolved> {
    if dest.exists() {
        return Err(Error::invalid("destination", format!("{} already exists", dest.display())));
    }
    let r = resolve(content_id, targets)?;
    unpack_tar(&r.archive, dest)?;
    Ok(r)
}
