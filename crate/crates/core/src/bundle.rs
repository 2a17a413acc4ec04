//! Bundle assembly, sealing, signing, and end-to-end verification.
//!
//! A bundle lives at `out/bundles/<bundle_root>/`:
//!
//! ```text
//! manifest.json        canonical manifest (not covered by the root)
//! src/...              copy of the project sources
//! paper.pdf            optional build output
//! release.log          creation record for this bundle
//! attestations/*.json  sidecar attestations over manifest.json (not covered)
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::Serialize;

use crate::digest::Digest;
use crate::error::{Error, IoContext, Result};
use crate::figsafe::{self, SafetyProvider, Screener};
use crate::fsutil;
use crate::manifest::{
    self, scan_tree, AuthorRecord, BuildPin, Exclusion, Manifest, Metadata, ProvenanceRecord, Role, MANIFEST_FILE,
};
use crate::project::{self, AuthorRef, Project, IMPORT_LOG, RELEASE_LOG};
use crate::signing::{
    self, build_signing_manifest, CustodyEvidence, SidecarAttestation, SignerIdentity, SigningManifest,
    SIGNING_MANIFEST,
};
use crate::timefmt::{self, Timestamp};

pub const ATTESTATIONS_DIR: &str = "attestations";
pub const PDF_NAME: &str = "paper.pdf";

/// Paths inside a bundle that the bundle root does not cover.
pub fn root_exclusions() -> Vec<Exclusion> {
    vec![Exclusion::new(MANIFEST_FILE), Exclusion::new(ATTESTATIONS_DIR)]
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub root_dir: PathBuf,
    pub manifest: Manifest,
    pub manifest_bytes: Vec<u8>,
    pub attestations: Vec<SidecarAttestation>,
    pub bundle_root: Digest,
}

impl Bundle {
    pub fn open(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        if !mpath.is_file() {
            return Err(Error::NotFound(format!("{} has no {MANIFEST_FILE}", dir.display())));
        }
        let manifest_bytes = fs::read(&mpath).at(&mpath)?;
        let manifest = Manifest::from_bytes(&manifest_bytes)?;
        let bundle_root = manifest.root()?;
        let attestations = signing::load_attestations(&dir.join(ATTESTATIONS_DIR))?
            .into_iter()
            .filter_map(|(_, a)| a.ok())
            .collect();
        Ok(Bundle {
            root_dir: dir.to_path_buf(),
            manifest,
            manifest_bytes,
            attestations,
            bundle_root,
        })
    }

    /// Digest every attestation signs.
    pub fn manifest_digest(&self) -> Digest {
        Digest::of(&self.manifest_bytes)
    }
}

#[derive(Default)]
pub struct CreateOptions {
    pub include_pdf: bool,
    /// Shell command run in a scratch copy of `src/`.
    pub build_cmd: Option<String>,
    /// PDF produced by the build, relative to the build directory.
    pub pdf_output: Option<String>,
    /// Pinned creation time, for reproducibility checks.
    pub created_at: Option<Timestamp>,
}

fn author_record(project: &Project, a: &AuthorRef) -> Result<AuthorRecord> {
    let pem = project.keys_dir().join(format!("{}.pem", a.slug()));
    let pubkey_pem = if pem.is_file() {
        fs::read_to_string(&pem).at(&pem)?
    } else {
        String::new()
    };
    Ok(AuthorRecord {
        pubkey_pem,
        claims: vec![format!("name:{}", a.name)],
        verified_credentials: Vec::new(),
        role: Role {
            kind: a.kind,
            responsibility: a.responsibility,
        },
    })
}

fn run_build(project: &Project, cmd: &str, opts: &CreateOptions, staging: &Path) -> Result<()> {
    let build_dir = fsutil::scratch_dir(&project.out().join("build"), "run")?;
    let result = (|| {
        fsutil::copy_tree(&project.src(), &build_dir)?;
        let before: BTreeSet<String> = top_level_pdfs(&build_dir)?;
        let status = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .current_dir(&build_dir)
            .status()
            .map_err(|e| Error::Build(format!("{cmd}: {e}")))?;
        if !status.success() {
            return Err(Error::Build(format!("{cmd}: exited with {status}")));
        }
        if opts.include_pdf {
            let pdf = match &opts.pdf_output {
                Some(name) => name.clone(),
                None => {
                    let fresh: Vec<String> = top_level_pdfs(&build_dir)?.difference(&before).cloned().collect();
                    match fresh.as_slice() {
                        [one] => one.clone(),
                        _ => return Err(Error::Build(format!("expected one new PDF, found {fresh:?}"))),
                    }
                }
            };
            let from = build_dir.join(&pdf);
            fs::copy(&from, staging.join(PDF_NAME)).at(&from)?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&build_dir);
    result
}

fn top_level_pdfs(dir: &Path) -> Result<BTreeSet<String>> {
    Ok(fs::read_dir(dir)
        .at(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.to_ascii_lowercase().ends_with(".pdf"))
        .collect())
}

/// Assemble and seal a bundle from the project. Creating twice from an
/// unchanged project with the same pinned `created_at` yields the same
/// directory and byte-identical `manifest.json`.
pub fn bundle_create(project: &Project, opts: &CreateOptions, provider: &dyn SafetyProvider) -> Result<Bundle> {
    let _lock = project.lock()?;
    let violations = project::validate_project(&project.root);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(|v| format!("{}: {}", v.field, v.rule)).collect();
        return Err(Error::Gate(format!("project invalid: {}", text.join("; "))));
    }
    let recheck = figsafe::recheck_all(&project.root, &Screener::new(provider, project.out()))?;
    if recheck.blocking {
        return Err(Error::SafetyRefusal(format!(
            "blocking figures: {}",
            recheck.blocking_paths().join(", ")
        )));
    }
    let meta = project.metadata()?;
    let created_at = opts.created_at.unwrap_or_else(timefmt::now);

    let bundles = project.bundles_dir();
    let staging = fsutil::scratch_dir(&bundles, ".staging")?;
    let sealed = (|| {
        fsutil::copy_tree(&project.src(), &staging.join("src"))?;
        let mut build = BuildPin {
            engine: meta.build_engine.clone(),
            container_digest: meta.container_digest.clone(),
            cmd: meta.build_cmd.clone(),
        };
        if let Some(cmd) = &opts.build_cmd {
            run_build(project, cmd, opts, &staging)?;
            build.cmd = cmd.clone();
            if build.engine.is_empty() {
                build.engine = cmd.split_whitespace().next().unwrap_or_default().to_string();
            }
        }
        let release_line = format!(
            "{}\tbundle-create\t{}\t{}\n",
            timefmt::render(&created_at),
            meta.version_label,
            meta.title.replace(['\t', '\n'], " ")
        );
        fs::write(staging.join(RELEASE_LOG), &release_line).at(&staging)?;

        let files = scan_tree(&staging, &root_exclusions())?;
        let mut metadata = Metadata::new(created_at);
        metadata.build = build;
        metadata.authors = meta.authors.iter().map(|a| author_record(project, a)).collect::<Result<_>>()?;
        let import_log = project.root.join(IMPORT_LOG);
        if import_log.is_file() {
            metadata.provenance.push(ProvenanceRecord {
                kind: "import_log".into(),
                hash: Digest::of(&fs::read(&import_log).at(&import_log)?).to_hex(),
                signature: None,
            });
        }
        metadata.provenance.push(ProvenanceRecord {
            kind: "release_log".into(),
            hash: Digest::of(release_line.as_bytes()).to_hex(),
            signature: None,
        });
        metadata.licenses = meta.licenses.clone();
        metadata.tags_self = meta.tags.clone();
        let mut m = Manifest::new(files, metadata);
        let root = m.seal()?;
        let bytes = manifest::canonical_encode(&m)?;
        fs::write(staging.join(MANIFEST_FILE), &bytes).at(&staging)?;
        Ok((root, bytes))
    })();
    let (root, bytes) = match sealed {
        Ok(v) => v,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };

    let final_dir = bundles.join(root.to_hex());
    if final_dir.exists() {
        let existing = fs::read(final_dir.join(MANIFEST_FILE)).unwrap_or_default();
        let _ = fs::remove_dir_all(&staging);
        if existing != bytes {
            return Err(Error::invalid("bundle", format!("{} exists with a different manifest", final_dir.display())));
        }
    } else {
        fs::rename(&staging, &final_dir).at(&final_dir)?;
    }
    project.append_release_log("bundle-create", &root.to_hex())?;
    Bundle::open(&final_dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct SignOutcome {
    pub attestation: SidecarAttestation,
    pub bundle_copy: PathBuf,
    pub project_copy: PathBuf,
    pub signing_manifest: SigningManifest,
}

/// Attest a bundle's `manifest.json` with a fresh key and refresh the
/// bundle's signing manifest.
pub fn bundle_sign(
    project: &Project,
    bundle_dir: &Path,
    signer: &SignerIdentity,
    custody: CustodyEvidence,
) -> Result<SignOutcome> {
    let _lock = project.lock()?;
    let bundle = Bundle::open(bundle_dir)?;
    let att = signing::sign_artifact(&bundle.manifest_bytes, signer, custody)?;
    let att_dir = bundle_dir.join(ATTESTATIONS_DIR);
    let bundle_copy = att.write_to(&att_dir)?;
    let project_copy = att.write_to(&project.out().join(ATTESTATIONS_DIR))?;
    let signing_manifest = refresh_signing_manifest(project, &bundle)?;
    project.append_release_log(
        "bundle-sign",
        &format!("{} {}", bundle.bundle_root, att.signer.display_name),
    )?;
    Ok(SignOutcome {
        attestation: att,
        bundle_copy,
        project_copy,
        signing_manifest,
    })
}

pub(crate) fn current_attestations(bundle: &Bundle) -> Result<Vec<SidecarAttestation>> {
    let digest = bundle.manifest_digest();
    Ok(signing::load_attestations(&bundle.root_dir.join(ATTESTATIONS_DIR))?
        .into_iter()
        .filter_map(|(_, a)| a.ok())
        .filter(|a| signing::verify_attestation_digest(&digest, a).is_ok())
        .collect())
}

pub fn refresh_signing_manifest(project: &Project, bundle: &Bundle) -> Result<SigningManifest> {
    let authors = project.metadata()?.authors;
    let sm = build_signing_manifest(&authors, &current_attestations(bundle)?)?;
    signing::write_signing_manifest(&bundle.root_dir.join(ATTESTATIONS_DIR), &sm)?;
    Ok(sm)
}

/// Drop the rc component of the project's version once every project
/// author has attested the bundle.
pub fn promote(project: &Project, bundle_dir: &Path) -> Result<project::VersionLabel> {
    let _lock = project.lock()?;
    let bundle = Bundle::open(bundle_dir)?;
    let mut meta = project.metadata()?;
    let sm = build_signing_manifest(&meta.authors, &current_attestations(&bundle)?)?;
    if !sm.complete {
        return Err(Error::Gate(format!(
            "cannot promote {}: unsigned authors: {}",
            meta.version_label,
            sm.missing.join(", ")
        )));
    }
    let before = meta.version_label;
    meta.version_label = before.promoted();
    project.save_metadata(&meta)?;
    if before != meta.version_label {
        project.append_release_log("promote", &format!("{before} -> {} {}", meta.version_label, bundle.bundle_root))?;
    }
    Ok(meta.version_label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureStatus {
    Ok,
    Missing,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Problem {
    pub path: String,
    pub issue: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub bundle_dir: PathBuf,
    pub bundle_root: Option<String>,
    pub manifest_ok: bool,
    pub hashes_ok: bool,
    pub root_ok: bool,
    pub signatures: SignatureStatus,
    pub signers: Vec<String>,
    pub safety_ok: bool,
    pub problems: Vec<Problem>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn names(&self, path: &str) -> bool {
        self.problems.iter().any(|p| p.path == path)
    }
}

fn note(problems: &mut Vec<Problem>, path: &str, issue: String) {
    problems.push(Problem {
        path: path.to_string(),
        issue,
    });
}

/// Recheck everything a bundle claims: file hashes, the root, every
/// attestation, the signing manifest, and figure safety.
pub fn bundle_verify(bundle_dir: &Path, provider: &dyn SafetyProvider) -> Result<VerifyReport> {
    let mpath = bundle_dir.join(MANIFEST_FILE);
    if !mpath.is_file() {
        return Err(Error::NotFound(format!("{} has no {MANIFEST_FILE}", bundle_dir.display())));
    }
    let mut problems = Vec::new();
    let bytes = fs::read(&mpath).at(&mpath)?;
    let manifest = match Manifest::from_bytes(&bytes) {
        Ok(m) => match manifest::canonical_encode(&m) {
            Ok(enc) if enc == bytes => Some(m),
            Ok(_) => {
                note(&mut problems, MANIFEST_FILE, "not in canonical encoding".into());
                None
            }
            Err(e) => {
                note(&mut problems, MANIFEST_FILE, e.to_string());
                None
            }
        },
        Err(e) => {
            note(&mut problems, MANIFEST_FILE, e.to_string());
            None
        }
    };
    let manifest_ok = manifest.is_some();
    if let Some(m) = &manifest {
        for v in manifest::validate_manifest(m) {
            note(&mut problems, MANIFEST_FILE, format!("{}: {}", v.field, v.rule));
        }
    }

    let mut hashes_ok = manifest_ok;
    let mut root_ok = false;
    match scan_tree(bundle_dir, &root_exclusions()) {
        Ok(actual) => {
            if let Some(m) = &manifest {
                let mut i = 0;
                let mut j = 0;
                while i < m.files.len() || j < actual.len() {
                    let listed = m.files.get(i);
                    let found = actual.get(j);
                    match (listed, found) {
                        (Some(l), Some(f)) if l.path == f.path => {
                            if l.sha256 != f.sha256 || l.size != f.size {
                                note(&mut problems, &l.path, "hash mismatch".into());
                                hashes_ok = false;
                            }
                            i += 1;
                            j += 1;
                        }
                        (Some(l), f) if f.is_none_or(|f| l.path.as_bytes() < f.path.as_bytes()) => {
                            note(&mut problems, &l.path, "listed but missing".into());
                            hashes_ok = false;
                            i += 1;
                        }
                        (_, Some(f)) => {
                            note(&mut problems, &f.path, "present but not listed".into());
                            hashes_ok = false;
                            j += 1;
                        }
                        _ => unreachable!(),
                    }
                }
                match manifest::compute_bundle_root(&actual, &m.metadata) {
                    Ok(root) => {
                        root_ok = root.to_hex() == m.bundle_root;
                        let dir_name = bundle_dir.file_name().and_then(|n| n.to_str()).unwrap_or("");
                        if crate::digest::is_lower_hex64(dir_name) && dir_name != m.bundle_root {
                            root_ok = false;
                        }
                    }
                    Err(e) => note(&mut problems, "bundle_root", e.to_string()),
                }
                if !root_ok {
                    note(&mut problems, "bundle_root", "recomputed root does not match".into());
                }
            }
        }
        Err(e) => {
            hashes_ok = false;
            let path = match &e {
                Error::Symlink(p) | Error::NonUtf8Path(p) => p.strip_prefix(bundle_dir).unwrap_or(p).display().to_string(),
                _ => bundle_dir.display().to_string(),
            };
            note(&mut problems, &path, e.to_string());
        }
    }

    let digest = Digest::of(&bytes);
    let att_dir = bundle_dir.join(ATTESTATIONS_DIR);
    let loaded = signing::load_attestations(&att_dir)?;
    let mut signatures = if loaded.is_empty() {
        SignatureStatus::Missing
    } else {
        SignatureStatus::Ok
    };
    let mut signers = Vec::new();
    let mut valid = Vec::new();
    for (path, parsed) in &loaded {
        let rel = format!("{ATTESTATIONS_DIR}/{}", path.file_name().unwrap_or_default().to_string_lossy());
        match parsed {
            Ok(att) => match signing::verify_attestation_digest(&digest, att) {
                Ok(()) => {
                    if rel != format!("{ATTESTATIONS_DIR}/{}", att.file_name()) {
                        note(&mut problems, &rel, "file name does not match contents".into());
                        signatures = SignatureStatus::Invalid;
                    }
                    signers.push(att.signer.display_name.clone());
                    valid.push(att.clone());
                }
                Err(r) => {
                    note(&mut problems, &rel, r.to_string());
                    signatures = SignatureStatus::Invalid;
                }
            },
            Err(e) => {
                note(&mut problems, &rel, e.clone());
                signatures = SignatureStatus::Invalid;
            }
        }
    }
    let attested: Vec<&SidecarAttestation> = loaded.iter().filter_map(|(_, a)| a.as_ref().ok()).collect();
    if !attested.is_empty() && attested.iter().all(|a| a.artifact_sha256 != digest) {
        note(&mut problems, MANIFEST_FILE, "differs from the attested digest".into());
    }
    let sm_path = att_dir.join(SIGNING_MANIFEST);
    let sm_rel = format!("{ATTESTATIONS_DIR}/{SIGNING_MANIFEST}");
    if sm_path.is_file() {
        let check = (|| -> std::result::Result<SignatureStatus, String> {
            let raw = fs::read(&sm_path).map_err(|e| e.to_string())?;
            let stored: SigningManifest = serde_json::from_slice(&raw).map_err(|e| e.to_string())?;
            if crate::canonical::to_canonical_bytes(&stored).map_err(|e| e.to_string())? != raw {
                return Err("not in canonical encoding".into());
            }
            let required = stored
                .required
                .iter()
                .map(|s| s.parse::<AuthorRef>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            let listed: BTreeSet<_> = stored.attestations.iter().map(|a| a.file_name()).collect();
            let on_disk: BTreeSet<_> = valid.iter().map(|a| a.file_name()).collect();
            if listed.difference(&on_disk).next().is_some() {
                return Ok(SignatureStatus::Missing);
            }
            let recomputed = build_signing_manifest(&required, &valid).map_err(|e| e.to_string())?;
            if recomputed != stored {
                return Err("does not match the attestation files".into());
            }
            Ok(SignatureStatus::Ok)
        })();
        match check {
            Ok(SignatureStatus::Ok) => {}
            Ok(other) => {
                note(&mut problems, &sm_rel, "references attestations that are absent".into());
                if signatures == SignatureStatus::Ok {
                    signatures = other;
                }
            }
            Err(e) => {
                note(&mut problems, &sm_rel, e);
                signatures = SignatureStatus::Invalid;
            }
        }
    } else if !loaded.is_empty() {
        note(&mut problems, &sm_rel, "missing".into());
        signatures = SignatureStatus::Invalid;
    }
    if signatures == SignatureStatus::Missing && !problems.iter().any(|p| p.path.starts_with(ATTESTATIONS_DIR)) {
        note(&mut problems, ATTESTATIONS_DIR, "no attestations".into());
    }

    let recheck = figsafe::recheck_all(bundle_dir, &Screener::read_only(provider))?;
    for e in recheck.entries.iter().filter(|e| e.is_blocking()) {
        note(&mut problems, &e.path, "blocked by safety re-check".into());
    }
    let safety_ok = !recheck.blocking;

    let pass = manifest_ok && hashes_ok && root_ok && signatures == SignatureStatus::Ok && safety_ok;
    Ok(VerifyReport {
        bundle_dir: bundle_dir.to_path_buf(),
        bundle_root: manifest.map(|m| m.bundle_root),
        manifest_ok,
        hashes_ok,
        root_ok,
        signatures,
        signers,
        safety_ok,
        problems,
        pass,
    })
}
