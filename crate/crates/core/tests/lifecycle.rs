mod common;

use std::fs;

use clawxiv::antispam::{self, AdmissionPolicy, AuthorIndex, Evidence, VoucherKey};
use clawxiv::bundle::{self, bundle_create, bundle_sign, bundle_verify, promote, CreateOptions, SignatureStatus};
use clawxiv::figsafe::StubProvider;
use clawxiv::manifest::MANIFEST_FILE;
use clawxiv::publish::{self, bundle_push, resolve, resolve_to, PushRequest, PushTarget};
use clawxiv::signing::CustodyEvidence;
use clawxiv::translog::{self, EventType, TransparencyLog};
use clawxiv::project::Project;
use clawxiv::{Category, Error};
use common::*;

fn opts() -> CreateOptions {
    CreateOptions {
        created_at: Some(pinned()),
        ..Default::default()
    }
}

struct Ready {
    _tmp: tempfile::TempDir,
    project: Project,
    bundle_dir: std::path::PathBuf,
    index: AuthorIndex,
    evidence: Evidence,
    mirror: std::path::PathBuf,
}

/// A project with a bundle signed by every author, promoted, and vouched.
fn ready() -> Ready {
    let tmp = tempfile::tempdir().unwrap();
    let project = fixture_project(tmp.path());
    let b = bundle_create(&project, &opts(), &StubProvider).unwrap();
    for s in signers() {
        bundle_sign(&project, &b.root_dir, &s, CustodyEvidence::default()).unwrap();
    }
    promote(&project, &b.root_dir).unwrap();
    let voucher = VoucherKey::generate();
    let vouch = antispam::create_vouch(&b.bundle_root, &voucher);
    let dir = publish::admission_dir(&project, &b.bundle_root);
    antispam::write_vouch(&dir, &vouch).unwrap();
    let mirror = tmp.path().join("mirror");
    Ready {
        index: AuthorIndex::new(vec![voucher.verifying_key()]),
        evidence: Evidence::load(&dir).unwrap(),
        bundle_dir: b.root_dir,
        project,
        mirror,
        _tmp: tmp,
    }
}

fn push(r: &Ready, targets: &[PushTarget]) -> clawxiv::Result<publish::PushOutcome> {
    bundle_push(
        &r.project,
        &r.bundle_dir,
        &PushRequest {
            targets,
            evidence: &r.evidence,
            author_index: &r.index,
            policy: &AdmissionPolicy::default(),
            provider: &StubProvider,
        },
    )
}

fn log_len(p: &Project) -> u64 {
    TransparencyLog::open(&translog::log_path(&p.out())).unwrap().len()
}

#[test]
fn create_is_deterministic_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let project = fixture_project(tmp.path());
    let a = bundle_create(&project, &opts(), &StubProvider).unwrap();
    let first = fs::read(a.root_dir.join(MANIFEST_FILE)).unwrap();
    let b = bundle_create(&project, &opts(), &StubProvider).unwrap();
    assert_eq!(a.bundle_root, b.bundle_root);
    assert_eq!(first, fs::read(b.root_dir.join(MANIFEST_FILE)).unwrap());
    assert_eq!(a.root_dir.file_name().unwrap().to_str().unwrap(), a.bundle_root.to_hex());

    let report = bundle_verify(&a.root_dir, &StubProvider).unwrap();
    assert!(report.manifest_ok && report.hashes_ok && report.root_ok && report.safety_ok);
    assert_eq!(report.signatures, SignatureStatus::Missing);
}

#[test]
fn changing_a_source_file_changes_the_root() {
    let tmp = tempfile::tempdir().unwrap();
    let project = fixture_project(tmp.path());
    let a = bundle_create(&project, &opts(), &StubProvider).unwrap();
    fs::write(project.src().join("main.tex"), "changed").unwrap();
    let b = bundle_create(&project, &opts(), &StubProvider).unwrap();
    assert_ne!(a.bundle_root, b.bundle_root);
}

#[test]
fn signing_completes_and_promotion_drops_rc() {
    let tmp = tempfile::tempdir().unwrap();
    let project = fixture_project(tmp.path());
    let b = bundle_create(&project, &opts(), &StubProvider).unwrap();
    let [human, ai] = signers();
    bundle_sign(&project, &b.root_dir, &human, CustodyEvidence::default()).unwrap();
    let err = promote(&project, &b.root_dir).unwrap_err();
    assert_eq!(err.category(), Category::Validation);
    assert!(err.to_string().contains(AI));
    let out = bundle_sign(&project, &b.root_dir, &ai, CustodyEvidence::default()).unwrap();
    assert!(out.signing_manifest.complete);
    assert_eq!(promote(&project, &b.root_dir).unwrap().to_string(), "v1");
    let report = bundle_verify(&b.root_dir, &StubProvider).unwrap();
    assert!(report.pass, "{:?}", report.problems);
    assert_eq!(report.signers.len(), 2);
}

#[test]
fn push_to_mirror_then_resolve_round_trips() {
    let r = ready();
    let targets = [PushTarget::LocalMirror(r.mirror.clone())];
    let out = push(&r, &targets).unwrap();
    let root = out.bundle_root.to_hex();
    assert!(out.all_ok());
    assert_eq!(out.receipts[0].content_id.as_deref(), Some(root.as_str()));
    assert!(r.mirror.join(&root).join(MANIFEST_FILE).is_file());

    let dest = r._tmp.path().join("resolved");
    resolve_to(&root, &targets, &dest).unwrap();
    assert_eq!(tree_bytes(&dest), tree_bytes(&r.bundle_dir));

    let log = TransparencyLog::open(&translog::log_path(&r.project.out())).unwrap();
    assert_eq!(log.len(), 1);
    let entry = log.entry(0).unwrap();
    assert_eq!(entry.event_type, EventType::Publication);
    assert!(entry.payload.to_string().contains(&root));
    assert_eq!(r.project.metadata().unwrap().bundle_root, Some(out.bundle_root));

    // Pushing again is idempotent for the mirror.
    assert!(push(&r, &targets).unwrap().all_ok());
}

#[test]
fn resolve_rejects_unknown_and_tampered() {
    let r = ready();
    let targets = [PushTarget::LocalMirror(r.mirror.clone())];
    let root = push(&r, &targets).unwrap().bundle_root.to_hex();

    let err = resolve(&"0".repeat(64), &targets).unwrap_err();
    assert!(matches!(err, Error::NotFound(_)));
    assert!(err.to_string().contains("mirror:"));

    fs::write(r.mirror.join(&root).join("src/main.tex"), "tampered").unwrap();
    let err = resolve(&root, &targets).unwrap_err();
    assert!(err.to_string().contains("integrity"), "{err}");
}

#[test]
fn push_to_gateway_records_content_id() {
    let r = ready();
    let gw = TestGateway::start();
    let targets = [
        format!("gateway:swarm:{}", gw.url).parse().unwrap(),
        PushTarget::LocalMirror(r.mirror.clone()),
    ];
    let out = push(&r, &targets).unwrap();
    assert!(out.all_ok(), "{:?}", out.receipts);
    let archive = publish::pack_tar(&r.bundle_dir).unwrap();
    let id = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(&archive));
    assert_eq!(out.receipts[0].content_id.as_deref(), Some(id.as_str()));
    assert_eq!(gw.store.lock().unwrap().get(&id), Some(&archive));
    assert_eq!(r.project.metadata().unwrap().swarm_hash.map(|d| d.to_hex()), Some(id.clone()));

    let got = resolve(&id, &targets[..1]).unwrap();
    assert_eq!(got.archive, archive);
}

#[test]
fn failed_target_does_not_stop_the_others() {
    let r = ready();
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", dead.local_addr().unwrap());
    drop(dead);
    let targets = [
        format!("gateway:ipfs:{url}").parse().unwrap(),
        PushTarget::LocalMirror(r.mirror.clone()),
    ];
    let out = push(&r, &targets).unwrap();
    assert!(!out.receipts[0].ok && out.receipts[0].error.is_some());
    assert!(out.receipts[1].ok);
    assert_eq!(out.log_index, Some(0));
}

#[test]
fn rc_label_blocks_push() {
    let r = ready();
    let mut meta = r.project.metadata().unwrap();
    meta.version_label = clawxiv::project::parse_version_label("v4.rc3").unwrap();
    r.project.save_metadata(&meta).unwrap();
    let err = push(&r, &[PushTarget::LocalMirror(r.mirror.clone())]).unwrap_err();
    assert_eq!(err.category(), Category::Validation);
    assert!(err.to_string().contains("version gate"));
    assert!(!r.mirror.exists());
    assert_eq!(log_len(&r.project), 0);
}

#[test]
fn photo_added_after_sealing_blocks_push() {
    let r = ready();
    write_png(&r.project.fig_dir().join("snapshot.png"), 640, 480, 9);
    let err = push(&r, &[PushTarget::LocalMirror(r.mirror.clone())]).unwrap_err();
    assert_eq!(err.category(), Category::Safety);
    assert!(!r.mirror.exists());
}

#[test]
fn missing_evidence_blocks_push() {
    let mut r = ready();
    r.evidence = Evidence::default();
    let err = push(&r, &[PushTarget::LocalMirror(r.mirror.clone())]).unwrap_err();
    assert!(err.to_string().contains("admission gate"));
    assert!(!r.mirror.exists());
}

#[test]
fn tampered_bundle_blocks_push() {
    let r = ready();
    fs::write(r.bundle_dir.join("src/refs.bib"), "x").unwrap();
    let err = push(&r, &[PushTarget::LocalMirror(r.mirror.clone())]).unwrap_err();
    assert_eq!(err.category(), Category::Validation);
    assert!(err.to_string().contains("src/refs.bib"));
    assert!(!r.mirror.exists());
}

#[test]
fn tar_layout_is_deterministic() {
    let r = ready();
    let a = publish::pack_tar(&r.bundle_dir).unwrap();
    let copy = r._tmp.path().join("copy");
    clawxiv::fsutil::copy_tree(&r.bundle_dir, &copy).unwrap();
    assert_eq!(a, publish::pack_tar(&copy).unwrap());
    let mut ar = tar::Archive::new(a.as_slice());
    let mut names = Vec::new();
    for e in ar.entries().unwrap() {
        let e = e.unwrap();
        let h = e.header();
        assert_eq!((h.mtime().unwrap(), h.uid().unwrap(), h.gid().unwrap(), h.mode().unwrap()), (0, 0, 0, 0o644));
        names.push(e.path().unwrap().to_string_lossy().into_owned());
    }
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(names.contains(&MANIFEST_FILE.to_string()));
    assert!(names.iter().any(|n| n.starts_with(bundle::ATTESTATIONS_DIR)));
}

#[test]
fn target_specs_parse() {
    assert!("mirror:/tmp/x".parse::<PushTarget>().is_ok());
    assert!("gateway:ipfs:https://example.org/".parse::<PushTarget>().is_ok());
    assert!("gateway:bittorrent:http://x".parse::<PushTarget>().is_err());
    assert!("gateway:swarm:ftp://x".parse::<PushTarget>().is_err());
    assert!("s3://bucket".parse::<PushTarget>().is_err());
    let t: PushTarget = "gateway:swarm:http://h:1/".parse().unwrap();
    assert_eq!(t.to_string(), "gateway:swarm:http://h:1");
}
