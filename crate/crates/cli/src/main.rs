use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use clawxiv::antispam::{self, AdmissionPolicy, AuthorIndex, Evidence, VoucherKey};
use clawxiv::bundle::{self, Bundle, CreateOptions};
use clawxiv::figsafe::{self, SafetyProvider};
use clawxiv::project::{self, AuthorRef, Project, ProjectMetadata};
use clawxiv::publish::{self, PushRequest, PushTarget};
use clawxiv::signing::{CustodyEvidence, SignerIdentity};
use clawxiv::timefmt;
use clawxiv::translog::{self, LogEntry, TransparencyLog};
use clawxiv::{Category, Digest, Error};
use ed25519_dalek::SigningKey;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "clawxiv", version, about = "Build, sign, gate and publish research bundles")]
struct Cli {
    /// Project directory.
    #[arg(long, global = true, default_value = ".")]
    project: PathBuf,
    /// Print one JSON object on standard output.
    #[arg(long, global = true)]
    json: bool,
    /// Suppress human-readable output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a seed directory into a new project.
    Import(ImportArgs),
    /// Screen a figure and add it to src/fig with a provenance sidecar.
    FigAdd {
        file: PathBuf,
        /// Where the figure came from.
        #[arg(long = "desc", default_value = "")]
        description: String,
    },
    /// Re-screen every figure in src/fig.
    Recheck,
    /// Assemble and seal a bundle from the project.
    BundleCreate(CreateArgs),
    /// Attest a bundle with a fresh sign-and-discard key.
    BundleSign(SignArgs),
    /// Check hashes, root, attestations and figure safety of a bundle.
    BundleVerify { bundle: String },
    /// Gate and publish a bundle to its targets.
    BundlePush(PushArgs),
    /// Vouch for a bundle with a persistent key.
    Endorse(EndorseArgs),
    /// Mint a proof-of-work stamp for a bundle.
    Pow {
        bundle: String,
        #[arg(long, default_value_t = antispam::DEFAULT_MIN_DIFFICULTY)]
        difficulty: u8,
    },
    /// Inspect or extend the transparency log.
    Log {
        #[command(subcommand)]
        action: LogAction,
    },
    /// Fetch a published bundle by content id.
    Resolve {
        content_id: String,
        /// Directory to unpack into; must not exist.
        #[arg(long)]
        out: PathBuf,
        /// Targets to try (default: the project's configured targets).
        #[arg(long = "target")]
        targets: Vec<String>,
    },
    /// Check project layout, metadata and figure sidecars.
    Validate,
}

#[derive(Args)]
struct ImportArgs {
    seed: PathBuf,
    dest: PathBuf,
    #[arg(long)]
    title: Option<String>,
    /// kind:responsibility:Name, e.g. human:corresponding:Ada Lovelace
    #[arg(long = "author")]
    authors: Vec<String>,
    /// vN or vN.rcM
    #[arg(long = "version-label")]
    version_label: Option<String>,
    #[arg(long = "license")]
    licenses: Vec<String>,
    #[arg(long = "tag")]
    tags: Vec<String>,
}

#[derive(Args)]
struct CreateArgs {
    /// Build command run in a scratch copy of src/.
    #[arg(long)]
    build_cmd: Option<String>,
    /// Copy the built PDF into the bundle.
    #[arg(long, requires = "build_cmd")]
    include_pdf: bool,
    /// PDF path relative to the build directory.
    #[arg(long)]
    pdf_output: Option<String>,
    /// Pin created_at (RFC 3339, whole seconds).
    #[arg(long)]
    created_at: Option<String>,
}

#[derive(Args)]
struct SignArgs {
    bundle: String,
    /// Signer display name; must match a project author.
    #[arg(long)]
    name: String,
    /// Sign as an AI author.
    #[arg(long, requires_all = ["model", "provider", "release"])]
    ai: bool,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    provider: Option<String>,
    #[arg(long)]
    release: Option<String>,
    /// Drop the rc label once every author has signed.
    #[arg(long)]
    promote: bool,
}

#[derive(Args)]
struct PushArgs {
    bundle: String,
    /// mirror:<dir>, gateway:swarm:<url> or gateway:ipfs:<url>.
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(long, default_value_t = antispam::DEFAULT_MIN_DIFFICULTY)]
    min_difficulty: u8,
    /// Skip the confirmation prompt.
    #[arg(long, short = 'y')]
    yes: bool,
}

#[derive(Args)]
struct EndorseArgs {
    bundle: String,
    /// PKCS#8 PEM voucher key.
    #[arg(long)]
    key: PathBuf,
    /// Create the key first.
    #[arg(long)]
    keygen: bool,
}

#[derive(Subcommand)]
enum LogAction {
    /// Current size and root.
    Show,
    /// One entry with its inclusion proof.
    Entry {
        index: u64,
        #[arg(long)]
        size: Option<u64>,
    },
    /// Consistency proof between two sizes.
    Consistency { old: u64, new: Option<u64> },
    /// Record classification tags for a bundle.
    Classify {
        bundle_root: String,
        #[arg(long = "tag", required = true)]
        tags: Vec<String>,
        /// Signing key (PKCS#8 PEM); a throwaway key when absent.
        #[arg(long)]
        key: Option<PathBuf>,
    },
    /// Appeal an earlier classification entry.
    Appeal {
        bundle_root: String,
        #[arg(long)]
        references: u64,
        #[arg(long)]
        reason: String,
        #[arg(long)]
        key: Option<PathBuf>,
    },
}

struct Reply {
    value: Value,
    text: String,
    failure: Option<(Category, String)>,
}

impl Reply {
    fn ok(value: Value, text: impl Into<String>) -> Self {
        Reply {
            value,
            text: text.into(),
            failure: None,
        }
    }
}

type Outcome = clawxiv::Result<Reply>;

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&raw) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            if raw.iter().any(|a| a == "--json") {
                let msg = e.kind().to_string();
                println!("{}", json!({"ok": false, "error": {"category": "usage", "exit_code": 1, "message": msg}}));
            }
            return ExitCode::from(1);
        }
    };
    let name = command_name(&cli.command);
    let result = run(&cli);
    let (code, value) = match result {
        Ok(reply) => {
            if !cli.json && !cli.quiet && !reply.text.is_empty() {
                println!("{}", reply.text.trim_end());
            }
            let mut v = json!({"ok": reply.failure.is_none(), "command": name});
            merge(&mut v, reply.value);
            match reply.failure {
                None => (0, v),
                Some((cat, msg)) => {
                    eprintln!("clawxiv {name}: {msg}");
                    v["error"] = error_json(cat, &msg);
                    (cat.exit_code(), v)
                }
            }
        }
        Err(e) => {
            let cat = e.category();
            eprintln!("clawxiv {name}: {e}");
            (cat.exit_code(), json!({"ok": false, "command": name, "error": error_json(cat, &e.to_string())}))
        }
    };
    if cli.json {
        println!("{value}");
    }
    ExitCode::from(code as u8)
}

fn error_json(cat: Category, msg: &str) -> Value {
    json!({"category": cat.as_str(), "exit_code": cat.exit_code(), "message": msg})
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Import(_) => "import",
        Command::FigAdd { .. } => "fig-add",
        Command::Recheck => "recheck",
        Command::BundleCreate(_) => "bundle-create",
        Command::BundleSign(_) => "bundle-sign",
        Command::BundleVerify { .. } => "bundle-verify",
        Command::BundlePush(_) => "bundle-push",
        Command::Endorse(_) => "endorse",
        Command::Pow { .. } => "pow",
        Command::Log { .. } => "log",
        Command::Resolve { .. } => "resolve",
        Command::Validate => "validate",
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> clawxiv::Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Encoding(e.to_string()))
}

fn provider() -> clawxiv::Result<Box<dyn SafetyProvider>> {
    figsafe::provider_from_env()
}

/// A bundle argument is either a directory or a root under out/bundles.
fn bundle_dir(project: &Project, arg: &str) -> PathBuf {
    let p = PathBuf::from(arg);
    if !p.exists() && clawxiv::digest::is_lower_hex64(arg) {
        project.bundles_dir().join(arg)
    } else {
        p
    }
}

fn load_key(path: &Path) -> clawxiv::Result<SigningKey> {
    use ed25519_dalek::pkcs8::DecodePrivateKey;
    let pem = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    SigningKey::from_pkcs8_pem(&pem).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Import(a) => import(a),
        Command::FigAdd { file, description } => {
            let p = Project::open(&cli.project)?;
            let out = p.fig_add(file, description, provider()?.as_ref())?;
            let text = format!("added {} ({:?})", out.figure_path.display(), out.verdict.value);
            Ok(Reply::ok(to_value(&out)?, text))
        }
        Command::Recheck => {
            let p = Project::open(&cli.project)?;
            let report = p.recheck(provider()?.as_ref())?;
            let mut text = String::new();
            for e in &report.entries {
                text.push_str(&format!("{}\t{}\n", e.path, if e.is_blocking() { "BLOCKING" } else { "ok" }));
            }
            let mut r = Reply::ok(to_value(&report)?, text);
            if report.blocking {
                r.failure = Some((Category::Safety, format!("blocking figures: {}", report.blocking_paths().join(", "))));
            }
            Ok(r)
        }
        Command::BundleCreate(a) => {
            let p = Project::open(&cli.project)?;
            let opts = CreateOptions {
                include_pdf: a.include_pdf,
                build_cmd: a.build_cmd.clone(),
                pdf_output: a.pdf_output.clone(),
                created_at: a.created_at.as_deref().map(timefmt::parse).transpose()?,
            };
            let b = bundle::bundle_create(&p, &opts, provider()?.as_ref())?;
            let text = format!("{}\n{}", b.bundle_root, b.root_dir.display());
            Ok(Reply::ok(
                json!({"bundle_root": b.bundle_root, "bundle_dir": b.root_dir, "files": b.manifest.files.len()}),
                text,
            ))
        }
        Command::BundleSign(a) => sign(cli, a),
        Command::BundleVerify { bundle } => {
            let p = Project { root: cli.project.clone() };
            let report = bundle::bundle_verify(&bundle_dir(&p, bundle), provider()?.as_ref())?;
            let mut text = format!(
                "root {}\nmanifest {}\nhashes {}\nroot match {}\nsignatures {:?}\nsafety {}\n",
                report.bundle_root.as_deref().unwrap_or("?"),
                ok(report.manifest_ok),
                ok(report.hashes_ok),
                ok(report.root_ok),
                report.signatures,
                ok(report.safety_ok)
            );
            for pr in &report.problems {
                text.push_str(&format!("problem {}: {}\n", pr.path, pr.issue));
            }
            text.push_str(if report.pass { "PASS" } else { "FAIL" });
            let mut r = Reply::ok(to_value(&report)?, text);
            if !report.pass {
                let cat = if report.safety_ok { Category::Validation } else { Category::Safety };
                let names: Vec<&str> = report.problems.iter().map(|p| p.path.as_str()).collect();
                r.failure = Some((cat, format!("verification failed: {}", names.join(", "))));
            }
            Ok(r)
        }
        Command::BundlePush(a) => push(cli, a),
        Command::Endorse(a) => endorse(cli, a),
        Command::Pow { bundle, difficulty } => {
            let p = Project::open(&cli.project)?;
            let b = Bundle::open(&bundle_dir(&p, bundle))?;
            let stamp = antispam::mint_pow(&b.bundle_root, *difficulty)?;
            let path = antispam::write_pow(&publish::admission_dir(&p, &b.bundle_root), &stamp)?;
            let text = format!("nonce {} at {} bits\n{}", stamp.nonce, stamp.difficulty_bits, path.display());
            Ok(Reply::ok(json!({"stamp": stamp, "path": path}), text))
        }
        Command::Log { action } => log(cli, action),
        Command::Resolve {
            content_id,
            out,
            targets,
        } => {
            let targets = if targets.is_empty() {
                publish::configured_targets(&Project::open(&cli.project)?)?
            } else {
                publish::parse_targets(targets)?
            };
            let r = publish::resolve_to(content_id, &targets, out)?;
            Ok(Reply::ok(
                json!({"content_id": content_id, "target": r.target, "out": out, "archive_bytes": r.archive.len()}),
                format!("{} from {} -> {}", content_id, r.target, out.display()),
            ))
        }
        Command::Validate => {
            let violations = project::validate_project(&cli.project);
            let text: Vec<String> = violations.iter().map(|v| format!("{}: {}", v.field, v.rule)).collect();
            let mut r = Reply::ok(
                json!({"violations": violations}),
                if text.is_empty() { "valid".to_string() } else { text.join("\n") },
            );
            if !violations.is_empty() {
                r.failure = Some((Category::Validation, format!("{} violation(s)", violations.len())));
            }
            Ok(r)
        }
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn import(a: &ImportArgs) -> Outcome {
    let mut meta = ProjectMetadata {
        title: a.title.clone().unwrap_or_default(),
        authors: a.authors.iter().map(|s| s.parse()).collect::<clawxiv::Result<Vec<AuthorRef>>>()?,
        tags: a.tags.clone(),
        ..Default::default()
    };
    if let Some(v) = &a.version_label {
        meta.version_label = project::parse_version_label(v)?;
    }
    if !a.licenses.is_empty() {
        meta.licenses = a.licenses.clone();
    }
    let p = project::import_seed(&a.seed, &a.dest, meta, provider()?.as_ref())?;
    let m = p.metadata()?;
    Ok(Reply::ok(
        json!({"project": p.root, "title": m.title, "version_label": m.version_label.to_string()}),
        format!("imported {} into {}", a.seed.display(), p.root.display()),
    ))
}

fn sign(cli: &Cli, a: &SignArgs) -> Outcome {
    let p = Project::open(&cli.project)?;
    let dir = bundle_dir(&p, &a.bundle);
    let signer = if a.ai {
        SignerIdentity::ai(
            &a.name,
            a.model.clone().unwrap_or_default(),
            a.provider.clone().unwrap_or_default(),
            a.release.clone().unwrap_or_default(),
        )
    } else {
        SignerIdentity::human(&a.name)
    };
    let authors = p.metadata()?.authors;
    if !authors.iter().any(|au| signer.represents(au)) {
        let known: Vec<String> = authors.iter().map(|a| a.to_string()).collect();
        return Err(Error::invalid(
            "signer",
            format!("{} is not a project author ({})", a.name, known.join(", ")),
        ));
    }
    let out = bundle::bundle_sign(&p, &dir, &signer, CustodyEvidence::collect())?;
    let mut value = to_value(&out)?;
    let mut text = format!(
        "signed {} as {}\nmissing: {}",
        out.attestation.artifact_sha256,
        a.name,
        if out.signing_manifest.missing.is_empty() {
            "none".to_string()
        } else {
            out.signing_manifest.missing.join(", ")
        }
    );
    if a.promote {
        let label = bundle::promote(&p, &dir)?;
        value["version_label"] = json!(label.to_string());
        text.push_str(&format!("\nversion {label}"));
    }
    Ok(Reply::ok(value, text))
}

fn confirm(question: &str) -> clawxiv::Result<bool> {
    if !std::io::stdin().is_terminal() {
        return Err(Error::invalid("confirmation", "standard input is not a terminal; pass --yes"));
    }
    eprint!("{question} [y/N] ");
    let _ = std::io::stderr().flush();
    let mut line = String::new();
    std::io::stdin().read_line(&mut line).map_err(|e| Error::io("stdin", e))?;
    Ok(matches!(line.trim(), "y" | "Y" | "yes"))
}

fn push(cli: &Cli, a: &PushArgs) -> Outcome {
    let p = Project::open(&cli.project)?;
    let dir = bundle_dir(&p, &a.bundle);
    let b = Bundle::open(&dir)?;
    let targets: Vec<PushTarget> = if a.targets.is_empty() {
        publish::configured_targets(&p)?
    } else {
        publish::parse_targets(&a.targets)?
    };
    let evidence = Evidence::load(&publish::admission_dir(&p, &b.bundle_root))?;
    let index = AuthorIndex::from_env()?;
    let policy = AdmissionPolicy {
        min_difficulty: a.min_difficulty,
    };
    if !a.yes {
        let names: Vec<String> = targets.iter().map(|t| t.to_string()).collect();
        if !confirm(&format!("publish {} to {}?", b.bundle_root, names.join(", ")))? {
            return Err(Error::Gate("publication declined".into()));
        }
    }
    let provider = provider()?;
    let out = publish::bundle_push(
        &p,
        &dir,
        &PushRequest {
            targets: &targets,
            evidence: &evidence,
            author_index: &index,
            policy: &policy,
            provider: provider.as_ref(),
        },
    )?;
    let mut text = String::new();
    for r in &out.receipts {
        match (&r.content_id, &r.error) {
            (Some(id), _) => text.push_str(&format!("{}\tok\t{id}\n", r.target)),
            (None, e) => text.push_str(&format!("{}\tFAILED\t{}\n", r.target, e.as_deref().unwrap_or(""))),
        }
    }
    let mut reply = Reply::ok(to_value(&out)?, text);
    if !out.all_ok() {
        let failed = out.receipts.iter().filter(|r| !r.ok).count();
        reply.failure = Some((Category::Transmit, format!("{failed} of {} target(s) failed", out.receipts.len())));
    }
    Ok(reply)
}

fn endorse(cli: &Cli, a: &EndorseArgs) -> Outcome {
    let p = Project::open(&cli.project)?;
    let b = Bundle::open(&bundle_dir(&p, &a.bundle))?;
    let key = if a.keygen {
        let k = VoucherKey::generate();
        k.save(&a.key)?;
        k
    } else {
        VoucherKey::load(&a.key)?
    };
    let vouch = antispam::create_vouch(&b.bundle_root, &key);
    let path = antispam::write_vouch(&publish::admission_dir(&p, &b.bundle_root), &vouch)?;
    let pem = key.public_pem()?;
    Ok(Reply::ok(
        json!({"vouch": vouch, "path": path, "voucher_public_pem": pem}),
        format!("vouched for {}\n{}", b.bundle_root, path.display()),
    ))
}

fn log(cli: &Cli, action: &LogAction) -> Outcome {
    let p = Project::open(&cli.project)?;
    let path = translog::log_path(&p.out());
    let signing_key = |k: &Option<PathBuf>| match k {
        Some(path) => load_key(path),
        None => Ok(SigningKey::generate(&mut rand_core::OsRng)),
    };
    match action {
        LogAction::Show => {
            let log = TransparencyLog::open(&path)?;
            let st = log.state();
            Ok(Reply::ok(to_value(&st)?, format!("size {}\nroot {}", st.tree_size, st.root_hash)))
        }
        LogAction::Entry { index, size } => {
            let log = TransparencyLog::open(&path)?;
            let size = size.unwrap_or(log.len());
            let proof = log.prove_inclusion_at(*index, size)?;
            let root = log.root_at(size)?;
            let entry = log.entry(*index)?;
            let text = format!(
                "{}\n{:?} {}\nroot {} at size {}",
                String::from_utf8_lossy(log.entry_bytes(*index)?),
                entry.event_type,
                entry.bundle_root,
                root,
                size
            );
            Ok(Reply::ok(json!({"entry": entry, "proof": proof, "root_hash": root}), text))
        }
        LogAction::Consistency { old, new } => {
            let log = TransparencyLog::open(&path)?;
            let new = new.unwrap_or(log.len());
            let proof = log.prove_consistency(*old, new)?;
            let (old_root, new_root) = (log.root_at(*old)?, log.root_at(new)?);
            let text = format!("{old} {old_root}\n{new} {new_root}\n{} hashes", proof.path.len());
            Ok(Reply::ok(
                json!({"proof": proof, "old_root": old_root, "new_root": new_root}),
                text,
            ))
        }
        LogAction::Classify { bundle_root, tags, key } => {
            let root = Digest::from_hex(bundle_root)?;
            let entry = LogEntry::classification(root, tags, &signing_key(key)?)?;
            append(&p, &path, &entry)
        }
        LogAction::Appeal {
            bundle_root,
            references,
            reason,
            key,
        } => {
            let root = Digest::from_hex(bundle_root)?;
            let entry = LogEntry::appeal(root, *references, reason, &signing_key(key)?)?;
            append(&p, &path, &entry)
        }
    }
}

fn append(p: &Project, path: &Path, entry: &LogEntry) -> Outcome {
    let _lock = p.lock()?;
    let mut log = TransparencyLog::open(path)?;
    let st = log.append(entry)?;
    let index = st.tree_size - 1;
    Ok(Reply::ok(
        json!({"index": index, "entry": entry, "state": st}),
        format!("appended entry {index}\nroot {}", st.root_hash),
    ))
}
