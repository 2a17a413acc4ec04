//! The normalized project directory: layout, `project.yaml` metadata,
//! version labels, and seed import.
//!
//! ```text
//! <project>/
//!   project.yaml   canonical metadata
//!   import.log     one tab-separated line per import action
//!   src/           normalized sources
//!   src/fig/       figures, each with a <name>.json sidecar
//!   src/bin/       utility scripts
//!   keys/          author public keys (<slug>.pem)
//!   out/           derived artifacts, logs, bundles
//! ```

use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::digest::Digest;
use crate::error::{Error, IoContext, Result};
use crate::figsafe::{self, Screener};
use crate::lock::ProjectLock;
use crate::manifest::{AuthorKind, Responsibility, Violation};
use crate::timefmt::{self, Timestamp};
use crate::yaml;

pub const PROJECT_FILE: &str = "project.yaml";
pub const IMPORT_LOG: &str = "import.log";
pub const RELEASE_LOG: &str = "release.log";
pub const DEFAULT_STAMP_DAYS: u32 = 730;
pub const REQUIRED_DIRS: [&str; 5] = ["src", "src/fig", "src/bin", "keys", "out"];

/// Extensions routed into `src/fig/` at import. PDFs count only inside a
/// figure-like directory.
const FIGURE_EXTENSIONS: [&str; 12] = [
    "png", "jpg", "jpeg", "gif", "webp", "tif", "tiff", "bmp", "svg", "eps", "emf", "wmf",
];
const FIGURE_DIR_NAMES: [&str; 7] = ["fig", "figs", "figure", "figures", "img", "images", "graphics"];

/// `vN` or `vN.rcM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionLabel {
    pub major: u32,
    pub rc: Option<u32>,
}

impl VersionLabel {
    pub fn is_release(&self) -> bool {
        self.rc.is_none()
    }

    pub fn promoted(&self) -> Self {
        VersionLabel {
            major: self.major,
            rc: None,
        }
    }
}

impl fmt::Display for VersionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rc {
            Some(rc) => write!(f, "v{}.rc{}", self.major, rc),
            None => write!(f, "v{}", self.major),
        }
    }
}

fn positive(s: &str) -> Option<u32> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || s.starts_with('0') {
        return None;
    }
    s.parse().ok()
}

pub fn parse_version_label(text: &str) -> Result<VersionLabel> {
    let bad = || Error::parse("version label", format!("{text:?} is not vN or vN.rcM"));
    let body = text.strip_prefix('v').ok_or_else(bad)?;
    let (major, rc) = match body.split_once('.') {
        Some((major, rc)) => (major, Some(rc.strip_prefix("rc").ok_or_else(bad)?)),
        None => (body, None),
    };
    Ok(VersionLabel {
        major: positive(major).ok_or_else(bad)?,
        rc: match rc {
            Some(rc) => Some(positive(rc).ok_or_else(bad)?),
            None => None,
        },
    })
}

impl FromStr for VersionLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_version_label(s)
    }
}

/// A project author as listed in `project.yaml`, written
/// `kind:responsibility:Display Name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AuthorRef {
    pub kind: AuthorKind,
    pub responsibility: Responsibility,
    pub name: String,
}

impl AuthorRef {
    pub fn new(kind: AuthorKind, responsibility: Responsibility, name: impl Into<String>) -> Self {
        AuthorRef {
            kind,
            responsibility,
            name: name.into(),
        }
    }

    /// File-name friendly form of the display name.
    pub fn slug(&self) -> String {
        slugify(&self.name)
    }
}

pub fn slugify(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "anon".into()
    } else {
        out
    }
}

impl fmt::Display for AuthorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind.as_str(), self.responsibility.as_str(), self.name)
    }
}

impl FromStr for AuthorRef {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let (Some(kind), Some(resp), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse("author", format!("{s:?} is not kind:responsibility:name")));
        };
        if name.trim().is_empty() {
            return Err(Error::parse("author", "empty name"));
        }
        Ok(AuthorRef {
            kind: AuthorKind::parse(kind)?,
            responsibility: Responsibility::parse(resp)?,
            name: name.trim().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectMetadata {
    pub title: String,
    #[serde(serialize_with = "display")]
    pub version_label: VersionLabel,
    #[serde(serialize_with = "display_list")]
    pub authors: Vec<AuthorRef>,
    pub bundle_root: Option<Digest>,
    pub ipfs_cid: Option<String>,
    pub arxiv_id: Option<String>,
    pub swarm_hash: Option<Digest>,
    pub stamp_duration_days: u32,
    pub licenses: Vec<String>,
    pub tags: Vec<String>,
    pub build_engine: String,
    pub build_cmd: String,
    pub container_digest: String,
    /// Push target specs, see `publish::PushTarget`.
    pub push_targets: Vec<String>,
    #[serde(skip)]
    pub extra: Vec<(String, yaml::Value)>,
}

fn display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_list<T: fmt::Display, S: serde::Serializer>(v: &[T], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

impl Default for ProjectMetadata {
    fn default() -> Self {
        ProjectMetadata {
            title: String::new(),
            version_label: VersionLabel {
                major: 1,
                rc: Some(1),
            },
            authors: Vec::new(),
            bundle_root: None,
            ipfs_cid: None,
            arxiv_id: None,
            swarm_hash: None,
            stamp_duration_days: DEFAULT_STAMP_DAYS,
            licenses: vec!["CC0-1.0".into()],
            tags: Vec::new(),
            build_engine: String::new(),
            build_cmd: String::new(),
            container_digest: String::new(),
            push_targets: Vec::new(),
            extra: Vec::new(),
        }
    }
}

impl ProjectMetadata {
    pub fn from_yaml(text: &str) -> Result<Self> {
        let mut m = ProjectMetadata::default();
        let mut have_version = false;
        for (key, value) in yaml::parse(text)? {
            let scalar = |v: &yaml::Value| match v {
                yaml::Value::Scalar(s) => Ok(s.clone()),
                yaml::Value::List(_) => Err(Error::parse(PROJECT_FILE, format!("{key} must be a scalar"))),
            };
            let list = |v: &yaml::Value| match v {
                yaml::Value::List(items) => Ok(items.clone()),
                yaml::Value::Scalar(s) if s.is_empty() => Ok(Vec::new()),
                yaml::Value::Scalar(_) => Err(Error::parse(PROJECT_FILE, format!("{key} must be a list"))),
            };
            let optional = |v: &yaml::Value| scalar(v).map(|s| if s.is_empty() { None } else { Some(s) });
            match key.as_str() {
                "title" => m.title = scalar(&value)?,
                "version_label" => {
                    m.version_label = parse_version_label(&scalar(&value)?)?;
                    have_version = true;
                }
                "authors" => {
                    m.authors = list(&value)?.iter().map(|s| s.parse()).collect::<Result<_>>()?;
                }
                "bundle_root" => m.bundle_root = optional(&value)?.map(|s| Digest::from_hex(&s)).transpose()?,
                "swarm_hash" => m.swarm_hash = optional(&value)?.map(|s| Digest::from_hex(&s)).transpose()?,
                "ipfs_cid" => m.ipfs_cid = optional(&value)?,
                "arxiv_id" => m.arxiv_id = optional(&value)?,
                "stamp_duration_days" => {
                    let s = scalar(&value)?;
                    m.stamp_duration_days = s
                        .parse()
                        .map_err(|_| Error::parse(PROJECT_FILE, format!("stamp_duration_days {s:?}")))?;
                }
                "licenses" => m.licenses = list(&value)?,
                "tags" => m.tags = list(&value)?,
                "build_engine" => m.build_engine = scalar(&value)?,
                "build_cmd" => m.build_cmd = scalar(&value)?,
                "container_digest" => m.container_digest = scalar(&value)?,
                "push_targets" => m.push_targets = list(&value)?,
                _ => m.extra.push((key, value)),
            }
        }
        if !have_version {
            return Err(Error::parse(PROJECT_FILE, "missing version_label"));
        }
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        if self.stamp_duration_days == 0 {
            return Err(Error::invalid("stamp_duration_days", "must be positive"));
        }
        Ok(())
    }

    pub fn to_yaml(&self) -> String {
        use yaml::Value::{List, Scalar};
        let opt = |o: Option<String>| o.unwrap_or_default();
        let mut doc: yaml::Document = vec![
            ("title".into(), Scalar(self.title.clone())),
            ("version_label".into(), Scalar(self.version_label.to_string())),
            ("authors".into(), List(self.authors.iter().map(|a| a.to_string()).collect())),
            ("bundle_root".into(), Scalar(opt(self.bundle_root.map(|d| d.to_hex())))),
            ("swarm_hash".into(), Scalar(opt(self.swarm_hash.map(|d| d.to_hex())))),
            ("ipfs_cid".into(), Scalar(opt(self.ipfs_cid.clone()))),
            ("arxiv_id".into(), Scalar(opt(self.arxiv_id.clone()))),
            ("stamp_duration_days".into(), Scalar(self.stamp_duration_days.to_string())),
            ("licenses".into(), List(self.licenses.clone())),
            ("tags".into(), List(self.tags.clone())),
            ("build_engine".into(), Scalar(self.build_engine.clone())),
            ("build_cmd".into(), Scalar(self.build_cmd.clone())),
            ("container_digest".into(), Scalar(self.container_digest.clone())),
            ("push_targets".into(), List(self.push_targets.clone())),
        ];
        doc.extend(self.extra.iter().cloned());
        let mut text = yaml::render(&doc);
        // Numbers read more naturally unquoted.
        text = text.replace(
            &format!("stamp_duration_days: \"{}\"", self.stamp_duration_days),
            &format!("stamp_duration_days: {}", self.stamp_duration_days),
        );
        text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImportLogEntry {
    pub timestamp: String,
    pub action: String,
    pub source: String,
    pub destination: String,
}

impl ImportLogEntry {
    pub fn parse_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::parse(IMPORT_LOG, format!("expected 4 fields: {line:?}")));
        }
        Ok(ImportLogEntry {
            timestamp: f[0].into(),
            action: f[1].into(),
            source: f[2].into(),
            destination: f[3].into(),
        })
    }
}

/// Append-only import log with non-decreasing timestamps.
pub struct ImportLog {
    path: PathBuf,
    last: Option<Timestamp>,
}

impl ImportLog {
    pub fn open(path: PathBuf) -> Result<Self> {
        let last = if path.exists() {
            read_import_log(&path)?
                .last()
                .map(|e| timefmt::parse(&e.timestamp))
                .transpose()?
        } else {
            None
        };
        Ok(ImportLog { path, last })
    }

    pub fn record(&mut self, action: &str, source: &str, destination: &str) -> Result<()> {
        let mut ts = timefmt::now();
        if let Some(last) = self.last {
            ts = ts.max(last);
        }
        self.last = Some(ts);
        let clean = |s: &str| s.replace(['\t', '\n'], " ");
        let line = format!(
            "{}\t{}\t{}\t{}\n",
            timefmt::render(&ts),
            clean(action),
            clean(source),
            clean(destination)
        );
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).at(&self.path)?;
        f.write_all(line.as_bytes()).at(&self.path)
    }
}

pub fn read_import_log(path: &Path) -> Result<Vec<ImportLogEntry>> {
    fs::read_to_string(path)
        .at(path)?
        .lines()
        .filter(|l| !l.is_empty())
        .map(ImportLogEntry::parse_line)
        .collect()
}

/// Handle to a project directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Project {
    pub root: PathBuf,
}

impl Project {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.join(PROJECT_FILE).is_file() {
            return Err(Error::NotFound(format!("{} has no {PROJECT_FILE}", root.display())));
        }
        Ok(Project { root })
    }

    pub fn src(&self) -> PathBuf {
        self.root.join("src")
    }
    pub fn fig_dir(&self) -> PathBuf {
        self.root.join("src").join("fig")
    }
    pub fn keys_dir(&self) -> PathBuf {
        self.root.join("keys")
    }
    pub fn out(&self) -> PathBuf {
        self.root.join("out")
    }
    pub fn bundles_dir(&self) -> PathBuf {
        self.out().join("bundles")
    }
    pub fn release_log(&self) -> PathBuf {
        self.out().join(RELEASE_LOG)
    }
    pub fn metadata_path(&self) -> PathBuf {
        self.root.join(PROJECT_FILE)
    }

    pub fn lock(&self) -> Result<ProjectLock> {
        ProjectLock::acquire(&self.root)
    }

    pub fn metadata(&self) -> Result<ProjectMetadata> {
        let p = self.metadata_path();
        ProjectMetadata::from_yaml(&fs::read_to_string(&p).at(&p)?)
    }

    pub fn save_metadata(&self, m: &ProjectMetadata) -> Result<()> {
        m.check()?;
        let p = self.metadata_path();
        let tmp = p.with_extension("yaml.tmp");
        fs::write(&tmp, m.to_yaml()).at(&tmp)?;
        fs::rename(&tmp, &p).at(&p)
    }

    /// Append one tab-separated line to `out/release.log`.
    pub fn append_release_log(&self, action: &str, detail: &str) -> Result<()> {
        let p = self.release_log();
        fs::create_dir_all(self.out()).at(&self.out())?;
        let mut f = OpenOptions::new().create(true).append(true).open(&p).at(&p)?;
        let line = format!(
            "{}\t{}\t{}\n",
            timefmt::render(&timefmt::now()),
            action,
            detail.replace(['\t', '\n'], " ")
        );
        f.write_all(line.as_bytes()).at(&p)
    }

    /// Screen a figure and add it to `src/fig/` under the project lock.
    pub fn fig_add(
        &self,
        file: &Path,
        source_description: &str,
        provider: &dyn figsafe::SafetyProvider,
    ) -> Result<figsafe::FigAddOutcome> {
        let _lock = self.lock()?;
        figsafe::add_figure(&self.fig_dir(), file, source_description, &Screener::new(provider, self.out()))
    }

    pub fn recheck(&self, provider: &dyn figsafe::SafetyProvider) -> Result<figsafe::RecheckReport> {
        figsafe::recheck_all(&self.root, &Screener::new(provider, self.out()))
    }

    /// Store publication identifiers. Existing different values are only
    /// replaced when `force` is set.
    pub fn record_publication_ids(
        &self,
        ids: &PublicationIds,
        force: bool,
    ) -> Result<ProjectMetadata> {
        let mut m = self.metadata()?;
        let swarm = ids.swarm_hash.as_deref().map(Digest::from_hex).transpose()?;
        fn set<T: PartialEq + Clone + fmt::Debug>(
            field: &str,
            slot: &mut Option<T>,
            new: Option<T>,
            force: bool,
        ) -> Result<()> {
            if let Some(new) = new {
                match slot {
                    Some(old) if *old != new && !force => {
                        return Err(Error::invalid(field, format!("already set to {old:?}; use force to overwrite")))
                    }
                    _ => *slot = Some(new),
                }
            }
            Ok(())
        }
        set("swarm_hash", &mut m.swarm_hash, swarm, force)?;
        set("ipfs_cid", &mut m.ipfs_cid, ids.ipfs_cid.clone(), force)?;
        set("arxiv_id", &mut m.arxiv_id, ids.arxiv_id.clone(), force)?;
        set("bundle_root", &mut m.bundle_root, ids.bundle_root, force)?;
        self.save_metadata(&m)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PublicationIds {
    pub swarm_hash: Option<String>,
    pub ipfs_cid: Option<String>,
    pub arxiv_id: Option<String>,
    pub bundle_root: Option<Digest>,
}

/// Checks layout, metadata, and figure sidecars. Empty means valid.
pub fn validate_project(dir: &Path) -> Vec<Violation> {
    let mut v = Vec::new();
    let push = |v: &mut Vec<Violation>, field: &str, rule: String| {
        v.push(Violation {
            field: field.into(),
            rule,
        })
    };
    let meta = dir.join(PROJECT_FILE);
    match fs::read_to_string(&meta) {
        Ok(text) => {
            if let Err(e) = ProjectMetadata::from_yaml(&text) {
                push(&mut v, PROJECT_FILE, e.to_string());
            }
        }
        Err(_) => push(&mut v, PROJECT_FILE, "missing".into()),
    }
    for d in REQUIRED_DIRS {
        if !dir.join(d).is_dir() {
            push(&mut v, d, "required directory missing".into());
        }
    }
    let fig = dir.join("src").join("fig");
    if let Ok(entries) = fs::read_dir(&fig) {
        let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        names.sort();
        for p in names {
            let is_json = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            if p.is_file() && !is_json && !figsafe::sidecar_path_for(&p).is_file() {
                let name = p.file_name().unwrap_or_default().to_string_lossy();
                push(&mut v, "src/fig", format!("{name} has no sidecar"));
            }
        }
    }
    v
}

fn is_import_figure(rel: &Path) -> bool {
    let ext = rel
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    if FIGURE_EXTENSIONS.contains(&ext.as_str()) {
        return true;
    }
    ext == "pdf"
        && rel.parent().is_some_and(|p| {
            p.components().any(|c| {
                c.as_os_str()
                    .to_str()
                    .is_some_and(|s| FIGURE_DIR_NAMES.contains(&s.to_ascii_lowercase().as_str()))
            })
        })
}

fn seed_files(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let dir = root.join(rel);
    let mut entries: Vec<_> = fs::read_dir(&dir).at(&dir)?.collect::<std::io::Result<_>>().at(&dir)?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let r = rel.join(e.file_name());
        let ft = e.file_type().at(&e.path())?;
        if ft.is_symlink() {
            return Err(Error::Symlink(e.path()));
        } else if ft.is_dir() {
            seed_files(root, &r, out)?;
        } else if ft.is_file() {
            out.push(r);
        }
    }
    Ok(())
}

/// Copy a legacy seed into a fresh project directory. Figures are screened
/// and moved into `src/fig/`; everything else keeps its relative path under
/// `src/`. The seed is never modified.
pub fn import_seed(
    seed_dir: &Path,
    dest: &Path,
    metadata_seed: ProjectMetadata,
    provider: &dyn figsafe::SafetyProvider,
) -> Result<Project> {
    if !seed_dir.is_dir() {
        return Err(Error::NotFound(format!("seed directory {}", seed_dir.display())));
    }
    if dest.exists() && fs::read_dir(dest).at(dest)?.next().is_some() {
        return Err(Error::invalid("destination", format!("{} is not empty", dest.display())));
    }
    fs::create_dir_all(dest).at(dest)?;
    let project = Project {
        root: dest.to_path_buf(),
    };
    let _lock = project.lock()?;
    let mut log = ImportLog::open(dest.join(IMPORT_LOG))?;
    for d in REQUIRED_DIRS {
        let p = dest.join(d);
        fs::create_dir_all(&p).at(&p)?;
        log.record("mkdir", "-", d)?;
    }

    let mut files = Vec::new();
    seed_files(seed_dir, Path::new(""), &mut files)?;
    let figures: Vec<&PathBuf> = files.iter().filter(|f| is_import_figure(f)).collect();
    let screener = Screener::new(provider, project.out());
    let display = |p: &Path| p.to_string_lossy().replace('\\', "/");

    for rel in &files {
        let src = seed_dir.join(rel);
        if is_import_figure(rel) {
            let desc = format!("imported from seed: {}", display(rel));
            match figsafe::add_figure(&project.fig_dir(), &src, &desc, &screener) {
                Ok(o) => {
                    let to = o.figure_path.strip_prefix(dest).unwrap_or(&o.figure_path);
                    log.record("figure", &display(rel), &display(to))?;
                }
                Err(e) => {
                    log.record(&format!("refused: {e}"), &display(rel), "-")?;
                    return Err(e);
                }
            }
            continue;
        }
        // A seed-side sidecar next to a figure is kept, but renamed so the
        // generated sidecar stays authoritative.
        let is_seed_sidecar = rel.extension().is_some_and(|e| e == "json")
            && figures
                .iter()
                .any(|f| f.parent() == rel.parent() && f.file_stem() == rel.file_stem());
        let to_rel = if is_seed_sidecar {
            let stem = rel.file_stem().unwrap_or_default().to_string_lossy();
            PathBuf::from("src/fig").join(format!("{stem}.seed.json"))
        } else if rel.starts_with("fig") {
            PathBuf::from("src/seed-fig").join(rel.strip_prefix("fig").unwrap_or(rel))
        } else {
            Path::new("src").join(rel)
        };
        let to = dest.join(&to_rel);
        if to.exists() {
            return Err(Error::invalid("import", format!("{} would be overwritten", display(&to_rel))));
        }
        if let Some(parent) = to.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        fs::copy(&src, &to).at(&src)?;
        log.record("copy", &display(rel), &display(&to_rel))?;
    }

    let mut meta = metadata_seed;
    if meta.title.is_empty() {
        meta.title = seed_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    project.save_metadata(&meta)?;
    log.record("write", "-", PROJECT_FILE)?;
    Ok(project)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::figsafe::StubProvider;
    use proptest::prelude::*;

    #[test]
    fn version_labels() {
        assert_eq!(parse_version_label("v4.rc3").unwrap(), VersionLabel { major: 4, rc: Some(3) });
        assert_eq!(parse_version_label("v1").unwrap(), VersionLabel { major: 1, rc: None });
        for bad in ["4.rc3", "v", "v0", "v4.rc", "v4.rc0", "v4.3", "V4", "v04", "v4.rc3.x", " v4"] {
            assert!(parse_version_label(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn version_label_round_trip(major in 1u32..100_000, rc in proptest::option::of(1u32..1000)) {
            let label = VersionLabel { major, rc };
            prop_assert_eq!(parse_version_label(&label.to_string()).unwrap(), label);
        }
    }

    #[test]
    fn author_ref_round_trip() {
        let a: AuthorRef = "ai:contributor:Claude Sonnet 4.6".parse().unwrap();
        assert_eq!(a.kind, AuthorKind::Ai);
        assert_eq!(a.to_string(), "ai:contributor:Claude Sonnet 4.6");
        assert_eq!(a.slug(), "claude-sonnet-4-6");
        assert!("robot:contributor:X".parse::<AuthorRef>().is_err());
    }

    #[test]
    fn metadata_yaml_round_trip() {
        let m = ProjectMetadata {
            title: "Archive: a test".into(),
            version_label: parse_version_label("v4.rc3").unwrap(),
            authors: vec!["human:corresponding:Ann Author".parse().unwrap()],
            swarm_hash: Some(Digest::of(b"x")),
            tags: vec!["cs.DL".into()],
            extra: vec![("custom".into(), yaml::Value::Scalar("kept".into()))],
            ..Default::default()
        };
        let text = m.to_yaml();
        assert!(text.contains("stamp_duration_days: 730\n"));
        assert_eq!(ProjectMetadata::from_yaml(&text).unwrap(), m);
    }

    #[test]
    fn metadata_rejects_bad_values() {
        assert!(ProjectMetadata::from_yaml("title: x\n").is_err());
        assert!(ProjectMetadata::from_yaml("version_label: v1\nbundle_root: abc\n").is_err());
        assert!(ProjectMetadata::from_yaml("version_label: v1\nstamp_duration_days: 0\n").is_err());
    }

    fn seed(files: &[(&str, &[u8])]) -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        for (p, b) in files {
            let full = d.path().join(p);
            fs::create_dir_all(full.parent().unwrap()).unwrap();
            fs::write(full, b).unwrap();
        }
        d
    }

    #[test]
    fn import_tex_and_bib() {
        let s = seed(&[("paper.tex", b"\\documentclass{article}"), ("refs.bib", b"@misc{x}")]);
        let work = tempfile::tempdir().unwrap();
        let dest = work.path().join("proj");
        let p = import_seed(s.path(), &dest, ProjectMetadata::default(), &StubProvider).unwrap();
        assert_eq!(fs::read(p.src().join("paper.tex")).unwrap(), b"\\documentclass{article}");
        assert!(p.src().join("refs.bib").is_file());
        assert_eq!(fs::read_dir(p.fig_dir()).unwrap().count(), 0);
        let log = read_import_log(&dest.join(IMPORT_LOG)).unwrap();
        assert_eq!(log.iter().filter(|e| e.action == "copy").count(), 2);
        assert!(validate_project(&dest).is_empty());
        assert!(!dest.join(crate::lock::LOCK_FILE).exists());
    }

    #[test]
    fn import_empty_seed_gives_skeleton() {
        let s = seed(&[]);
        let work = tempfile::tempdir().unwrap();
        let dest = work.path().join("proj");
        import_seed(s.path(), &dest, ProjectMetadata::default(), &StubProvider).unwrap();
        assert!(validate_project(&dest).is_empty());
        let log = read_import_log(&dest.join(IMPORT_LOG)).unwrap();
        assert_eq!(log.iter().filter(|e| e.action == "mkdir").count(), REQUIRED_DIRS.len());
    }

    #[test]
    fn import_refuses_non_empty_dest() {
        let s = seed(&[("a.tex", b"a")]);
        let dest = seed(&[("existing", b"x")]);
        assert!(import_seed(s.path(), dest.path(), ProjectMetadata::default(), &StubProvider).is_err());
    }

    #[test]
    fn import_moves_figures_and_keeps_seed_sidecars() {
        let s = seed(&[
            ("main.tex", b"x"),
            ("figs/plot.svg", b"<svg/>"),
            ("figs/plot.json", b"{\"note\":1}"),
            ("figs/chart.pdf", b"%PDF"),
            ("docs/manual.pdf", b"%PDF-doc"),
        ]);
        let work = tempfile::tempdir().unwrap();
        let dest = work.path().join("proj");
        let p = import_seed(s.path(), &dest, ProjectMetadata::default(), &StubProvider).unwrap();
        assert!(p.fig_dir().join("plot.svg").is_file());
        assert!(p.fig_dir().join("plot.json").is_file());
        assert!(p.fig_dir().join("chart.json").is_file());
        assert_eq!(fs::read(p.fig_dir().join("plot.seed.json")).unwrap(), b"{\"note\":1}");
        assert!(p.src().join("docs/manual.pdf").is_file());
        assert!(validate_project(&dest).is_empty(), "{:?}", validate_project(&dest));
    }

    #[test]
    fn validate_reports_missing_keys_and_orphans() {
        let s = seed(&[]);
        let work = tempfile::tempdir().unwrap();
        let dest = work.path().join("proj");
        import_seed(s.path(), &dest, ProjectMetadata::default(), &StubProvider).unwrap();
        fs::remove_dir(dest.join("keys")).unwrap();
        let v = validate_project(&dest);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "keys");
        fs::create_dir(dest.join("keys")).unwrap();
        fs::write(dest.join("src/fig/foo.png"), b"x").unwrap();
        let v = validate_project(&dest);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("foo.png"));
    }

    #[test]
    fn record_ids_requires_force_to_overwrite() {
        let s = seed(&[]);
        let work = tempfile::tempdir().unwrap();
        let p = import_seed(s.path(), &work.path().join("p"), ProjectMetadata::default(), &StubProvider).unwrap();
        let before = p.metadata().unwrap();
        assert_eq!(p.record_publication_ids(&PublicationIds::default(), false).unwrap(), before);

        let hash = "e7acc972f1a142903dc22f1bdc5c78cec3ca9529754d843cb23fe7c8eb0e9176";
        let ids = PublicationIds {
            swarm_hash: Some(hash.into()),
            ..Default::default()
        };
        let m = p.record_publication_ids(&ids, false).unwrap();
        assert_eq!(m.swarm_hash.unwrap().to_hex(), hash);
        assert!(fs::read_to_string(p.metadata_path()).unwrap().contains(hash));

        let other = PublicationIds {
            swarm_hash: Some(Digest::of(b"other").to_hex()),
            ..Default::default()
        };
        assert!(p.record_publication_ids(&other, false).is_err());
        assert!(p.record_publication_ids(&other, true).is_ok());
        let bad = PublicationIds {
            swarm_hash: Some("xyz".into()),
            ..Default::default()
        };
        assert!(p.record_publication_ids(&bad, true).is_err());
    }
}
