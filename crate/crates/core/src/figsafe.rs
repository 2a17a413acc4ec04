//! Figure classification and the content-safety gate.
//!
//! Vector formats and small or extreme-aspect rasters are exempt research
//! figures. Every other raster is photographic and must pass the configured
//! provider. The built-in stub has no hash list, so it refuses every
//! photographic raster.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::digest::Digest;
use crate::error::{Error, IoContext, Result};
use crate::timefmt::{self, Timestamp};

pub const VECTOR_EXTENSIONS: [&str; 5] = ["svg", "pdf", "eps", "emf", "wmf"];
pub const RASTER_EXTENSIONS: [&str; 8] = ["png", "jpg", "jpeg", "gif", "webp", "tif", "tiff", "bmp"];

/// Rasters strictly smaller than this on both sides are exempt.
pub const SMALL_RASTER_LIMIT: u32 = 200;
/// Rasters whose long/short side ratio strictly exceeds this are exempt.
pub const MAX_PHOTO_ASPECT: u32 = 5;

pub const ENV_PROVIDER: &str = "CLAWXIV_SAFETY_PROVIDER";
pub const ENV_LIST: &str = "CLAWXIV_SAFETY_LIST";
pub const REFUSAL_LOG: &str = "safety-refusals.log";
pub const REPORT_DIR: &str = "safety-reports";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FigureClass {
    Vector,
    SmallRaster,
    ExtremeAspect,
    Photographic,
}

impl FigureClass {
    pub fn is_exempt(self) -> bool {
        self != FigureClass::Photographic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    PassExempt,
    PassProvider,
    RefusedStub,
    MatchedHashList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub value: VerdictKind,
    pub provider: String,
    pub list_version: String,
}

impl SafetyVerdict {
    pub fn passes(&self) -> bool {
        matches!(self.value, VerdictKind::PassExempt | VerdictKind::PassProvider)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureSidecar {
    pub figure_name: String,
    #[serde(with = "timefmt::serde_secs")]
    pub added_at: Timestamp,
    pub source_description: String,
    pub sha256: Digest,
    pub width: u32,
    pub height: u32,
    pub figure_class: FigureClass,
    pub verdict: SafetyVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureInfo {
    pub class: FigureClass,
    pub width: u32,
    pub height: u32,
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

pub fn is_vector_ext(path: &Path) -> bool {
    VECTOR_EXTENSIONS.contains(&extension(path).as_str())
}

pub fn is_raster_ext(path: &Path) -> bool {
    RASTER_EXTENSIONS.contains(&extension(path).as_str())
}

/// Classify a raster purely by its pixel dimensions.
pub fn classify_dimensions(width: u32, height: u32) -> FigureClass {
    if width < SMALL_RASTER_LIMIT && height < SMALL_RASTER_LIMIT {
        return FigureClass::SmallRaster;
    }
    let (long, short) = (width.max(height) as u64, width.min(height) as u64);
    // long / short > 5, without division; a zero side counts as extreme.
    if long > short * MAX_PHOTO_ASPECT as u64 {
        FigureClass::ExtremeAspect
    } else {
        FigureClass::Photographic
    }
}

pub fn inspect_figure(path: &Path) -> Result<FigureInfo> {
    if is_vector_ext(path) {
        if !path.is_file() {
            return Err(Error::NotFound(path.display().to_string()));
        }
        return Ok(FigureInfo {
            class: FigureClass::Vector,
            width: 0,
            height: 0,
        });
    }
    let (width, height) = image::ImageReader::open(path)
        .at(path)?
        .with_guessed_format()
        .at(path)?
        .into_dimensions()
        .map_err(|e| Error::Undecodable(format!("{}: {e}", path.display())))?;
    Ok(FigureInfo {
        class: classify_dimensions(width, height),
        width,
        height,
    })
}

pub fn classify_figure(path: &Path) -> Result<FigureClass> {
    inspect_figure(path).map(|i| i.class)
}

/// 64-bit difference hash: grayscale, resized to 9×8, one bit per
/// horizontally adjacent pixel pair (set when the left pixel is brighter).
pub fn difference_hash(path: &Path) -> Result<u64> {
    let img = image::ImageReader::open(path)
        .at(path)?
        .with_guessed_format()
        .at(path)?
        .decode()
        .map_err(|e| Error::Undecodable(format!("{}: {e}", path.display())))?;
    let small = image::imageops::resize(&img.to_luma8(), 9, 8, FilterType::Triangle);
    let mut hash = 0u64;
    for y in 0..8 {
        for x in 0..8 {
            let left = small.get_pixel(x, y)[0];
            let right = small.get_pixel(x + 1, y)[0];
            hash = (hash << 1) | u64::from(left > right);
        }
    }
    Ok(hash)
}

/// A perceptual-hash comparison service.
pub trait SafetyProvider: Send + Sync {
    fn name(&self) -> &str;
    fn list_version(&self) -> &str;
    /// `None` means the provider has no list and cannot clear anything.
    fn matches(&self, path: &Path) -> Result<Option<bool>>;
}

/// Placeholder used until a real hash-list provider is configured.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubProvider;

impl SafetyProvider for StubProvider {
    fn name(&self) -> &str {
        "stub"
    }
    fn list_version(&self) -> &str {
        ""
    }
    fn matches(&self, _path: &Path) -> Result<Option<bool>> {
        Ok(None)
    }
}

/// Matches difference hashes against a local list file (one 16-hex-digit
/// hash per line, `#` comments; an optional `# version: X` header names the
/// list version).
#[derive(Debug, Clone)]
pub struct HashListProvider {
    hashes: Vec<u64>,
    version: String,
}

impl HashListProvider {
    pub fn new(hashes: Vec<u64>, version: impl Into<String>) -> Self {
        HashListProvider {
            hashes,
            version: version.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ProviderUnavailable(format!("hash list {}: {e}", path.display())))?;
        let mut version = None;
        let mut hashes = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version.get_or_insert_with(|| v.trim().to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if line.len() != 16 {
                return Err(Error::parse("hash list", format!("line {}: expected 16 hex digits", n + 1)));
            }
            let h = u64::from_str_radix(line, 16)
                .map_err(|e| Error::parse("hash list", format!("line {}: {e}", n + 1)))?;
            hashes.push(h);
        }
        let version = version.unwrap_or_else(|| format!("sha256:{}", &Digest::of(text.as_bytes()).to_hex()[..12]));
        Ok(HashListProvider { hashes, version })
    }
}

impl SafetyProvider for HashListProvider {
    fn name(&self) -> &str {
        "hashlist"
    }
    fn list_version(&self) -> &str {
        &self.version
    }
    fn matches(&self, path: &Path) -> Result<Option<bool>> {
        let h = difference_hash(path)?;
        Ok(Some(self.hashes.contains(&h)))
    }
}

/// Select a provider from `CLAWXIV_SAFETY_PROVIDER` (default `stub`).
pub fn provider_from_env() -> Result<Box<dyn SafetyProvider>> {
    let name = std::env::var(ENV_PROVIDER).unwrap_or_else(|_| "stub".into());
    match name.as_str() {
        "" | "stub" => Ok(Box::new(StubProvider)),
        "hashlist" => {
            let list = std::env::var(ENV_LIST)
                .map_err(|_| Error::ProviderUnavailable(format!("{ENV_LIST} is not set")))?;
            Ok(Box::new(HashListProvider::load(Path::new(&list))?))
        }
        other => Err(Error::ProviderUnavailable(format!("unknown provider {other:?}"))),
    }
}

/// A provider plus an optional `out/` directory that receives the refusal
/// log and report records. Without a sink, checks are read-only.
pub struct Screener<'a> {
    pub provider: &'a dyn SafetyProvider,
    pub sink: Option<PathBuf>,
}

impl<'a> Screener<'a> {
    pub fn new(provider: &'a dyn SafetyProvider, out_dir: impl Into<PathBuf>) -> Self {
        Screener {
            provider,
            sink: Some(out_dir.into()),
        }
    }

    pub fn read_only(provider: &'a dyn SafetyProvider) -> Self {
        Screener { provider, sink: None }
    }

    fn log_refusal(&self, verdict: &SafetyVerdict, sha: &Digest, file: &Path) -> Result<()> {
        let Some(out) = &self.sink else { return Ok(()) };
        fs::create_dir_all(out).at(out)?;
        let log = out.join(REFUSAL_LOG);
        let line = format!(
            "{}\t{:?}\t{}\t{}\t{}\n",
            timefmt::render(&timefmt::now()),
            verdict.value,
            sha,
            file.display(),
            verdict.provider
        );
        let mut f = OpenOptions::new().create(true).append(true).open(&log).at(&log)?;
        f.write_all(line.as_bytes()).at(&log)
    }

    fn emit_report(&self, verdict: &SafetyVerdict, sha: &Digest, file: &Path) -> Result<Option<PathBuf>> {
        let Some(out) = &self.sink else { return Ok(None) };
        let dir = out.join(REPORT_DIR);
        fs::create_dir_all(&dir).at(&dir)?;
        let record = serde_json::json!({
            "sha256": sha.to_hex(),
            "file": file.display().to_string(),
            "provider": verdict.provider,
            "list_version": verdict.list_version,
            "reported_at": timefmt::render(&timefmt::now()),
        });
        let path = dir.join(format!("{}.json", sha.to_hex()));
        fs::write(&path, canonical::encode_value(&record)?).at(&path)?;
        Ok(Some(path))
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub info: FigureInfo,
    pub sha256: Digest,
    pub verdict: SafetyVerdict,
}

/// Classify and screen one file. Refusals are appended to the refusal log
/// when the screener has a sink.
pub fn safety_check(file: &Path, screener: &Screener<'_>) -> Result<CheckOutcome> {
    let bytes = fs::read(file).at(file)?;
    let sha256 = Digest::of(&bytes);
    let info = inspect_figure(file)?;
    let provider = screener.provider;
    let verdict_of = |value| SafetyVerdict {
        value,
        provider: provider.name().to_string(),
        list_version: provider.list_version().to_string(),
    };
    let verdict = if info.class.is_exempt() {
        verdict_of(VerdictKind::PassExempt)
    } else {
        match provider.matches(file)? {
            None => verdict_of(VerdictKind::RefusedStub),
            Some(true) => verdict_of(VerdictKind::MatchedHashList),
            Some(false) => verdict_of(VerdictKind::PassProvider),
        }
    };
    if !verdict.passes() {
        screener.log_refusal(&verdict, &sha256, file)?;
    }
    Ok(CheckOutcome { info, sha256, verdict })
}

pub fn sidecar_path_for(figure: &Path) -> PathBuf {
    figure.with_extension("json")
}

#[derive(Debug, Clone, Serialize)]
pub struct FigAddOutcome {
    pub figure_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub verdict: SafetyVerdict,
    /// False when an identical figure was already present.
    pub written: bool,
}

/// Screen `file` and, if it passes, copy it into `fig_dir` with a
/// provenance sidecar. The caller holds the project lock.
pub(crate) fn add_figure(
    fig_dir: &Path,
    file: &Path,
    source_description: &str,
    screener: &Screener<'_>,
) -> Result<FigAddOutcome> {
    let name = file
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::NonUtf8Path(file.to_path_buf()))?
        .to_string();
    if extension(file) == "json" {
        return Err(Error::invalid("figure", "json files are reserved for sidecars"));
    }
    let dest = fig_dir.join(&name);
    let sidecar = sidecar_path_for(&dest);
    let bytes = fs::read(file).at(file)?;

    if dest.exists() {
        let existing = fs::read(&dest).at(&dest)?;
        if existing != bytes {
            return Err(Error::invalid("figure", format!("{name} already exists with different content")));
        }
        if sidecar.is_file() {
            let sc: FigureSidecar = serde_json::from_slice(&fs::read(&sidecar).at(&sidecar)?)
                .map_err(|e| Error::parse(sidecar.display().to_string(), e.to_string()))?;
            return Ok(FigAddOutcome {
                figure_path: dest,
                sidecar_path: sidecar,
                verdict: sc.verdict,
                written: false,
            });
        }
    } else if sidecar.exists() {
        return Err(Error::invalid(
            "figure",
            format!("{} already belongs to another figure", sidecar.display()),
        ));
    }

    let outcome = safety_check(file, screener)?;
    if !outcome.verdict.passes() {
        return Err(Error::SafetyRefusal(format!(
            "{name} ({:?}, {:?}, sha256 {})",
            outcome.info.class, outcome.verdict.value, outcome.sha256
        )));
    }
    fs::create_dir_all(fig_dir).at(fig_dir)?;
    if !dest.exists() {
        fs::write(&dest, &bytes).at(&dest)?;
    }
    let record = FigureSidecar {
        figure_name: name,
        added_at: timefmt::now(),
        source_description: source_description.to_string(),
        sha256: outcome.sha256,
        width: outcome.info.width,
        height: outcome.info.height,
        figure_class: outcome.info.class,
        verdict: outcome.verdict.clone(),
    };
    fs::write(&sidecar, canonical::to_canonical_bytes(&record)?).at(&sidecar)?;
    Ok(FigAddOutcome {
        figure_path: dest,
        sidecar_path: sidecar,
        verdict: outcome.verdict,
        written: true,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RecheckEntry {
    pub path: String,
    pub sha256: Option<Digest>,
    pub class: Option<FigureClass>,
    pub verdict: Option<SafetyVerdict>,
    pub error: Option<String>,
}

impl RecheckEntry {
    pub fn is_blocking(&self) -> bool {
        match &self.verdict {
            Some(v) => !v.passes(),
            None => true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RecheckReport {
    pub entries: Vec<RecheckEntry>,
    pub blocking: bool,
    pub reports_emitted: Vec<PathBuf>,
}

impl RecheckReport {
    pub fn blocking_paths(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.is_blocking())
            .map(|e| e.path.as_str())
            .collect()
    }
}

/// Re-screen every non-sidecar file under `<target>/src/fig/`, including
/// files that never went through [`add_figure`]. Any refusal, match, or
/// unreadable file makes the report blocking.
pub fn recheck_all(target: &Path, screener: &Screener<'_>) -> Result<RecheckReport> {
    if !target.is_dir() {
        return Err(Error::NotFound(target.display().to_string()));
    }
    let fig_dir = target.join("src").join("fig");
    let mut files = Vec::new();
    if fig_dir.is_dir() {
        collect(&fig_dir, &mut files)?;
    }
    files.sort();
    let mut report = RecheckReport::default();
    for file in files {
        let rel = file
            .strip_prefix(target)
            .unwrap_or(&file)
            .to_string_lossy()
            .replace('\\', "/");
        let entry = match safety_check(&file, screener) {
            Ok(o) => {
                if o.verdict.value == VerdictKind::MatchedHashList {
                    if let Some(p) = screener.emit_report(&o.verdict, &o.sha256, &file)? {
                        report.reports_emitted.push(p);
                    }
                }
                RecheckEntry {
                    path: rel,
                    sha256: Some(o.sha256),
                    class: Some(o.info.class),
                    verdict: Some(o.verdict),
                    error: None,
                }
            }
            Err(e) => RecheckEntry {
                path: rel,
                sha256: fs::read(&file).ok().map(|b| Digest::of(&b)),
                class: None,
                verdict: None,
                error: Some(e.to_string()),
            },
        };
        report.blocking |= entry.is_blocking();
        report.entries.push(entry);
    }
    Ok(report)
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for dent in fs::read_dir(dir).at(dir)? {
        let path = dent.at(dir)?.path();
        let ft = fs::symlink_metadata(&path).at(&path)?.file_type();
        if ft.is_dir() {
            collect(&path, out)?;
        } else if extension(&path) != "json" {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Rgb};

    fn png(dir: &Path, name: &str, w: u32, h: u32) -> PathBuf {
        let img = ImageBuffer::from_fn(w, h, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, ((x ^ y) % 256) as u8]));
        let p = dir.join(name);
        img.save(&p).unwrap();
        p
    }

    #[test]
    fn dimension_table() {
        assert_eq!(classify_dimensions(150, 150), FigureClass::SmallRaster);
        assert_eq!(classify_dimensions(199, 199), FigureClass::SmallRaster);
        assert_eq!(classify_dimensions(200, 200), FigureClass::Photographic);
        assert_eq!(classify_dimensions(199, 200), FigureClass::Photographic);
        assert_eq!(classify_dimensions(1200, 150), FigureClass::ExtremeAspect);
        assert_eq!(classify_dimensions(1001, 200), FigureClass::ExtremeAspect);
        assert_eq!(classify_dimensions(1000, 200), FigureClass::Photographic);
        assert_eq!(classify_dimensions(200, 1001), FigureClass::ExtremeAspect);
        assert_eq!(classify_dimensions(640, 480), FigureClass::Photographic);
    }

    #[test]
    fn vector_by_extension_regardless_of_content() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["plot.svg", "a.PDF", "b.eps", "c.Emf", "d.wmf"] {
            let p = dir.path().join(name);
            fs::write(&p, b"\x89PNG definitely raster bytes").unwrap();
            assert_eq!(classify_figure(&p).unwrap(), FigureClass::Vector, "{name}");
        }
    }

    #[test]
    fn undecodable_raster_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        fs::write(&p, b"not an image").unwrap();
        let err = classify_figure(&p).unwrap_err();
        assert_eq!(err.category(), crate::Category::Safety);
    }

    #[test]
    fn stub_refuses_photographic_and_logs_once() {
        let dir = tempfile::tempdir().unwrap();
        let photo = png(dir.path(), "photo.png", 640, 480);
        let out = dir.path().join("out");
        let stub = StubProvider;
        let s = Screener::new(&stub, &out);
        let o = safety_check(&photo, &s).unwrap();
        assert_eq!(o.verdict.value, VerdictKind::RefusedStub);
        assert_eq!(o.verdict.provider, "stub");
        let log = fs::read_to_string(out.join(REFUSAL_LOG)).unwrap();
        assert_eq!(log.lines().count(), 1);
        assert!(log.contains(&o.sha256.to_hex()));
    }

    #[test]
    fn exempt_figures_pass_under_stub() {
        let dir = tempfile::tempdir().unwrap();
        let stub = StubProvider;
        let s = Screener::read_only(&stub);
        let small = png(dir.path(), "small.png", 150, 150);
        let wide = png(dir.path(), "wide.png", 1200, 150);
        for p in [small, wide] {
            assert_eq!(safety_check(&p, &s).unwrap().verdict.value, VerdictKind::PassExempt);
        }
    }

    #[test]
    fn hash_list_provider_matches_enlisted_hash() {
        let dir = tempfile::tempdir().unwrap();
        let photo = png(dir.path(), "photo.png", 300, 300);
        let other = dir.path().join("other.png");
        ImageBuffer::from_fn(300, 300, |x, _| Rgb([255 - (x % 256) as u8, 0, 0])).save(&other).unwrap();
        let h = difference_hash(&photo).unwrap();
        assert_ne!(h, difference_hash(&other).unwrap());
        let list = dir.path().join("list.txt");
        fs::write(&list, format!("# version: test-7\n{h:016x}\n")).unwrap();
        let provider = HashListProvider::load(&list).unwrap();
        assert_eq!(provider.list_version(), "test-7");
        let s = Screener::read_only(&provider);
        let v = safety_check(&photo, &s).unwrap().verdict;
        assert_eq!(v.value, VerdictKind::MatchedHashList);
        assert_eq!(v.list_version, "test-7");
        assert_eq!(safety_check(&other, &s).unwrap().verdict.value, VerdictKind::PassProvider);
    }

    #[test]
    fn missing_list_is_provider_unavailable() {
        let err = HashListProvider::load(Path::new("/nonexistent/list")).unwrap_err();
        assert!(matches!(err, Error::ProviderUnavailable(_)));
    }

    #[test]
    fn add_figure_refuses_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let fig = dir.path().join("fig");
        let out = dir.path().join("out");
        let stub = StubProvider;
        let s = Screener::new(&stub, &out);

        let svg = dir.path().join("plot.svg");
        fs::write(&svg, "<svg/>").unwrap();
        let first = add_figure(&fig, &svg, "drawn by hand", &s).unwrap();
        assert!(first.written);
        assert_eq!(first.verdict.value, VerdictKind::PassExempt);
        let sidecar_bytes = fs::read(&first.sidecar_path).unwrap();
        let again = add_figure(&fig, &svg, "drawn by hand", &s).unwrap();
        assert!(!again.written);
        assert_eq!(fs::read(&again.sidecar_path).unwrap(), sidecar_bytes);

        fs::write(&svg, "<svg>changed</svg>").unwrap();
        assert!(add_figure(&fig, &svg, "", &s).is_err());

        let photo = png(dir.path(), "photo.png", 640, 480);
        let err = add_figure(&fig, &photo, "", &s).unwrap_err();
        assert!(matches!(err, Error::SafetyRefusal(_)));
        assert!(!fig.join("photo.png").exists());
        assert!(!fig.join("photo.json").exists());
        assert_eq!(fs::read_to_string(out.join(REFUSAL_LOG)).unwrap().lines().count(), 1);
    }

    #[test]
    fn recheck_blocks_on_bypassed_photo() {
        let dir = tempfile::tempdir().unwrap();
        let fig = dir.path().join("src/fig");
        fs::create_dir_all(&fig).unwrap();
        let stub = StubProvider;
        let s = Screener::read_only(&stub);
        assert!(!recheck_all(dir.path(), &s).unwrap().blocking);
        fs::write(fig.join("d.svg"), "<svg/>").unwrap();
        fs::write(fig.join("d.json"), "{}").unwrap();
        let r = recheck_all(dir.path(), &s).unwrap();
        assert!(!r.blocking);
        assert_eq!(r.entries.len(), 1);
        png(&fig, "dropped.jpg", 640, 480);
        let r = recheck_all(dir.path(), &s).unwrap();
        assert!(r.blocking);
        assert_eq!(r.blocking_paths(), vec!["src/fig/dropped.jpg"]);
    }

    #[test]
    fn recheck_emits_report_for_matches() {
        let dir = tempfile::tempdir().unwrap();
        let fig = dir.path().join("src/fig");
        fs::create_dir_all(&fig).unwrap();
        let photo = png(&fig, "p.png", 256, 256);
        let provider = HashListProvider::new(vec![difference_hash(&photo).unwrap()], "v1");
        let out = dir.path().join("out");
        let r = recheck_all(dir.path(), &Screener::new(&provider, &out)).unwrap();
        assert!(r.blocking);
        assert_eq!(r.reports_emitted.len(), 1);
        assert!(r.reports_emitted[0].starts_with(out.join(REPORT_DIR)));
    }
}
