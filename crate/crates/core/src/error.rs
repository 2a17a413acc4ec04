use std::path::PathBuf;

/// Outcome category of a failure. The command-line front end maps each
/// category onto a fixed process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Internal,
    Validation,
    Safety,
    Transmit,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Internal => 1,
            Category::Validation => 2,
            Category::Safety => 3,
            Category::Transmit => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Internal => "internal",
            Category::Validation => "validation",
            Category::Safety => "safety",
            Category::Transmit => "transmit",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("symlink not allowed in bundle input: {0}")]
    Symlink(PathBuf),
    #[error("path is not valid UTF-8: {0}")]
    NonUtf8Path(PathBuf),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("parse error in {what}: {reason}")]
    Parse { what: String, reason: String },
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("gate failed: {0}")]
    Gate(String),
    #[error("safety refusal: {0}")]
    SafetyRefusal(String),
    #[error("undecodable figure: {0}")]
    Undecodable(String),
    #[error("safety provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("transmit failed: {0}")]
    Transmit(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("project is locked by another writer: {0}")]
    Locked(PathBuf),
    #[error("randomness unavailable: {0}")]
    Randomness(String),
    #[error("build command failed: {0}")]
    Build(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Io { .. } | Error::Encoding(_) | Error::Randomness(_) => Category::Internal,
            // Fail closed: an unreachable provider is surfaced like a refusal.
            Error::SafetyRefusal(_) | Error::Undecodable(_) | Error::ProviderUnavailable(_) => Category::Safety,
            Error::Transmit(_) => Category::Transmit,
            Error::Symlink(_)
            | Error::NonUtf8Path(_)
            | Error::Invalid { .. }
            | Error::Parse { .. }
            | Error::Gate(_)
            | Error::NotFound(_)
            | Error::Locked(_)
            | Error::Build(_) => Category::Validation,
        }
    }
}

/// Attach a path to an I/O error.
pub(crate) trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|e| Error::io(path.display().to_string(), e))
    }
}
