use std::path::PathBuf;

/// Errors of the file layer and the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("hyperedge {hyperedge} references missing vertex {vertex}")]
    DanglingMember { hyperedge: u32, vertex: u32 },
    #[error("id {0} appears in more than one split")]
    SplitOverlap(u32),
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("bad {format} file: {reason}")]
    Format { format: &'static str, reason: String },
    #[error(transparent)]
    Core(hgtok_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            4 => "numeric",
            _ => "data",
        }
    }

    /// 2 for usage errors, 4 for numeric failures, 3 for everything data-related.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(hgtok_core::Error::Config(_)) => 2,
            Error::Core(hgtok_core::Error::NonFinite) => 4,
            _ => 3,
        }
    }

    /// Single-line JSON description for stderr.
    pub fn line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "code": self.exit_code(), "message": self.to_string() }).to_string()
    }

    pub fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format { format, reason: reason.into() }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

impl From<hgtok_core::Error> for Error {
    fn from(e: hgtok_core::Error) -> Self {
        match e {
            hgtok_core::Error::SplitOverlap(id) => Error::SplitOverlap(id),
            hgtok_core::Error::ManifestMismatch(m) => Error::ManifestMismatch(m),
            other => Error::Core(other),
        }
    }
}
