use std::fmt;
use std::path::PathBuf;

/// Everything that can go wrong between the command line and the library.
///
/// Each variant maps to a stable `kind` string so callers that parse the
/// JSON error object printed on exit do not have to match on prose.
#[derive(Debug)]
pub enum CliError {
    /// Filesystem trouble; wraps the offending path for context.
    Io { path: PathBuf, message: String },
    /// Scenario or CSV text that could not be parsed at all.
    Parse {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    /// Well-formed input with an invalid value; `field` is a dotted path
    /// into the scenario (for example `frequency.n_steps`).
    Validation { field: String, message: String },
    /// Binary image file that does not start with the expected magic bytes.
    MagicMismatch { path: PathBuf },
    /// Binary image file shorter than its header promises.
    TruncatedFile { path: PathBuf },
    /// Binary image file with an unsupported format version.
    UnsupportedVersion { path: PathBuf, version: u32 },
    /// Error bubbled up from the synthesis library.
    Lib(nfsas::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Parse { .. } => "ParseError",
            CliError::Validation { .. } => "ValidationError",
            CliError::MagicMismatch { .. } => "MagicMismatch",
            CliError::TruncatedFile { .. } => "TruncatedFile",
            CliError::UnsupportedVersion { .. } => "UnsupportedVersion",
            CliError::Lib(_) => "LibraryError",
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, message } => {
                write!(f, "{}: {}", path.display(), message)
            }
            CliError::Parse {
                path,
                line: Some(line),
                message,
            } => write!(f, "{}:{}: {}", path.display(), line, message),
            CliError::Parse {
                path,
                line: None,
                message,
            } => write!(f, "{}: {}", path.display(), message),
            CliError::Validation { field, message } => {
                write!(f, "{field}: {message}")
            }
            CliError::MagicMismatch { path } => {
                write!(f, "{}: not an NFIM image file", path.display())
            }
            CliError::TruncatedFile { path } => {
                write!(f, "{}: file ends before the declared payload", path.display())
            }
            CliError::UnsupportedVersion { path, version } => {
                write!(f, "{}: unsupported NFIM version {}", path.display(), version)
            }
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<nfsas::Error> for CliError {
    fn from(e: nfsas::Error) -> Self {
        CliError::Lib(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
