use std::fmt;
use std::path::{Path, PathBuf};

/// Exit codes.
pub const EXIT_EXISTS: i32 = 2;
pub const EXIT_DIGEST: i32 = 3;
pub const EXIT_NO_TOOL_BLOCK: i32 = 4;
pub const EXIT_ATTACK: i32 = 5;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_IO: i32 = 74;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Exists(String),
    Io { path: PathBuf, source: std::io::Error },
    /// Library error, optionally tied to the file it came from.
    Lib { path: Option<PathBuf>, source: ipvault::Error },
    /// An attack ran but a named verdict came out false.
    Verdict(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    pub fn file(path: &Path, source: ipvault::Error) -> Self {
        CliError::Lib {
            path: Some(path.to_owned()),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use ipvault::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Exists(_) => EXIT_EXISTS,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_NO_INPUT,
            CliError::Io { .. } => EXIT_IO,
            CliError::Verdict(_) => EXIT_ATTACK,
            CliError::Lib { source, .. } => match source {
                E::DigestMismatch { .. } => EXIT_DIGEST,
                E::NoSuchToolBlock(_) => EXIT_NO_TOOL_BLOCK,
                E::AttackInconsistent(_) | E::FactorFailure { .. } => EXIT_ATTACK,
                _ => EXIT_DATA,
            },
        }
    }
}

impl From<ipvault::Error> for CliError {
    fn from(source: ipvault::Error) -> Self {
        CliError::Lib { path: None, source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Exists(name) => write!(f, "keyname `{name}` already exists in the keystore"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Lib { path: Some(path), source } => write!(f, "{}: {source}", path.display()),
            CliError::Lib { path: None, source } => write!(f, "{source}"),
            CliError::Verdict(name) => write!(f, "verdict failed: {name}"),
        }
    }
}
