use std::fmt;
use std::io;
use std::path::Path;

use serde::Serialize;
use velotrace::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    MissingInput,
    Schema,
    Training,
    Other,
}

/// A failure reported as one JSON object on stderr.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl CliError {
    pub fn missing(path: &Path) -> Self {
        CliError {
            kind: ErrorKind::MissingInput,
            message: format!("input file not found: {}", path.display()),
            path: Some(path.display().to_string()),
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::NotFound {
            return CliError::missing(path);
        }
        CliError {
            kind: ErrorKind::Other,
            message: format!("{}: {e}", path.display()),
            path: Some(path.display().to_string()),
        }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Schema,
            message: message.into(),
            path: None,
        }
    }

    pub fn param(message: impl Into<String>) -> Self {
        CliError::schema(message)
    }

    /// Errors raised while fitting models count as training failures unless
    /// the input itself was malformed.
    pub fn training(e: Error) -> Self {
        let mut err = CliError::from(e);
        if err.kind == ErrorKind::Other {
            err.kind = ErrorKind::Training;
        }
        err
    }

    pub fn with_path(mut self, path: &Path) -> Self {
        if self.path.is_none() {
            self.message = format!("{}: {}", path.display(), self.message);
            self.path = Some(path.display().to_string());
        }
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::MissingInput => 2,
            ErrorKind::Schema => 3,
            ErrorKind::Training => 4,
            ErrorKind::Other => 1,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a CliError,
            exit_code: i32,
        }
        serde_json::to_string(&Report {
            error: self,
            exit_code: self.exit_code(),
        })
        .expect("error report serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => ErrorKind::MissingInput,
            Error::Parse { .. } | Error::Range { .. } | Error::Schema { .. } | Error::Serde(_) | Error::Param(_) => ErrorKind::Schema,
            Error::Diverged { .. } => ErrorKind::Training,
            _ => ErrorKind::Other,
        };
        let path = match &e {
            Error::Io { path, .. } => Some(path.display().to_string()),
            _ => None,
        };
        CliError {
            kind,
            message: e.to_string(),
            path,
        }
    }
}
