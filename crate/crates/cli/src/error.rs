use std::fmt;
use std::path::{Path, PathBuf};

use impact_hedge::Error as CoreError;
use thiserror::Error;

/// One configuration problem, located by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl Issue {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Issue {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn missing(field: &str) -> Self {
        Issue::new(field, "required block is missing")
    }

    pub(crate) fn parse(e: serde_path_to_error::Error<toml::de::Error>) -> Self {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.message().to_string();
        let message = match inner.span() {
            Some(span) => format!("{message} (bytes {}..{})", span.start, span.end),
            None => message,
        };
        Issue::new(if field == "." { String::from("<root>") } else { field }, message)
    }
}

impl From<CoreError> for Issue {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Invalid { field, reason } => Issue::new(field, reason),
            other => Issue::new("<config>", other.to_string()),
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario:\n{}", list(.0))]
    Validation(Vec<Issue>),

    #[error("[{module}] {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("acceptance failures: {}", .0.join(", "))]
    Verification(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn list(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Tags a core error with the module that raised it. Configuration
    /// problems surfaced late still count as validation errors.
    pub fn core(module: &'static str) -> impl Fn(CoreError) -> CliError {
        move |e| match e {
            CoreError::Invalid { .. } | CoreError::Dimension { .. } | CoreError::RankDeficient { .. } => {
                CliError::Validation(vec![Issue::from(e)])
            }
            source => CliError::Numerical { module, source },
        }
    }

    /// 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } | CliError::Verification(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
