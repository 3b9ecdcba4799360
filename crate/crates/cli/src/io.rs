use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::Global;

#[derive(Debug)]
pub enum CliError {
    Core(spinimage::Error),
    Read { file: PathBuf, source: std::io::Error },
    Json { file: PathBuf, path: String, message: String },
    Write { file: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for a failed check, 2 for bad input, 3 for the enumeration budget.
    pub fn code(&self) -> u8 {
        use spinimage::Error::*;
        match self {
            CliError::Core(Budget { .. }) => 3,
            CliError::Core(CheckFailed(_) | Lp(_)) => 1,
            CliError::Core(_) | CliError::Read { .. } | CliError::Json { .. } => 2,
            CliError::Write { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Read { file, source } => write!(f, "cannot read {}: {source}", file.display()),
            CliError::Json { file, path, message } => {
                write!(f, "{}: at `{path}`: {message}", file.display())
            }
            CliError::Write { file, source } => write!(f, "cannot write {}: {source}", file.display()),
        }
    }
}

impl From<spinimage::Error> for CliError {
    fn from(e: spinimage::Error) -> Self {
        CliError::Core(e)
    }
}

pub fn read_json<T: DeserializeOwned>(file: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(file).map_err(|source| CliError::Read {
        file: file.to_path_buf(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Json {
            file: file.to_path_buf(),
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Pretty JSON with a trailing newline, to `--out` or standard output.
pub fn emit<T: Serialize>(global: &Global, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    match &global.out {
        Some(file) => fs::write(file, text).map_err(|source| CliError::Write {
            file: file.clone(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Write {
                    file: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}
