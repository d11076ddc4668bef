//! Structured report emission. All reports are JSON with a schema version
//! and a kind tag; struct field order is fixed, so two emissions of the same
//! report are byte-identical.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema_version: u32,
    pub kind: String,
    pub body: T,
}

pub fn render<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let doc = Report {
        schema_version: SCHEMA_VERSION,
        kind: kind.to_string(),
        body,
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::InvalidConfig(format!("report serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn emit<T: Serialize>(kind: &str, body: &T, path: &Path) -> Result<()> {
    fs::write(path, render(kind, body)?).map_err(|e| Error::io(path, e))
}

/// Reads back a report, checking schema version and kind.
pub fn read<T: DeserializeOwned>(kind: &str, path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: Report<T> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported report schema version {}",
            doc.schema_version
        )));
    }
    if doc.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "expected report kind {kind:?}, found {:?}",
            doc.kind
        )));
    }
    Ok(doc.body)
}
