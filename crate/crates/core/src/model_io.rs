//! Versioned JSON envelopes for model files.
//!
//! Every model file carries its kind and a format version; loading a file of
//! the wrong kind or version is an error. Serialization is deterministic
//! (ordered maps throughout), so retraining with the same seed reproduces
//! byte-identical files.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    format_version: u32,
    payload: T,
}

pub fn save_model<T: Serialize>(
    path: &Path,
    kind: &str,
    format_version: u32,
    payload: &T,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let envelope =
        Envelope { kind: kind.to_string(), format_version, payload };
    serde_json::to_writer(BufWriter::new(file), &envelope)
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))
}

pub fn load_model<T: DeserializeOwned>(path: &Path, kind: &str, format_version: u32) -> Result<T> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let envelope: Envelope<T> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    if envelope.kind != kind {
        return Err(Error::ModelFormat(format!(
            "{}: expected a {kind} model, found {}",
            path.display(),
            envelope.kind
        )));
    }
    if envelope.format_version != format_version {
        return Err(Error::ModelFormat(format!(
            "{}: format version {} unsupported (expected {format_version})",
            path.display(),
            envelope.format_version
        )));
    }
    Ok(envelope.payload)
}
