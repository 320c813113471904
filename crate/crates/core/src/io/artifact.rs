use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::em::ZitModel;
use crate::error::{Error, Result};

pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

/// On-disk envelope: version, SHA-256 of the exact model bytes, and the model.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelArtifact<'a> {
    pub format_version: String,
    pub sha256: String,
    #[serde(borrow)]
    pub model: &'a RawValue,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn save_model(model: &ZitModel, path: impl AsRef<Path>) -> Result<()> {
    let payload = serde_json::to_string(model)?;
    let raw = RawValue::from_string(payload)?;
    let artifact = ModelArtifact {
        format_version: FORMAT_VERSION.to_string(),
        sha256: digest(raw.get().as_bytes()),
        model: &raw,
    };
    let mut text = serde_json::to_string_pretty(&artifact)?;
    text.push('\n');
    super::write_text_atomic(path, &text)
}

fn check_version(found: &str) -> Result<()> {
    let major = found.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major == Some(FORMAT_MAJOR) {
        Ok(())
    } else {
        Err(Error::VersionMismatch {
            found: found.to_string(),
            supported: FORMAT_MAJOR,
        })
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ZitModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_model(&text)
}

pub(crate) fn parse_model(text: &str) -> Result<ZitModel> {
    let artifact: ModelArtifact<'_> =
        serde_json::from_str(text).map_err(|e| Error::Artifact(format!("unreadable envelope: {e}")))?;
    check_version(&artifact.format_version)?;
    if digest(artifact.model.get().as_bytes()) != artifact.sha256 {
        return Err(Error::ChecksumMismatch);
    }
    let model: ZitModel = serde_json::from_str(artifact.model.get())?;
    let layout = model.schema.layout();
    for (name, e) in [("mean", &model.f_mu), ("dispersion", &model.f_phi), ("zero-state", &model.f_pi)] {
        if e.layout != layout {
            return Err(Error::Artifact(format!("{name} ensemble does not match the schema")));
        }
        for t in &e.trees {
            t.validate()?;
        }
    }
    Ok(model)
}
