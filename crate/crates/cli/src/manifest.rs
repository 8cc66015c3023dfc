//! Run manifests and recorded inputs.
//!
//! Every input file a command reads goes through [`Inputs`], which records
//! its contents. The manifest stores those contents next to the command line,
//! so `qpm replay` can rerun the command without touching the original files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qpm_core::QpmError;

pub const BUNDLED_CONFIG_KEY: &str = "<bundled>/npp.cfg";
pub const BUNDLED_RING_KEY: &str = "<bundled>/npp_ring.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub engine_version: String,
    pub timestamp: String,
    pub seed: u64,
    pub trials: usize,
    pub output: String,
    /// Path (as given) → file contents, for every input that was read.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn manifest_path(output: &Path) -> PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.toml");
        PathBuf::from(name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            QpmError::InvalidParameter {
                key: "manifest".into(),
                reason: e.message().to_string(),
            }
            .into()
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Reads input files, either from disk (recording them) or from a manifest.
#[derive(Debug, Default)]
pub struct Inputs {
    recorded: BTreeMap<String, String>,
    replay: Option<BTreeMap<String, String>>,
}

impl Inputs {
    pub fn live() -> Self {
        Inputs::default()
    }

    pub fn replaying(snapshot: BTreeMap<String, String>) -> Self {
        Inputs {
            recorded: BTreeMap::new(),
            replay: Some(snapshot),
        }
    }

    pub fn read(&mut self, key: &str) -> Result<String> {
        let text = match &self.replay {
            Some(snap) => snap.get(key).cloned().ok_or_else(|| QpmError::InvalidParameter {
                key: "manifest.inputs".into(),
                reason: format!("no recorded contents for `{key}`"),
            })?,
            None => fs::read_to_string(key).map_err(|e| QpmError::InvalidParameter {
                key: key.to_string(),
                reason: format!("cannot read file: {e}"),
            })?,
        };
        self.recorded.insert(key.to_string(), text.clone());
        Ok(text)
    }

    /// Registers built-in data under a synthetic key.
    pub fn bundled(&mut self, key: &str, text: &str) -> String {
        self.recorded.insert(key.to_string(), text.to_string());
        text.to_string()
    }

    pub fn into_recorded(self) -> BTreeMap<String, String> {
        self.recorded
    }
}

/// Writes `contents` to `path` via a temporary file so a failed run leaves nothing behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
