use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliResult, Format};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Sidecar record of one invocation. Only `generated_unix` and
/// `runtime_secs` vary between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub format: Format,
    pub tool_version: String,
    pub outputs: Vec<OutputDigest>,
    pub generated_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub struct Emission<'a> {
    pub command: &'a str,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub format: Format,
    pub runtime_secs: Option<f64>,
}

/// Write `data` to `out` plus its manifest, or to `stdout` when `out` is unset.
pub fn emit(
    out: Option<&Path>,
    stdout: &mut dyn Write,
    e: Emission<'_>,
    data: &[u8],
) -> CliResult<()> {
    let Some(out) = out else {
        stdout.write_all(data)?;
        return Ok(());
    };
    std::fs::write(out, data)?;
    let manifest = Manifest {
        command: e.command.to_string(),
        config: e.config,
        seed: e.seed,
        format: e.format,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: vec![OutputDigest {
            path: out.display().to_string(),
            sha256: hex::encode(Sha256::digest(data)),
            bytes: data.len() as u64,
        }],
        generated_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        runtime_secs: e.runtime_secs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(manifest_path(out), text)?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}
