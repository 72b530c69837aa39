//! Run manifests: a small JSON record written alongside every output
//! artifact so results can be traced back to their exact inputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Provenance record for one CLI run. The input hash covers every input
/// file's bytes, so it changes iff any input byte changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub seed: u64,
    pub input_hash: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    /// Start a manifest: resolves input paths and hashes their bytes in
    /// sorted-path order.
    pub fn start(subcommand: &str, inputs: &[&Path], seed: u64) -> Result<Self> {
        let mut resolved: Vec<PathBuf> = Vec::new();
        for p in inputs {
            let canonical = p.canonicalize().unwrap_or_else(|_| p.to_path_buf());
            resolved.push(canonical);
        }
        resolved.sort();
        let mut hasher = Sha256::new();
        for p in &resolved {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            hasher.update(p.to_string_lossy().as_bytes());
            hasher.update([0u8]);
            hasher.update(&bytes);
        }
        let digest = hasher.finalize();
        let mut input_hash = String::with_capacity(64);
        for byte in digest {
            input_hash.push_str(&format!("{byte:02x}"));
        }
        Ok(RunManifest {
            subcommand: subcommand.to_string(),
            inputs: resolved,
            seed,
            input_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: iso8601_now(),
            finished_at: String::new(),
        })
    }

    /// Stamp the end time and write `<output>.manifest.json` next to the artifact.
    pub fn finish_alongside(mut self, output: &Path) -> Result<()> {
        self.finished_at = iso8601_now();
        let manifest_path = manifest_path_for(output);
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| Error::Config(format!("serialize manifest: {e}")))?;
        std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(())
    }
}

pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

fn iso8601_now() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format_unix_seconds(secs)
}

/// Civil-date conversion (days-from-epoch algorithm), UTC.
fn format_unix_seconds(secs: u64) -> String {
    let days = secs / 86_400;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);

    let z = days as i64 + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };

    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_date_formatting() {
        assert_eq!(format_unix_seconds(0), "1970-01-01T00:00:00Z");
        assert_eq!(format_unix_seconds(86_400), "1970-01-02T00:00:00Z");
        // 2000-03-01 00:00:00 UTC
        assert_eq!(format_unix_seconds(951_868_800), "2000-03-01T00:00:00Z");
        // 2024-02-29 12:30:45 UTC (leap day)
        assert_eq!(format_unix_seconds(1_709_209_845), "2024-02-29T12:30:45Z");
    }

    #[test]
    fn hash_changes_with_input_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("input.txt");
        std::fs::write(&f, "one").unwrap();
        let m1 = RunManifest::start("test", &[&f], 42).unwrap();
        let m2 = RunManifest::start("test", &[&f], 42).unwrap();
        assert_eq!(m1.input_hash, m2.input_hash);
        std::fs::write(&f, "two").unwrap();
        let m3 = RunManifest::start("test", &[&f], 42).unwrap();
        assert_ne!(m1.input_hash, m3.input_hash);
    }

    #[test]
    fn manifest_lands_next_to_output() {
        let p = manifest_path_for(Path::new("/tmp/out/trials.csv"));
        assert_eq!(p, Path::new("/tmp/out/trials.csv.manifest.json"));
    }
}
