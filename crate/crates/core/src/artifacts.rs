//! Run artifacts: canonical hashing, CSV and manifest emission. All writes
//! go through a write-then-rename so a crashed run never leaves partial
//! files behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact io at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {path}: {reason}")]
    BadManifest { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

/// FNV-1a 64-bit. Used to fingerprint canonicalized configs and network
/// architectures; stability across runs matters, cryptographic strength does
/// not.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Atomically writes `bytes` to `path` (temp file + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// RFC-4180-style CSV: header row, LF line endings, no quoting needed for
/// the numeric payloads we emit.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "csv row width mismatch");
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), ArtifactError> {
    atomic_write(path, &csv_bytes(header, rows))
}

/// Reads a CSV produced by [`write_csv`]: returns (header, rows).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|l| l.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

/// Written at the end of every run: enough to regenerate the artifacts
/// bit-identically (config hash + seed + version) plus where they went.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<(String, PathBuf)>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("config_hash = {}\n", self.config_hash));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("version = {}\n", self.version));
        s.push_str(&format!("wall_clock_secs = {:.3}\n", self.wall_clock_secs));
        for (name, path) in &self.artifacts {
            s.push_str(&format!("artifact.{} = {}\n", name, path.display()));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), ArtifactError> {
        atomic_write(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<RunManifest, ArtifactError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut manifest = RunManifest {
            config_hash: String::new(),
            seed: 0,
            version: String::new(),
            wall_clock_secs: 0.0,
            artifacts: Vec::new(),
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| ArtifactError::BadManifest {
                path: path.to_path_buf(),
                reason: format!("line without `=`: {line}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |reason: String| ArtifactError::BadManifest {
                path: path.to_path_buf(),
                reason,
            };
            match key {
                "config_hash" => manifest.config_hash = value.to_string(),
                "seed" => {
                    manifest.seed =
                        value.parse().map_err(|e| bad(format!("seed: {e}")))?
                }
                "version" => manifest.version = value.to_string(),
                "wall_clock_secs" => {
                    manifest.wall_clock_secs =
                        value.parse().map_err(|e| bad(format!("wall_clock_secs: {e}")))?
                }
                k if k.starts_with("artifact.") => manifest
                    .artifacts
                    .push((k["artifact.".len()..].to_string(), PathBuf::from(value))),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_vectors() {
        // Standard FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            vec!["1".to_string(), "2.5".to_string()],
            vec!["2".to_string(), "-0.125".to_string()],
        ];
        write_csv(&path, &["step", "value"], &rows).unwrap();
        let (header, got) = read_csv(&path).unwrap();
        assert_eq!(header, vec!["step", "value"]);
        assert_eq!(got, rows);
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.txt");
        let manifest = RunManifest {
            config_hash: "00aabb".into(),
            seed: 17,
            version: "gaze-0.1.0".into(),
            wall_clock_secs: 1.25,
            artifacts: vec![("curve".into(), PathBuf::from("curve.csv"))],
        };
        manifest.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), manifest);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x/y/z.txt");
        atomic_write(&path, b"data").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"data");
        assert!(!path.with_extension("tmp").exists());
    }
}
