//! JSON-lines files, JSON artifacts and their manifests.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chainworld_core::ActionPlan;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Json {
            location: format!("{}:{}", path.display(), i + 1),
            source,
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    create_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| Error::Json {
            location: path.display().to_string(),
            source,
        })?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|source| Error::Json {
        location: path.display().to_string(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut body = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        location: path.display().to_string(),
        source,
    })?;
    body.push(b'\n');
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a corpus and checks each plan's invariants.
pub fn read_corpus(path: &Path) -> Result<Vec<ActionPlan>> {
    let plans: Vec<ActionPlan> = read_jsonl(path)?;
    for plan in &plans {
        plan.validate()
            .map_err(|e| Error::Config(format!("{}: plan {}: {e}", path.display(), plan.id)))?;
    }
    Ok(plans)
}

/// Non-empty lines, trimmed; lines starting with `#` are comments.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Hash of a value's JSON form, for configs.
pub fn sha256_json<T: Serialize + ?Sized>(value: &T) -> String {
    sha256_bytes(&serde_json::to_vec(value).expect("configs serialize"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name only, so manifests do not depend on where a run happened.
    pub file: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self {
            file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_file(path)?,
        })
    }
}

/// What produced an artifact. Written beside it as
/// `<artifact>.manifest.json`; there are no timestamps, so identical runs
/// write identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub artifact: FileDigest,
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Shared fields of every manifest a command writes.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
}

impl RunRecord {
    pub fn new(
        command: &str,
        config_hash: String,
        seed: Option<u64>,
        inputs: &[&Path],
    ) -> Result<Self> {
        Ok(Self {
            command: command.into(),
            config_hash,
            seed,
            inputs: inputs
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<Result<_>>()?,
        })
    }

    pub fn manifest_for(&self, artifact: &Path) -> Result<Manifest> {
        Ok(Manifest {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            inputs: self.inputs.clone(),
            artifact: FileDigest::of(artifact)?,
        })
    }

    pub fn write_manifest(&self, artifact: &Path) -> Result<()> {
        write_json(&manifest_path(artifact), &self.manifest_for(artifact)?)
    }
}

/// Hash of the manifest beside `artifact`, if there is one.
pub fn manifest_hash(artifact: &Path) -> Result<Option<String>> {
    let path = manifest_path(artifact);
    if path.exists() {
        sha256_file(&path).map(Some)
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.jsonl");
        write_jsonl(&path, &[1, 2, 3]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "1\n2\n3\n");
        assert_eq!(read_jsonl::<u32>(&path).unwrap(), [1, 2, 3]);
        fs::write(&path, "1\n\nnope\n").unwrap();
        let err = read_jsonl::<u32>(&path).unwrap_err().to_string();
        assert!(err.contains("x.jsonl:3"), "{err}");
    }

    #[test]
    fn manifests_sit_beside_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let out = dir.path().join("out.jsonl");
        fs::write(&input, "a").unwrap();
        fs::write(&out, "b").unwrap();
        let run = RunRecord::new("test", "h".into(), Some(7), &[&input]).unwrap();
        run.write_manifest(&out).unwrap();
        let m: Manifest = read_json(&dir.path().join("out.jsonl.manifest.json")).unwrap();
        assert_eq!(m.artifact.file, "out.jsonl");
        assert_eq!(m.inputs[0].sha256, sha256_bytes(b"a"));
        assert_eq!(m.seed, Some(7));
        assert!(manifest_hash(&out).unwrap().is_some());
        assert!(manifest_hash(&input).unwrap().is_none());
    }
}
