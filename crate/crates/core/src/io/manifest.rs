//! Line-delimited JSON utterance manifests.
//!
//! The first line is a header carrying the format version and the hash of the
//! configuration that produced the data; every following line is one
//! [`ManifestRecord`]. Paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::room::{DatasetKind, ScenarioSpec, Split};
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub manifest_version: u32,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub split: Split,
    pub dataset: DatasetKind,
    /// `M`-channel mixture.
    pub mixture: PathBuf,
    /// Noise-free speech at the reference microphone.
    pub reference: PathBuf,
    /// Noise at the reference microphone.
    pub noise_at_reference: PathBuf,
    /// `M`-channel speech and noise images, when kept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_image: Option<PathBuf>,
    pub scenario: ScenarioSpec,
    pub realized_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub records: Vec<ManifestRecord>,
    /// Directory that relative record paths resolve against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(config_hash: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        Self {
            config_hash: config_hash.into(),
            records: Vec::new(),
            root: root.into(),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn to_text(&self) -> String {
        let header = ManifestHeader {
            manifest_version: MANIFEST_VERSION,
            config_hash: self.config_hash.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serialises");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialises"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        w.write_all(self.to_text().as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |line: usize, reason: String| Error::Manifest {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut lines = BufReader::new(f).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| bad(1, "empty manifest".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: ManifestHeader =
            serde_json::from_str(&header_line).map_err(|e| bad(1, e.to_string()))?;
        if header.manifest_version != MANIFEST_VERSION {
            return Err(bad(
                1,
                format!("unsupported manifest version {}", header.manifest_version),
            ));
        }
        let mut records = Vec::new();
        let mut ids = HashSet::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord =
                serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?;
            if !ids.insert(rec.id.clone()) {
                return Err(bad(i + 2, format!("duplicate utterance id `{}`", rec.id)));
            }
            records.push(rec);
        }
        Ok(Self {
            config_hash: header.config_hash,
            records,
            root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    /// Checks that every referenced file exists.
    pub fn check_paths(&self) -> Result<()> {
        for r in &self.records {
            let mut paths = vec![&r.mixture, &r.reference, &r.noise_at_reference];
            paths.extend(r.speech_image.iter());
            paths.extend(r.noise_image.iter());
            for p in paths {
                let full = self.resolve(p);
                if !full.exists() {
                    return Err(Error::io(
                        full,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "missing audio file"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::{sample_scenario, Split};
    use rand::SeedableRng;

    fn record(id: &str) -> ManifestRecord {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        ManifestRecord {
            id: id.into(),
            split: Split::Test,
            dataset: DatasetKind::Static,
            mixture: format!("{id}.mix.wav").into(),
            reference: format!("{id}.ref.wav").into(),
            noise_at_reference: format!("{id}.noise.wav").into(),
            speech_image: None,
            noise_image: None,
            scenario: sample_scenario(&mut rng, Split::Test),
            realized_snr_db: 4.25,
        }
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut m = Manifest::new("abc", dir.path());
        m.records = vec![record("u0"), record("u1")];
        m.write(&path).unwrap();
        let back = Manifest::read(&path).unwrap();
        assert_eq!(back, m);
        assert!(back.check_paths().is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let mut m = Manifest::new("abc", dir.path());
        m.records = vec![record("u0"), record("u0")];
        m.write(&path).unwrap();
        assert!(matches!(Manifest::read(&path), Err(Error::Manifest { line: 3, .. })));
    }
}
