//! The output directory: lock file, manifest, and stage bookkeeping.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, StageSeeds};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".hedonic.lock";

/// What a stage consumed and produced. Enough to tell whether rerunning it
/// would change anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// sha256 of each input file, keyed by path
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each output file, keyed by name inside the output directory
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// hash of the full canonical config of the latest run
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: Option<StageSeeds>,
    pub stages: BTreeMap<String, StageRecord>,
}

/// Held while a command runs; removes the lock file on drop.
pub struct Workspace {
    dir: PathBuf,
    lock: PathBuf,
    manifest: Manifest,
}

impl Workspace {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let lock = dir.join(LOCK);
        OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                anyhow::anyhow!(
                    "output directory {} is in use (lock file {} exists; remove it if no run is active)",
                    dir.display(),
                    lock.display()
                )
            } else {
                anyhow::Error::new(e).context(format!("cannot create lock file {}", lock.display()))
            }
        })?;
        let path = dir.join(MANIFEST);
        let manifest = if path.exists() {
            let text = fs::read_to_string(&path)?;
            serde_json::from_str(&text).unwrap_or_default()
        } else {
            Manifest::default()
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            lock,
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Path of an artifact an earlier stage must have written.
    pub fn artifact(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.is_file() {
            bail!("missing artifact {} (run the stage that produces it first)", p.display());
        }
        Ok(p)
    }

    pub fn set_run(&mut self, config_hash: String, config: serde_json::Value, seeds: Option<StageSeeds>) {
        self.manifest.config_hash = config_hash;
        self.manifest.config = config;
        self.manifest.seeds = seeds;
    }

    /// Runs `body` unless the manifest shows the same stage config, the same
    /// inputs, and outputs still on disk with their recorded digests. Returns
    /// whether the stage ran.
    pub fn run_stage(
        &mut self,
        name: &str,
        config_hash: String,
        seeds: BTreeMap<String, u64>,
        inputs: &[PathBuf],
        body: impl FnOnce(&Path) -> Result<Vec<String>>,
    ) -> Result<bool> {
        let mut input_digests = BTreeMap::new();
        for p in inputs {
            let bytes = fs::read(p).with_context(|| format!("cannot read input {}", p.display()))?;
            input_digests.insert(p.display().to_string(), sha256_hex(&bytes));
        }
        if let Some(prev) = self.manifest.stages.get(name) {
            let same = prev.config_hash == config_hash
                && prev.seeds == seeds
                && prev.inputs == input_digests
                && prev.outputs.iter().all(|(f, d)| digest(&self.path(f)).as_deref() == Some(d.as_str()));
            if same {
                eprintln!("{name}: up to date");
                return Ok(false);
            }
        }
        let outputs = body(&self.dir).with_context(|| format!("{name} stage failed"))?;
        let mut output_digests = BTreeMap::new();
        for f in outputs {
            let d = digest(&self.path(&f)).with_context(|| format!("{name} did not write {f}"))?;
            output_digests.insert(f, d);
        }
        self.manifest.stages.insert(
            name.to_string(),
            StageRecord {
                config_hash,
                seeds,
                inputs: input_digests,
                outputs: output_digests,
            },
        );
        self.save()?;
        eprintln!("{name}: done");
        Ok(true)
    }

    pub fn save(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(self.path(MANIFEST), text)?;
        Ok(())
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

fn digest(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| sha256_hex(&b))
}
