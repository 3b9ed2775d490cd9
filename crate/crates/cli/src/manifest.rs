//! `manifest.json`: what a command was asked to do and what it produced.
//!
//! The manifest is written with status `running` before any heavy work and
//! rewritten as `complete` (or `failed`) at the end. Output digests cover
//! every other file in the directory; wall-clock figures live only here, so
//! identical inputs give identical output digests.

use crate::error::{CliError, CliResult};
use frailtree::chain::Controls;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    pub version: String,
    /// SHA-256 of the resolved configuration below.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub controls: Option<Controls>,
    pub config: serde_json::Value,
    /// Input path → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Digest identifying the analysed dataset, shared by runs on the same files.
    pub data_digest: Option<String>,
    /// Output path relative to the directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub jobs: usize,
    pub started_unix: f64,
    pub wall_clock_seconds: Option<f64>,
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
    pub error: Option<String>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Digest of the subject and cluster files taken together.
pub fn data_digest(subjects: &str, clusters: &str) -> String {
    sha256_bytes(format!("{subjects}\n{clusters}").as_bytes())
}

/// Every file below `dir` except the manifest, as sorted relative paths.
fn list_outputs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if path != root.join(MANIFEST) {
                out.push(path.strip_prefix(root).unwrap_or(&path).to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> CliResult<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// An in-progress run whose manifest is kept on disk.
pub struct Run {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    clock: Instant,
}

impl Run {
    /// Prepares `dir` and writes the `running` manifest.
    ///
    /// Files listed by a previous manifest are removed first; a non-empty
    /// directory without a manifest is refused.
    pub fn begin<C: Serialize>(
        dir: &Path,
        command: &str,
        config: &C,
        seed: Option<u64>,
        controls: Option<Controls>,
        jobs: usize,
    ) -> CliResult<Run> {
        if dir.exists() {
            if dir.join(MANIFEST).exists() {
                let old = read_manifest(dir)?;
                for rel in old.outputs.keys() {
                    let _ = std::fs::remove_file(dir.join(rel));
                }
                remove_empty_dirs(dir);
            } else if std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.next().is_some() {
                return Err(CliError::Config(format!(
                    "output directory {} is not empty and holds no manifest",
                    dir.display()
                )));
            }
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let config = serde_json::to_value(config)
            .map_err(|e| CliError::Config(format!("cannot serialize configuration: {e}")))?;
        let canonical = serde_json::to_vec(&config).expect("JSON values serialize");
        let manifest = RunManifest {
            command: command.to_string(),
            status: RunStatus::Running,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_bytes(&canonical),
            seed,
            controls,
            config,
            inputs: BTreeMap::new(),
            data_digest: None,
            outputs: BTreeMap::new(),
            jobs,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
            wall_clock_seconds: None,
            timings: BTreeMap::new(),
            error: None,
        };
        let run = Run {
            dir: dir.to_path_buf(),
            manifest,
            clock: Instant::now(),
        };
        run.save()?;
        Ok(run)
    }

    /// Records an input's digest; an unreadable input is a data error.
    pub fn add_input(&mut self, path: &Path) -> CliResult<String> {
        let digest = sha256_file(path).map_err(|e| CliError::Data(e.to_string()))?;
        self.manifest
            .inputs
            .insert(path.display().to_string(), digest.clone());
        Ok(digest)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    pub fn save(&self) -> CliResult<()> {
        let path = self.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    /// Digests the outputs and marks the run complete.
    pub fn finish(mut self) -> CliResult<RunManifest> {
        for rel in list_outputs(&self.dir)? {
            let digest = sha256_file(&self.dir.join(&rel))?;
            self.manifest
                .outputs
                .insert(rel.to_string_lossy().replace('\\', "/"), digest);
        }
        self.manifest.status = RunStatus::Complete;
        self.manifest.wall_clock_seconds = Some(self.clock.elapsed().as_secs_f64());
        self.save()?;
        Ok(self.manifest)
    }

    /// Records the failure; outputs written so far stay listed.
    pub fn fail(mut self, error: &CliError) {
        if let Ok(files) = list_outputs(&self.dir) {
            for rel in files {
                if let Ok(d) = sha256_file(&self.dir.join(&rel)) {
                    self.manifest.outputs.insert(rel.to_string_lossy().into_owned(), d);
                }
            }
        }
        self.manifest.status = RunStatus::Failed;
        self.manifest.error = Some(error.to_string());
        self.manifest.wall_clock_seconds = Some(self.clock.elapsed().as_secs_f64());
        if let Err(e) = self.save() {
            log::error!("could not record the failure in the manifest: {e}");
        }
    }
}

fn remove_empty_dirs(dir: &Path) {
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                remove_empty_dirs(&path);
                let _ = std::fs::remove_dir(&path);
            }
        }
    }
}

/// Runs `body` inside a manifest-tracked run, recording failures.
pub fn tracked<F>(run: Run, body: F) -> CliResult<RunManifest>
where
    F: FnOnce(&mut Run) -> CliResult<()>,
{
    let mut run = run;
    match body(&mut run) {
        Ok(()) => run.finish(),
        Err(e) => {
            run.fail(&e);
            Err(e)
        }
    }
}
