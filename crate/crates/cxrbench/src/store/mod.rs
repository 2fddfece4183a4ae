//! On-disk run store.
//!
//! One directory per run id holds the config snapshot, the split plans, one
//! directory per (model, split) instance with its weights / history / logit
//! artifacts, and the emitted reports. Every write goes through
//! write-then-rename commits, so readers never observe partial content and
//! a completed artifact is the durable resume marker.

mod config;

pub use config::{resolve_config, ConfigOverlay, RunConfig};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::ensemble::{
    logit_records_to_csv, parse_logit_csv, LogitCache, LogitRecord, SPLIT_INDICES,
};
use crate::error::{Error, Result};
use crate::trainer::TrainedInstance;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

const HISTORY_HEADER: &str = "epoch,train_loss,val_loss,wall_seconds";
const WEIGHTS_MAGIC: &[u8; 8] = b"CXBW0001";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitOutcome {
    Written,
    /// Destination already held identical bytes; nothing was touched.
    AlreadyPresent,
}

/// What a store path holds; every file in a run maps to exactly one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    ConfigSnapshot,
    Lock,
    Quarantine,
    SplitPlan,
    Weights,
    History,
    Logits,
    InstanceMeta,
    InstanceError,
    Report,
}

/// Handle on one run's directory tree.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
    run_id: String,
}

/// Removes the lock file when dropped.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl RunStore {
    /// Opens (creating if needed) the store for `run_id` under `output_root`.
    pub fn open(output_root: &Path, run_id: &str) -> Result<RunStore> {
        if !valid_run_id(run_id) {
            return Err(Error::Validation(format!(
                "run_id \"{run_id}\" is not filesystem-safe (use [A-Za-z0-9._-], no leading dot)"
            )));
        }
        let root = output_root.join(run_id);
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(RunStore {
            root,
            run_id: run_id.to_string(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    // ----- layout ---------------------------------------------------------

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.snapshot")
    }

    pub fn lock_path(&self) -> PathBuf {
        self.root.join("LOCK")
    }

    pub fn quarantine_dir(&self) -> PathBuf {
        self.root.join("quarantine")
    }

    pub fn split_plan_path(&self, split_index: usize) -> PathBuf {
        self.root.join("splits").join(format!("plan_{split_index}.json"))
    }

    pub fn instance_dir(&self, model: &str, split_index: usize) -> PathBuf {
        self.root
            .join("instances")
            .join(model)
            .join(format!("split_{split_index}"))
    }

    pub fn weights_path(&self, model: &str, split_index: usize) -> PathBuf {
        self.instance_dir(model, split_index).join("weights.bin")
    }

    pub fn history_path(&self, model: &str, split_index: usize) -> PathBuf {
        self.instance_dir(model, split_index).join("history.csv")
    }

    pub fn logits_path(&self, model: &str, split_index: usize) -> PathBuf {
        self.instance_dir(model, split_index).join("logits.csv")
    }

    pub fn instance_meta_path(&self, model: &str, split_index: usize) -> PathBuf {
        self.instance_dir(model, split_index).join("instance.json")
    }

    pub fn instance_error_path(&self, model: &str, split_index: usize) -> PathBuf {
        self.instance_dir(model, split_index).join("error.txt")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    /// Store key recorded in instance metadata for its weight artifact.
    pub fn weights_ref(&self, model: &str, split_index: usize) -> String {
        format!("instances/{model}/split_{split_index}/weights.bin")
    }

    /// Maps a run-relative path to its artifact kind; `None` marks an
    /// orphan that does not belong to the layout.
    pub fn classify_path(rel: &Path) -> Option<ArtifactKind> {
        let parts: Vec<&str> = rel.iter().filter_map(|p| p.to_str()).collect();
        match parts.as_slice() {
            ["config.snapshot"] => Some(ArtifactKind::ConfigSnapshot),
            ["LOCK"] => Some(ArtifactKind::Lock),
            ["quarantine", ..] => Some(ArtifactKind::Quarantine),
            ["splits", name] if name.starts_with("plan_") && name.ends_with(".json") => {
                Some(ArtifactKind::SplitPlan)
            }
            ["instances", _model, split, file] if split.starts_with("split_") => match *file {
                "weights.bin" => Some(ArtifactKind::Weights),
                "history.csv" => Some(ArtifactKind::History),
                "logits.csv" => Some(ArtifactKind::Logits),
                "instance.json" => Some(ArtifactKind::InstanceMeta),
                "error.txt" => Some(ArtifactKind::InstanceError),
                _ => None,
            },
            ["reports", file] if file.ends_with(".csv") || file.ends_with(".txt") => {
                Some(ArtifactKind::Report)
            }
            _ => None,
        }
    }

    // ----- atomic commits -------------------------------------------------

    /// Write-then-rename commit of `bytes` to `dest` (which must live under
    /// the run root). Committing bytes identical to the existing artifact is
    /// a no-op.
    pub fn atomic_commit(&self, bytes: &[u8], dest: &Path) -> Result<CommitOutcome> {
        if !dest.starts_with(&self.root) {
            return Err(Error::Validation(format!(
                "commit destination {} escapes the store root {}",
                dest.display(),
                self.root.display()
            )));
        }
        if let Ok(existing) = fs::read(dest) {
            if existing == bytes {
                return Ok(CommitOutcome::AlreadyPresent);
            }
        }
        let parent = dest
            .parent()
            .ok_or_else(|| Error::Validation(format!("{} has no parent", dest.display())))?;
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let temp = parent.join(format!(
            "{}.tmp-{}-{}",
            dest.file_name().and_then(|n| n.to_str()).unwrap_or("artifact"),
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed),
        ));
        fs::write(&temp, bytes).map_err(|e| Error::io(&temp, e))?;
        fs::rename(&temp, dest).map_err(|e| {
            let _ = fs::remove_file(&temp);
            Error::Data(format!(
                "could not finalize {}: {e}; the temp file and destination must share a \
                 filesystem, so keep --output-root on one volume",
                dest.display()
            ))
        })?;
        Ok(CommitOutcome::Written)
    }

    /// Takes the single-coordinator lock for this run and sweeps any
    /// crash-orphaned temp files into `quarantine/`.
    pub fn acquire_lock(&self) -> Result<LockGuard> {
        let path = self.lock_path();
        let content = format!(
            "pid = {}\nstarted_unix = {}\n",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        );
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                f.write_all(content.as_bytes()).map_err(|e| Error::io(&path, e))?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Validation(format!(
                    "run \"{}\" is locked by another process ({}); remove the LOCK file if \
                     that process is gone",
                    self.run_id,
                    path.display()
                )));
            }
            Err(e) => return Err(Error::io(&path, e)),
        }
        self.sweep_temp_files()?;
        Ok(LockGuard { path })
    }

    fn sweep_temp_files(&self) -> Result<()> {
        let mut strays = Vec::new();
        collect_temp_files(&self.root, &mut strays)?;
        if strays.is_empty() {
            return Ok(());
        }
        let quarantine = self.quarantine_dir();
        fs::create_dir_all(&quarantine).map_err(|e| Error::io(&quarantine, e))?;
        for (i, stray) in strays.iter().enumerate() {
            let name = stray
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("stray")
                .to_string();
            let dest = quarantine.join(format!("{i}-{name}"));
            fs::rename(stray, &dest).map_err(|e| Error::io(stray, e))?;
        }
        Ok(())
    }

    // ----- instance artifacts ----------------------------------------------

    /// A (model, split) is complete when all of weights, history, logits,
    /// and metadata are committed.
    pub fn instance_complete(&self, model: &str, split_index: usize) -> bool {
        self.weights_path(model, split_index).is_file()
            && self.history_path(model, split_index).is_file()
            && self.logits_path(model, split_index).is_file()
            && self.instance_meta_path(model, split_index).is_file()
    }

    /// Commits the full artifact set of one trained instance. Metadata goes
    /// last: it is the completion marker.
    pub fn write_instance(
        &self,
        instance: &TrainedInstance,
        weights: &[Vec<f64>],
        logits: &[LogitRecord],
    ) -> Result<()> {
        let model = &instance.model_name;
        let split = instance.split_index;
        self.atomic_commit(&encode_weights(weights), &self.weights_path(model, split))?;
        self.atomic_commit(
            history_to_csv(instance).as_bytes(),
            &self.history_path(model, split),
        )?;
        let csv = logit_records_to_csv(logits, &self.run_id)?;
        self.atomic_commit(csv.as_bytes(), &self.logits_path(model, split))?;
        let meta = serde_json::to_vec_pretty(instance)
            .map_err(|e| Error::Data(format!("serialize instance metadata: {e}")))?;
        self.atomic_commit(&meta, &self.instance_meta_path(model, split))?;
        // a successful commit supersedes any stale failure marker
        let _ = fs::remove_file(self.instance_error_path(model, split));
        Ok(())
    }

    /// Records a training failure so the suite summary can report it.
    pub fn write_instance_error(&self, model: &str, split_index: usize, message: &str) {
        let _ = self.atomic_commit(
            message.as_bytes(),
            &self.instance_error_path(model, split_index),
        );
    }

    pub fn load_instance(&self, model: &str, split_index: usize) -> Result<TrainedInstance> {
        let path = self.instance_meta_path(model, split_index);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Data(format!("corrupt instance metadata {}: {e}", path.display())))
    }

    pub fn load_weights(&self, model: &str, split_index: usize) -> Result<Vec<Vec<f64>>> {
        let path = self.weights_path(model, split_index);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        decode_weights(&bytes, &path)
    }

    pub fn load_logits(&self, model: &str, split_index: usize) -> Result<Vec<LogitRecord>> {
        let path = self.logits_path(model, split_index);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        parse_logit_csv(&text, &path)
    }

    /// Loads the complete cache for `models` over the five splits,
    /// naming any missing instance.
    pub fn load_cache(&self, models: &[String]) -> Result<LogitCache> {
        let mut cache = LogitCache::new();
        let mut missing = Vec::new();
        for model in models {
            for &split in &SPLIT_INDICES {
                if !self.logits_path(model, split).is_file() {
                    missing.push(format!("({model}, split {split})"));
                    continue;
                }
                cache.insert_all(self.load_logits(model, split)?)?;
            }
        }
        if !missing.is_empty() {
            return Err(Error::Data(format!(
                "logit cache is missing instances: {}",
                missing.join(", ")
            )));
        }
        Ok(cache)
    }

    pub fn write_report(&self, file_name: &str, content: &str) -> Result<(PathBuf, CommitOutcome)> {
        let path = self.report_dir().join(file_name);
        let outcome = self.atomic_commit(content.as_bytes(), &path)?;
        Ok((path, outcome))
    }

    // ----- config snapshot ---------------------------------------------------

    /// Commits the resolved config as the run's reproducibility contract.
    /// A re-open with a different config is rejected.
    pub fn write_config_snapshot(&self, config: &RunConfig) -> Result<()> {
        let snapshot = config.to_snapshot();
        let path = self.config_path();
        if path.is_file() {
            let existing = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            if existing != snapshot {
                return Err(Error::Validation(format!(
                    "run \"{}\" already exists with a different config; pick a new --run-id \
                     or remove {}",
                    self.run_id,
                    self.root.display()
                )));
            }
            return Ok(());
        }
        self.atomic_commit(snapshot.as_bytes(), &path)?;
        Ok(())
    }

    pub fn load_config_snapshot(&self) -> Result<RunConfig> {
        let path = self.config_path();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        RunConfig::from_snapshot(&text, &path)
    }
}

fn collect_temp_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            if path.file_name().and_then(|n| n.to_str()) != Some("quarantine") {
                collect_temp_files(&path, out)?;
            }
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.contains(".tmp-"))
        {
            out.push(path);
        }
    }
    Ok(())
}

// ----- codecs ----------------------------------------------------------------

/// Weight artifact layout: magic, u32 tensor count, then per tensor a u64
/// length and the f64 little-endian values. Bit-exact round trip.
pub fn encode_weights(tensors: &[Vec<f64>]) -> Vec<u8> {
    let payload: usize = tensors.iter().map(|t| 8 + t.len() * 8).sum();
    let mut out = Vec::with_capacity(8 + 4 + payload);
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for tensor in tensors {
        out.extend_from_slice(&(tensor.len() as u64).to_le_bytes());
        for v in tensor {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<Vec<Vec<f64>>> {
    let corrupt = |msg: &str| Error::Data(format!("corrupt weights {}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[..8] != WEIGHTS_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut offset = 12;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        if offset + 8 > bytes.len() {
            return Err(corrupt("truncated tensor header"));
        }
        let len = u64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap()) as usize;
        offset += 8;
        if offset + len * 8 > bytes.len() {
            return Err(corrupt("truncated tensor data"));
        }
        let mut tensor = Vec::with_capacity(len);
        for i in 0..len {
            let start = offset + i * 8;
            tensor.push(f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap()));
        }
        offset += len * 8;
        tensors.push(tensor);
    }
    if offset != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(tensors)
}

/// Per-epoch history in the external CSV layout.
pub fn history_to_csv(instance: &TrainedInstance) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in &instance.history {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.train_loss, r.val_loss, r.wall_seconds
        ));
    }
    out
}
