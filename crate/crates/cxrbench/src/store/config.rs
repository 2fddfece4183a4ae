use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::ensemble::TieRule;
use crate::error::{Error, Result};

/// Fully resolved run configuration; the snapshot of this struct stored at
/// run start is the reproducibility contract.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub run_id: String,
    pub manifest_path: PathBuf,
    pub output_root: PathBuf,
    pub model_names: Vec<String>,
    pub seeds: Vec<u64>,
    pub val_fraction: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr_backbone: f64,
    pub lr_head: f64,
    pub batch_size: usize,
    pub workers: usize,
    pub tie_rule: TieRule,
}

/// Partial configuration collected from one source (config file, CLI flags).
/// Later overlays win field-by-field.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverlay {
    pub run_id: Option<String>,
    pub manifest: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
    pub models: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub val_fraction: Option<f64>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub lr_backbone: Option<f64>,
    pub lr_head: Option<f64>,
    pub batch_size: Option<usize>,
    pub workers: Option<usize>,
    pub tie_rule: Option<TieRule>,
}

impl ConfigOverlay {
    /// Parses the flat `key = value` document. `#` starts a comment,
    /// unknown keys are rejected, relative paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, path: &Path, base_dir: &Path) -> Result<ConfigOverlay> {
        let mut overlay = ConfigOverlay::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg,
            };
            let parse_f64 =
                |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number \"{v}\"")));
            let parse_usize =
                |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad count \"{v}\"")));
            let resolve = |v: &str| {
                let p = PathBuf::from(v);
                if p.is_absolute() {
                    p
                } else {
                    base_dir.join(p)
                }
            };
            match key {
                "run_id" => overlay.run_id = Some(value.to_string()),
                "manifest" => overlay.manifest = Some(resolve(value)),
                "output_root" => overlay.output_root = Some(resolve(value)),
                "models" => {
                    overlay.models =
                        Some(value.split(',').map(|m| m.trim().to_string()).collect())
                }
                "seeds" => {
                    let seeds: Result<Vec<u64>> = value
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<u64>()
                                .map_err(|_| bad(format!("bad seed \"{s}\"")))
                        })
                        .collect();
                    overlay.seeds = Some(seeds?);
                }
                "val_fraction" => overlay.val_fraction = Some(parse_f64(value)?),
                "max_epochs" => overlay.max_epochs = Some(parse_usize(value)?),
                "patience" => overlay.patience = Some(parse_usize(value)?),
                "lr_backbone" => overlay.lr_backbone = Some(parse_f64(value)?),
                "lr_head" => overlay.lr_head = Some(parse_f64(value)?),
                "batch_size" => overlay.batch_size = Some(parse_usize(value)?),
                "workers" => overlay.workers = Some(parse_usize(value)?),
                "tie_rule" => overlay.tie_rule = Some(TieRule::parse(value)?),
                other => {
                    return Err(bad(format!("unknown config key \"{other}\"")));
                }
            }
        }
        Ok(overlay)
    }

    /// Field-by-field merge where `self` wins over `base`.
    pub fn over(self, base: ConfigOverlay) -> ConfigOverlay {
        ConfigOverlay {
            run_id: self.run_id.or(base.run_id),
            manifest: self.manifest.or(base.manifest),
            output_root: self.output_root.or(base.output_root),
            models: self.models.or(base.models),
            seeds: self.seeds.or(base.seeds),
            val_fraction: self.val_fraction.or(base.val_fraction),
            max_epochs: self.max_epochs.or(base.max_epochs),
            patience: self.patience.or(base.patience),
            lr_backbone: self.lr_backbone.or(base.lr_backbone),
            lr_head: self.lr_head.or(base.lr_head),
            batch_size: self.batch_size.or(base.batch_size),
            workers: self.workers.or(base.workers),
            tie_rule: self.tie_rule.or(base.tie_rule),
        }
    }
}

/// Fills protocol defaults, applies the `CXRBENCH_ROOT` fallback for the
/// output root, and validates the result.
pub fn resolve_config(overlay: ConfigOverlay, env_root: Option<PathBuf>) -> Result<RunConfig> {
    let require = |what: &str| Error::Validation(format!("missing required config value: {what}"));
    let config = RunConfig {
        run_id: overlay.run_id.ok_or_else(|| require("run_id"))?,
        manifest_path: overlay.manifest.ok_or_else(|| require("manifest"))?,
        output_root: overlay
            .output_root
            .or(env_root)
            .unwrap_or_else(|| PathBuf::from(".")),
        model_names: overlay.models.ok_or_else(|| require("models"))?,
        seeds: overlay.seeds.ok_or_else(|| require("seeds"))?,
        val_fraction: overlay.val_fraction.unwrap_or(0.2),
        max_epochs: overlay.max_epochs.unwrap_or(50),
        patience: overlay.patience.unwrap_or(10),
        lr_backbone: overlay.lr_backbone.unwrap_or(1e-5),
        lr_head: overlay.lr_head.unwrap_or(1e-3),
        batch_size: overlay.batch_size.unwrap_or(32),
        workers: overlay.workers.unwrap_or(1),
        tie_rule: overlay.tie_rule.unwrap_or_default(),
    };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model_names.is_empty() {
            return Err(Error::Validation("models list is empty".into()));
        }
        if self.seeds.len() != 5 {
            return Err(Error::Validation(format!(
                "expected exactly 5 seeds, got {}",
                self.seeds.len()
            )));
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Validation("seeds must be distinct".into()));
        }
        let mut model_set = HashSet::new();
        for m in &self.model_names {
            if !model_set.insert(m.as_str()) {
                return Err(Error::Validation(format!("duplicate model \"{m}\"")));
            }
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.workers == 0 {
            return Err(Error::Validation("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical snapshot serialization; parse and re-emit is the identity.
    pub fn to_snapshot(&self) -> String {
        format!(
            "# resolved run configuration\n\
             run_id = {}\n\
             manifest = {}\n\
             output_root = {}\n\
             models = {}\n\
             seeds = {}\n\
             val_fraction = {}\n\
             max_epochs = {}\n\
             patience = {}\n\
             lr_backbone = {}\n\
             lr_head = {}\n\
             batch_size = {}\n\
             workers = {}\n\
             tie_rule = {}\n",
            self.run_id,
            self.manifest_path.display(),
            self.output_root.display(),
            self.model_names.join(","),
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
            self.val_fraction,
            self.max_epochs,
            self.patience,
            self.lr_backbone,
            self.lr_head,
            self.batch_size,
            self.workers,
            self.tie_rule.as_str(),
        )
    }

    pub fn from_snapshot(text: &str, path: &Path) -> Result<RunConfig> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        resolve_config(ConfigOverlay::parse(text, path, base)?, None)
    }

    #[cfg(test)]
    pub(crate) fn example_for_tests() -> RunConfig {
        RunConfig {
            run_id: "test-run".into(),
            manifest_path: PathBuf::from("/tmp/manifest.tsv"),
            output_root: PathBuf::from("/tmp/out"),
            model_names: vec!["stub".into()],
            seeds: vec![1, 2, 3, 4, 5],
            val_fraction: 0.2,
            max_epochs: 10,
            patience: 3,
            lr_backbone: 1e-4,
            lr_head: 1e-3,
            batch_size: 8,
            workers: 1,
            tie_rule: TieRule::Positive,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_merge_resolve() {
        let text = "\
# a comment
run_id = demo
manifest = data/manifest.tsv
models = stub, stub-wide
seeds = 1,2,3,4,5
val_fraction = 0.25 # trailing comment
";
        let overlay =
            ConfigOverlay::parse(text, Path::new("/cfg/run.conf"), Path::new("/cfg")).unwrap();
        let flags = ConfigOverlay {
            run_id: Some("flag-wins".into()),
            ..Default::default()
        };
        let config = resolve_config(flags.over(overlay), Some(PathBuf::from("/env/root"))).unwrap();
        assert_eq!(config.run_id, "flag-wins");
        assert_eq!(config.manifest_path, PathBuf::from("/cfg/data/manifest.tsv"));
        assert_eq!(config.output_root, PathBuf::from("/env/root"));
        assert_eq!(config.model_names, vec!["stub", "stub-wide"]);
        assert_eq!(config.val_fraction, 0.25);
        assert_eq!(config.max_epochs, 50);
        assert_eq!(config.patience, 10);
        assert_eq!(config.lr_backbone, 1e-5);
        assert_eq!(config.lr_head, 1e-3);
        assert_eq!(config.batch_size, 32);
        assert_eq!(config.tie_rule, TieRule::Positive);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ConfigOverlay::parse("learning_rate = 3\n", Path::new("c"), Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
    }

    #[test]
    fn missing_required_values_are_named() {
        let err = resolve_config(ConfigOverlay::default(), None).unwrap_err();
        assert!(err.to_string().contains("run_id"));
    }

    #[test]
    fn snapshot_round_trips() {
        let config = RunConfig::example_for_tests();
        let snapshot = config.to_snapshot();
        let back = RunConfig::from_snapshot(&snapshot, Path::new("/tmp/config.snapshot")).unwrap();
        assert_eq!(back, config);
        assert_eq!(back.to_snapshot(), snapshot);
    }

    #[test]
    fn validation_rejects_bad_seed_lists() {
        let mut config = RunConfig::example_for_tests();
        config.seeds = vec![1, 2, 3];
        assert!(config.validate().is_err());
        config.seeds = vec![1, 1, 2, 3, 4];
        assert!(config.validate().is_err());
    }
}
