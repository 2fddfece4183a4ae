//! Orchestration: the full experiment is load manifest, build the five
//! splits, compute class weights from the whole train subset, train the
//! suite, evaluate every instance per subset, run the three ensemble
//! experiments, and emit all reports. Each stage is callable on its own and
//! idempotent over the store, so interrupted runs resume.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::dataset::{
    build_splits, compute_class_weights, counts_from_entries, load_manifest, Manifest,
    ManifestFormat, Subset,
};
use crate::ensemble::{
    rank_models, run_heterogeneous_topk, run_homogeneous, run_topk_all_instances, EvalSubset,
    InstanceKey, LogitCache, SPLIT_INDICES,
};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, evaluate_subsets, AggregateStats, MetricSet};
use crate::report::{render_all, ReportData, SubsetMeans};
use crate::store::{CommitOutcome, RunConfig, RunStore};
use crate::trainer::{train_suite, SuiteSummary, TrainConfig};

/// Outcome of `run_experiment` / `stage_train`.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub run_id: String,
    pub trained: usize,
    pub resumed: usize,
    pub report_paths: Vec<PathBuf>,
    /// True when every report file already held identical bytes.
    pub reports_unchanged: bool,
}

fn open_locked(config: &RunConfig) -> Result<(RunStore, crate::store::LockGuard)> {
    let store = RunStore::open(&config.output_root, &config.run_id)?;
    let lock = store.acquire_lock()?;
    Ok((store, lock))
}

fn train_config_for(config: &RunConfig, manifest: &Manifest) -> Result<TrainConfig> {
    // weights come from the full train subset once, not per split
    let counts = counts_from_entries(manifest.entries(), Subset::Train);
    let class_weights = compute_class_weights(&counts)?;
    let train_config = TrainConfig {
        max_epochs: config.max_epochs,
        patience: config.patience,
        lr_backbone: config.lr_backbone,
        lr_head: config.lr_head,
        batch_size: config.batch_size,
        class_weights,
    };
    train_config.validate()?;
    Ok(train_config)
}

fn run_training(config: &RunConfig, store: &RunStore) -> Result<SuiteSummary> {
    store.write_config_snapshot(config)?;
    let manifest = load_manifest(&config.manifest_path, ManifestFormat::Tsv)?;
    let split_set = build_splits(&manifest, config.val_fraction, &config.seeds)?;
    for warning in &split_set.warnings {
        eprintln!("warning: {warning}");
    }
    for plan in &split_set.plans {
        let bytes = serde_json::to_vec_pretty(plan)
            .map_err(|e| Error::Data(format!("serialize split plan: {e}")))?;
        store.atomic_commit(&bytes, &store.split_plan_path(plan.split_index))?;
    }
    let train_config = train_config_for(config, &manifest)?;
    let summary = train_suite(
        &config.model_names,
        &split_set.plans,
        &train_config,
        &manifest,
        store,
        config.workers,
    )?;
    if !summary.is_fully_complete() {
        let detail: Vec<String> = summary
            .failures
            .iter()
            .map(|f| format!("({}, split {}): {}", f.model, f.split_index, f.message))
            .collect();
        return Err(Error::Training(format!(
            "{} of {} instances failed; completed work is stored and the run is resumable. {}",
            summary.failures.len(),
            summary.failures.len() + summary.completed(),
            detail.join("; ")
        )));
    }
    Ok(summary)
}

/// Training stage: populate the store with every instance's artifacts.
pub fn stage_train(config: &RunConfig) -> Result<ExperimentSummary> {
    let (store, _lock) = open_locked(config)?;
    let summary = run_training(config, &store)?;
    Ok(ExperimentSummary {
        run_id: config.run_id.clone(),
        trained: summary.trained.len(),
        resumed: summary.resumed.len(),
        report_paths: Vec::new(),
        reports_unchanged: true,
    })
}

/// Per-model aggregates plus per-subset means, computed from the cache.
pub struct EvaluationData {
    pub singles: Vec<(String, AggregateStats)>,
    pub subsets: Vec<SubsetMeans>,
}

pub fn compute_evaluation(config: &RunConfig, cache: &LogitCache) -> Result<EvaluationData> {
    let mut singles = Vec::new();
    let mut subsets = Vec::new();
    for model in &config.model_names {
        let mut test_sets = Vec::new();
        let mut per_subset: BTreeMap<EvalSubset, Vec<MetricSet>> = BTreeMap::new();
        for &split in &SPLIT_INDICES {
            let key = InstanceKey::new(model.clone(), split);
            let by_subset = evaluate_subsets(&key, cache, config.tie_rule)?;
            for (subset, set) in &by_subset {
                per_subset.entry(*subset).or_default().push(*set);
            }
            test_sets.push(by_subset[&EvalSubset::Test]);
        }
        singles.push((model.clone(), aggregate(&test_sets)?));
        let by_subset = per_subset
            .into_iter()
            .map(|(subset, sets)| {
                let mean = |f: fn(&MetricSet) -> f64| {
                    sets.iter().map(f).sum::<f64>() / sets.len() as f64
                };
                (
                    subset,
                    MetricSet {
                        acc: mean(|s| s.acc),
                        tpr: mean(|s| s.tpr),
                        ppv: mean(|s| s.ppv),
                        f1: mean(|s| s.f1),
                        degenerate: sets.iter().any(|s| s.degenerate),
                    },
                )
            })
            .collect();
        subsets.push(SubsetMeans {
            model: model.clone(),
            by_subset,
        });
    }
    // report order: descending mean F1
    let ranking = rank_models(&singles);
    let position = |name: &str| ranking.iter().position(|r| r == name).unwrap_or(usize::MAX);
    singles.sort_by_key(|(name, _)| position(name));
    subsets.sort_by_key(|s| position(&s.model));
    Ok(EvaluationData { singles, subsets })
}

/// The three ensemble experiments.
pub struct EnsembleData {
    pub heterogeneous: Vec<(String, AggregateStats)>,
    pub homogeneous: Vec<(String, MetricSet, crate::ensemble::GainReport)>,
    pub topk_all: Vec<(String, MetricSet, crate::ensemble::GainReport)>,
}

pub fn compute_ensembles(
    config: &RunConfig,
    cache: &LogitCache,
    singles: &[(String, AggregateStats)],
) -> Result<EnsembleData> {
    let ranking = rank_models(singles);
    let total = ranking.len();
    // k runs over 2..=min(7, #models); the all-models configuration only
    // adds a distinct row when more than seven models are present
    let mut ks: Vec<(usize, String)> = (2..=total.min(7))
        .map(|k| (k, format!("Top {k} models")))
        .collect();
    if total > 7 {
        ks.push((total, "All models".to_string()));
    }
    let mut heterogeneous = Vec::new();
    let mut topk_all = Vec::new();
    for (k, label) in ks {
        let hetero = run_heterogeneous_topk(k, &ranking, cache, config.tie_rule)?;
        heterogeneous.push((label.clone(), hetero.stats));
        let all = run_topk_all_instances(k, &ranking, cache, config.tie_rule)?;
        topk_all.push((label, all.ensemble, all.gains));
    }
    let mut homogeneous = Vec::new();
    for model in &ranking {
        let outcome = run_homogeneous(model, cache, config.tie_rule)?;
        homogeneous.push((model.clone(), outcome.ensemble, outcome.gains));
    }
    Ok(EnsembleData {
        heterogeneous,
        homogeneous,
        topk_all,
    })
}

/// Which report families to (re-)emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportScope {
    /// Per-model aggregate and per-subset tables.
    Evaluation,
    /// The three ensemble tables.
    Ensembles,
    All,
}

/// Builds reports from the store's logit cache and commits the files in
/// `scope`.
pub fn emit_reports(
    config: &RunConfig,
    store: &RunStore,
    scope: ReportScope,
) -> Result<(Vec<PathBuf>, bool)> {
    let cache = store.load_cache(&config.model_names)?;
    let evaluation = compute_evaluation(config, &cache)?;
    let ensembles = compute_ensembles(config, &cache, &evaluation.singles)?;
    let data = ReportData {
        singles: evaluation.singles,
        subsets: evaluation.subsets,
        heterogeneous: ensembles.heterogeneous,
        homogeneous: ensembles.homogeneous,
        topk_all: ensembles.topk_all,
        tie_rule: config.tie_rule,
    };
    let in_scope = |name: &str| match scope {
        ReportScope::All => true,
        ReportScope::Evaluation => !name.starts_with("ensemble_"),
        ReportScope::Ensembles => name.starts_with("ensemble_"),
    };
    let mut paths = Vec::new();
    let mut unchanged = true;
    for (name, content) in render_all(&data) {
        if !in_scope(&name) {
            continue;
        }
        let (path, outcome) = store.write_report(&name, &content)?;
        unchanged &= outcome == CommitOutcome::AlreadyPresent;
        paths.push(path);
    }
    Ok((paths, unchanged))
}

/// The end-to-end protocol over one config: train everything, evaluate,
/// run the ensembles, and emit reports. Idempotent: a rerun over a complete
/// store trains nothing and re-emits byte-identical reports.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let (store, _lock) = open_locked(config)?;
    let summary = run_training(config, &store)?;
    let (report_paths, reports_unchanged) = emit_reports(config, &store, ReportScope::All)?;
    Ok(ExperimentSummary {
        run_id: config.run_id.clone(),
        trained: summary.trained.len(),
        resumed: summary.resumed.len(),
        report_paths,
        reports_unchanged,
    })
}

