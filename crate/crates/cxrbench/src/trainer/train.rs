use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::time::Instant;

use crate::dataset::{Label, Manifest, SplitPlan, Subset};
use crate::ensemble::{EvalSubset, LogitPair, LogitRecord};
use crate::error::{Error, Result};
use crate::model_zoo::{
    build_classifier, decode_png, preprocess, registry_lookup, BackboneSpec, Classifier, HeadSpec,
    InitMode, RasterImage,
};
use crate::nn::{Adam, ParamGroup, Tensor3};
use crate::seed::{derive_seed, fnv1a};
use crate::store::RunStore;

use super::early_stop::{early_stop_step, EarlyStopState, StopDecision};
use super::loss::weighted_cross_entropy;
use super::{EpochRecord, TrainConfig, TrainedInstance};

const SHUFFLE_STREAM: u64 = 0x7368_7566;

/// Decoded images shared across the instances of a suite, so each file is
/// read once.
pub type RasterCache = HashMap<String, RasterImage>;

#[derive(Debug, Clone)]
pub struct LoadedExample {
    pub image_id: String,
    pub tensor: Tensor3,
    pub label: Label,
}

/// One instance's preprocessed inputs, keyed by its role in the plan.
#[derive(Debug, Clone)]
pub struct InstanceData {
    pub train: Vec<LoadedExample>,
    pub val: Vec<LoadedExample>,
    pub test: Vec<LoadedExample>,
}

/// Reads every manifest image into memory.
pub fn load_rasters(manifest: &Manifest) -> Result<RasterCache> {
    let mut cache = RasterCache::new();
    for entry in manifest.entries() {
        let path = manifest.resolve_path(entry);
        if !path.is_file() {
            return Err(Error::Data(format!(
                "image file missing for id \"{}\": {}",
                entry.image_id,
                path.display()
            )));
        }
        cache.insert(entry.image_id.clone(), decode_png(&path)?);
    }
    Ok(cache)
}

fn example_for_id(
    manifest: &Manifest,
    id: &str,
    spec: &BackboneSpec,
    rasters: Option<&RasterCache>,
) -> Result<LoadedExample> {
    let entry = manifest
        .entry_by_id(id)
        .ok_or_else(|| Error::Data(format!("split plan names unknown image id \"{id}\"")))?;
    let raster = match rasters.and_then(|c| c.get(id)) {
        Some(r) => r.clone(),
        None => {
            let path = manifest.resolve_path(entry);
            if !path.is_file() {
                return Err(Error::Data(format!(
                    "image file missing for id \"{id}\": {}",
                    path.display()
                )));
            }
            decode_png(&path)?
        }
    };
    Ok(LoadedExample {
        image_id: entry.image_id.clone(),
        tensor: preprocess(&raster, spec)?,
        label: entry.label,
    })
}

/// Decodes and preprocesses the plan's train/val ids plus the manifest's
/// test subset for one backbone's input resolution.
pub fn load_instance_data(
    manifest: &Manifest,
    plan: &SplitPlan,
    spec: &BackboneSpec,
    rasters: Option<&RasterCache>,
) -> Result<InstanceData> {
    let load_ids = |ids: &[String]| -> Result<Vec<LoadedExample>> {
        ids.iter()
            .map(|id| example_for_id(manifest, id, spec, rasters))
            .collect()
    };
    let train = load_ids(&plan.train_ids)?;
    let val = load_ids(&plan.val_ids)?;
    let mut test_ids: Vec<String> = manifest
        .subset_entries(Subset::Test)
        .map(|e| e.image_id.clone())
        .collect();
    test_ids.sort_unstable();
    let test = test_ids
        .iter()
        .map(|id| example_for_id(manifest, id, spec, rasters))
        .collect::<Result<Vec<_>>>()?;
    Ok(InstanceData { train, val, test })
}

fn mean_weighted_loss(
    classifier: &mut Classifier,
    examples: &[LoadedExample],
    config: &TrainConfig,
) -> f64 {
    let mut sum = 0.0;
    for ex in examples {
        let logits = classifier.forward_eval(&ex.tensor);
        let (loss, _) = weighted_cross_entropy(&logits, ex.label, &config.class_weights);
        sum += loss;
    }
    sum / examples.len() as f64
}

fn collect_logits(
    classifier: &mut Classifier,
    data: &InstanceData,
    model_name: &str,
    split_index: usize,
) -> Vec<LogitRecord> {
    let mut records = Vec::new();
    for (subset, examples) in [
        (EvalSubset::Train, &data.train),
        (EvalSubset::Validation, &data.val),
        (EvalSubset::Test, &data.test),
    ] {
        for ex in examples {
            let logits = classifier.forward_eval(&ex.tensor);
            records.push(LogitRecord {
                image_id: ex.image_id.clone(),
                model: model_name.to_string(),
                split_index,
                subset,
                logits: LogitPair::new(logits[0], logits[1]),
                true_label: ex.label,
            });
        }
    }
    records
}

/// Trains one (model, split plan) instance under the protocol and persists
/// its weights, history, and logit cache to the store.
///
/// Every epoch runs seeded-shuffled minibatches of class-weighted
/// cross-entropy through Adam, with `lr_backbone` on the trunk parameters
/// and `lr_head` on the head. Validation loss (also class-weighted) drives
/// early stopping; the returned weights are the snapshot of the best epoch.
pub fn train_instance(
    model_name: &str,
    plan: &SplitPlan,
    config: &TrainConfig,
    manifest: &Manifest,
    store: &RunStore,
    rasters: Option<&RasterCache>,
) -> Result<TrainedInstance> {
    config.validate()?;
    let spec = registry_lookup(model_name)?;
    let instance_seed = derive_seed(plan.seed, fnv1a(model_name));
    let mut classifier =
        build_classifier(spec, &HeadSpec::default(), InitMode::Random, instance_seed)?;
    let data = load_instance_data(manifest, plan, spec, rasters)?;
    if data.train.is_empty() || data.val.is_empty() || data.test.is_empty() {
        return Err(Error::Validation(format!(
            "instance ({model_name}, split {}) needs nonempty train/val/test sets",
            plan.split_index
        )));
    }

    let mut adam = Adam::new();
    let mut stop_state = EarlyStopState::new();
    let mut best_snapshot: Option<Vec<Vec<f64>>> = None;
    let mut history: Vec<EpochRecord> = Vec::new();
    let started = Instant::now();
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=config.max_epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(instance_seed, SHUFFLE_STREAM.wrapping_add(epoch as u64)));
        order.shuffle(&mut rng);
        let mut epoch_loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            classifier.zero_grads();
            let mut batch_loss_sum = 0.0;
            for &idx in batch {
                let ex = &data.train[idx];
                let (logits, cache) = classifier.forward_train(&ex.tensor);
                let (loss, grad) = weighted_cross_entropy(&logits, ex.label, &config.class_weights);
                batch_loss_sum += loss;
                classifier.backward(&ex.tensor, &cache, grad);
            }
            classifier.scale_grads(1.0 / batch.len() as f64);
            let mut slots = classifier.param_slots();
            adam.step(&mut slots, |group| match group {
                ParamGroup::Backbone => config.lr_backbone,
                ParamGroup::Head => config.lr_head,
            });
            epoch_loss_sum += batch_loss_sum;
        }
        let train_loss = epoch_loss_sum / data.train.len() as f64;
        let val_loss = mean_weighted_loss(&mut classifier, &data.val, config);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            let msg = format!(
                "diverged: non-finite loss at epoch {epoch} for ({model_name}, split {})",
                plan.split_index
            );
            store.write_instance_error(model_name, plan.split_index, &msg);
            return Err(Error::Training(msg));
        }
        let (next_state, decision) = early_stop_step(stop_state, epoch, val_loss, config.patience)?;
        if next_state.best_epoch == epoch {
            best_snapshot = Some(classifier.snapshot());
        }
        stop_state = next_state;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if decision == StopDecision::Stop {
            break;
        }
    }

    let snapshot = best_snapshot
        .ok_or_else(|| Error::Training("no epoch improved on the initial loss".into()))?;
    classifier.restore(&snapshot)?;
    let logits = collect_logits(&mut classifier, &data, model_name, plan.split_index);
    let instance = TrainedInstance {
        model_name: model_name.to_string(),
        split_index: plan.split_index,
        weights_ref: store.weights_ref(model_name, plan.split_index),
        epochs_run: history.len(),
        best_epoch: stop_state.best_epoch,
        best_val_loss: stop_state.best_loss,
        history,
        instance_seed,
    };
    instance.validate(config.max_epochs, config.patience)?;
    store.write_instance(&instance, &snapshot, &logits)?;
    Ok(instance)
}

#[derive(Debug, Clone)]
pub struct InstanceFailure {
    pub model: String,
    pub split_index: usize,
    pub message: String,
}

/// Outcome of a suite run; failures do not abort the remaining instances.
#[derive(Debug, Clone, Default)]
pub struct SuiteSummary {
    pub trained: Vec<TrainedInstance>,
    pub resumed: Vec<TrainedInstance>,
    pub failures: Vec<InstanceFailure>,
}

impl SuiteSummary {
    pub fn completed(&self) -> usize {
        self.trained.len() + self.resumed.len()
    }

    pub fn is_fully_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Trains every model over the same five split plans, resuming past
/// completed instances. Instance i of every model uses plan i. With
/// `workers > 1`, instances train in parallel threads; results are
/// identical either way because each instance is independently seeded.
pub fn train_suite(
    model_names: &[String],
    plans: &[SplitPlan],
    config: &TrainConfig,
    manifest: &Manifest,
    store: &RunStore,
    workers: usize,
) -> Result<SuiteSummary> {
    if plans.len() != 5 {
        return Err(Error::Validation(format!(
            "expected exactly 5 split plans, got {}",
            plans.len()
        )));
    }
    if model_names.is_empty() {
        return Err(Error::Validation("no models to train".into()));
    }
    // duplicate names would race two workers onto one instance directory
    let mut seen = std::collections::HashSet::new();
    for model in model_names {
        if !seen.insert(model.as_str()) {
            return Err(Error::Validation(format!("duplicate model \"{model}\"")));
        }
    }
    let rasters = load_rasters(manifest)?;

    let mut summary = SuiteSummary::default();
    let mut jobs: Vec<(&String, &SplitPlan)> = Vec::new();
    for model in model_names {
        for plan in plans {
            if store.instance_complete(model, plan.split_index) {
                summary.resumed.push(store.load_instance(model, plan.split_index)?);
            } else {
                jobs.push((model, plan));
            }
        }
    }

    let workers = workers.max(1).min(jobs.len().max(1));
    let mut results: Vec<(String, usize, Result<TrainedInstance>)> = if workers <= 1 {
        jobs.iter()
            .map(|(model, plan)| {
                let outcome = train_instance(model, plan, config, manifest, store, Some(&rasters));
                (model.to_string(), plan.split_index, outcome)
            })
            .collect()
    } else {
        let chunks: Vec<Vec<(&String, &SplitPlan)>> = (0..workers)
            .map(|w| jobs.iter().skip(w).step_by(workers).copied().collect())
            .collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    let rasters = &rasters;
                    scope.spawn(move || {
                        chunk
                            .into_iter()
                            .map(|(model, plan)| {
                                let outcome = train_instance(
                                    model,
                                    plan,
                                    config,
                                    manifest,
                                    store,
                                    Some(rasters),
                                );
                                (model.to_string(), plan.split_index, outcome)
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("training worker panicked"))
                .collect()
        })
    };
    results.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));

    for (model, split_index, outcome) in results {
        match outcome {
            Ok(instance) => summary.trained.push(instance),
            Err(e) => {
                let message = e.to_string();
                store.write_instance_error(&model, split_index, &message);
                summary.failures.push(InstanceFailure {
                    model,
                    split_index,
                    message,
                });
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_splits, generate_synthetic, ClassWeights, SyntheticConfig};
    use crate::nn::ParamGroup;

    fn tiny_setup() -> (tempfile::TempDir, Manifest, Vec<SplitPlan>, RunStore) {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_synthetic(
            &SyntheticConfig::new(10, 16, 7, 0.0),
            &dir.path().join("data"),
        )
        .unwrap();
        let splits = build_splits(&manifest, 0.25, &[11, 12, 13, 14, 15]).unwrap();
        let store = RunStore::open(&dir.path().join("runs"), "unit").unwrap();
        (dir, manifest, splits.plans, store)
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            max_epochs: 3,
            patience: 2,
            lr_backbone: 1e-4,
            lr_head: 1e-3,
            batch_size: 8,
            class_weights: ClassWeights::uniform(),
        }
    }

    #[test]
    fn trains_and_persists_one_instance() {
        let (_dir, manifest, plans, store) = tiny_setup();
        let instance =
            train_instance("stub", &plans[0], &quick_config(), &manifest, &store, None).unwrap();
        assert_eq!(instance.split_index, 1);
        assert!(instance.epochs_run <= 3);
        assert!(instance.best_epoch >= 1);
        assert_eq!(instance.history.len(), instance.epochs_run);
        assert!(store.instance_complete("stub", 1));
        // logit cache covers train + val + test exactly once each
        let logits = store.load_logits("stub", 1).unwrap();
        assert_eq!(logits.len(), manifest.entries().len());
    }

    #[test]
    fn restored_weights_reproduce_best_epoch_outputs_bit_for_bit() {
        let (_dir, manifest, plans, store) = tiny_setup();
        let config = quick_config();
        train_instance("stub", &plans[1], &config, &manifest, &store, None).unwrap();
        let spec = registry_lookup("stub").unwrap();
        let stored = store.load_weights("stub", 2).unwrap();
        let instance = store.load_instance("stub", 2).unwrap();
        let mut reloaded = build_classifier(
            spec,
            &HeadSpec::default(),
            InitMode::Random,
            instance.instance_seed,
        )
        .unwrap();
        reloaded.restore(&stored).unwrap();
        // forward outputs on the cached probe images must match the logits
        // computed at training time exactly
        let data = load_instance_data(&manifest, &plans[1], spec, None).unwrap();
        let persisted = store.load_logits("stub", 2).unwrap();
        for ex in data.test.iter().take(4) {
            let fresh = reloaded.forward_eval(&ex.tensor);
            let cached = persisted
                .iter()
                .find(|r| r.image_id == ex.image_id && r.subset == EvalSubset::Test)
                .unwrap();
            assert_eq!(fresh[0], cached.logits.negative);
            assert_eq!(fresh[1], cached.logits.positive);
        }
    }

    #[test]
    fn flat_losses_run_to_max_epochs_when_patience_cannot_fire() {
        // patience = max_epochs - 1 can only stop at the final epoch
        let (_dir, manifest, plans, store) = tiny_setup();
        let config = TrainConfig {
            max_epochs: 4,
            patience: 3,
            ..quick_config()
        };
        let instance =
            train_instance("stub", &plans[2], &config, &manifest, &store, None).unwrap();
        assert!(instance.epochs_run <= 4);
        assert!(instance.epochs_run <= instance.best_epoch + config.patience);
    }

    #[test]
    fn two_tier_rates_freeze_the_zero_rate_group() {
        let spec = registry_lookup("stub").unwrap();
        let mut classifier =
            build_classifier(spec, &HeadSpec::default(), InitMode::Random, 3).unwrap();
        let input = Tensor3::from_fn(32, 32, 3, |y, x, c| ((y * x + c) % 9) as f64 / 9.0);
        let before = classifier.snapshot();

        let run_step = |classifier: &mut Classifier, lr_backbone: f64, lr_head: f64| {
            classifier.zero_grads();
            let (logits, cache) = classifier.forward_train(&input);
            let (_, grad) =
                weighted_cross_entropy(&logits, Label::Positive, &ClassWeights::uniform());
            classifier.backward(&input, &cache, grad);
            let mut adam = Adam::new();
            let mut slots = classifier.param_slots();
            adam.step(&mut slots, |g| match g {
                ParamGroup::Backbone => lr_backbone,
                ParamGroup::Head => lr_head,
            });
        };

        run_step(&mut classifier, 1e-3, 0.0);
        let after_backbone_only = classifier.snapshot();
        // slots 0..4 are backbone tensors, 4.. are head tensors
        assert_ne!(before[0], after_backbone_only[0]);
        assert_eq!(before[4], after_backbone_only[4]);
        assert_eq!(before[6], after_backbone_only[6]);

        classifier.restore(&before).unwrap();
        run_step(&mut classifier, 0.0, 1e-3);
        let after_head_only = classifier.snapshot();
        assert_eq!(before[0], after_head_only[0]);
        assert_eq!(before[2], after_head_only[2]);
        assert_ne!(after_head_only[4], before[4]);
    }

    #[test]
    fn suite_trains_every_model_split_pair_once_and_resumes() {
        let (_dir, manifest, plans, store) = tiny_setup();
        let models = vec!["stub".to_string(), "stub-wide".to_string()];
        let summary =
            train_suite(&models, &plans, &quick_config(), &manifest, &store, 1).unwrap();
        assert_eq!(summary.trained.len(), 10);
        assert!(summary.failures.is_empty());
        let mut pairs: Vec<(String, usize)> = summary
            .trained
            .iter()
            .map(|i| (i.model_name.clone(), i.split_index))
            .collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 10, "every (model, split) pair unique");
        // logit cache: one record per instance x image
        let mut total = 0;
        for model in &models {
            for split in 1..=5 {
                total += store.load_logits(model, split).unwrap().len();
            }
        }
        assert_eq!(total, 10 * manifest.entries().len());

        // rerun resumes everything with zero new trainings
        let summary2 =
            train_suite(&models, &plans, &quick_config(), &manifest, &store, 1).unwrap();
        assert_eq!(summary2.trained.len(), 0);
        assert_eq!(summary2.resumed.len(), 10);
    }

    #[test]
    fn missing_image_file_is_a_data_error_naming_the_id() {
        let (dir, manifest, plans, store) = tiny_setup();
        let victim = &manifest.entries()[3];
        std::fs::remove_file(manifest.resolve_path(victim)).unwrap();
        let err = train_instance("stub", &plans[0], &quick_config(), &manifest, &store, None)
            .unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
        assert!(err.to_string().contains(&victim.image_id), "{err}");
        drop(dir);
    }

    #[test]
    fn suite_rejects_duplicate_model_names() {
        let (_dir, manifest, plans, store) = tiny_setup();
        let models = vec!["stub".to_string(), "stub".to_string()];
        let err =
            train_suite(&models, &plans, &quick_config(), &manifest, &store, 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn suite_records_failures_and_continues() {
        let (_dir, manifest, plans, store) = tiny_setup();
        // DenseNet169 has no trainable implementation here, so its five
        // instances fail while stub completes
        let models = vec!["DenseNet169".to_string(), "stub".to_string()];
        let summary =
            train_suite(&models, &plans, &quick_config(), &manifest, &store, 1).unwrap();
        assert_eq!(summary.trained.len(), 5);
        assert_eq!(summary.failures.len(), 5);
        assert!(store.instance_error_path("DenseNet169", 1).is_file());
        assert!(!summary.is_fully_complete());
    }

    #[test]
    fn parallel_and_sequential_suites_agree() {
        let (_dir, manifest, plans, store_seq) = tiny_setup();
        let dir2 = tempfile::tempdir().unwrap();
        let store_par = RunStore::open(dir2.path(), "par").unwrap();
        let models = vec!["stub".to_string()];
        let seq =
            train_suite(&models, &plans, &quick_config(), &manifest, &store_seq, 1).unwrap();
        let par =
            train_suite(&models, &plans, &quick_config(), &manifest, &store_par, 3).unwrap();
        assert_eq!(seq.trained.len(), par.trained.len());
        for (a, b) in seq.trained.iter().zip(&par.trained) {
            assert_eq!(a.model_name, b.model_name);
            assert_eq!(a.split_index, b.split_index);
            assert_eq!(a.best_epoch, b.best_epoch);
            assert_eq!(a.best_val_loss, b.best_val_loss);
            // weights are bit-identical regardless of worker count
            assert_eq!(
                store_seq.load_weights(&a.model_name, a.split_index).unwrap(),
                store_par.load_weights(&b.model_name, b.split_index).unwrap()
            );
        }
    }
}
