//! Evaluate one trained instance on the train, validation, and test subsets
//! from its cached logits.
//!
//! ```bash
//! cargo run --example evaluate_instance
//! ```

use cxrbench::dataset::{
    build_splits, compute_class_weights, counts_from_entries, generate_synthetic, Subset,
    SyntheticConfig,
};
use cxrbench::ensemble::{InstanceKey, LogitCache, TieRule};
use cxrbench::metrics::evaluate_subsets;
use cxrbench::store::RunStore;
use cxrbench::trainer::{train_instance, TrainConfig};

fn main() -> cxrbench::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let manifest = generate_synthetic(
        &SyntheticConfig::new(60, 32, 5, 0.2),
        &dir.path().join("data"),
    )?;
    let split_set = build_splits(&manifest, 0.2, &[1, 2, 3, 4, 5])?;
    let counts = counts_from_entries(manifest.entries(), Subset::Train);
    let config = TrainConfig {
        max_epochs: 15,
        patience: 4,
        lr_backbone: 1e-3,
        lr_head: 1e-2,
        batch_size: 16,
        ..TrainConfig::with_weights(compute_class_weights(&counts)?)
    };
    let store = RunStore::open(&dir.path().join("runs"), "evaluate-one")?;
    train_instance("stub", &split_set.plans[0], &config, &manifest, &store, None)?;

    // metrics come from the persisted logit cache, not from a live model
    let mut cache = LogitCache::new();
    cache.insert_all(store.load_logits("stub", 1)?)?;
    let by_subset = evaluate_subsets(&InstanceKey::new("stub", 1), &cache, TieRule::Positive)?;
    println!("subset       acc     tpr     ppv     f1");
    for (subset, m) in &by_subset {
        println!(
            "{:<10} {:.4}  {:.4}  {:.4}  {:.4}",
            subset.as_str(),
            m.acc,
            m.tpr,
            m.ppv,
            m.f1
        );
    }
    Ok(())
}
