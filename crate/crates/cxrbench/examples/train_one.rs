//! Train a single stub-backbone instance under the protocol and print its
//! epoch history.
//!
//! ```bash
//! cargo run --example train_one
//! ```

use cxrbench::dataset::{
    build_splits, compute_class_weights, counts_from_entries, generate_synthetic, Subset,
    SyntheticConfig,
};
use cxrbench::store::RunStore;
use cxrbench::trainer::{train_instance, TrainConfig};

fn main() -> cxrbench::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let manifest = generate_synthetic(
        &SyntheticConfig::new(60, 32, 11, 0.0),
        &dir.path().join("data"),
    )?;
    let split_set = build_splits(&manifest, 0.2, &[1, 2, 3, 4, 5])?;
    let counts = counts_from_entries(manifest.entries(), Subset::Train);
    let config = TrainConfig {
        max_epochs: 20,
        patience: 5,
        // desk-scale datasets see few optimizer steps per epoch, so the
        // demo runs hotter learning rates than the full-scale defaults
        lr_backbone: 1e-3,
        lr_head: 1e-2,
        batch_size: 16,
        ..TrainConfig::with_weights(compute_class_weights(&counts)?)
    };

    let store = RunStore::open(&dir.path().join("runs"), "train-one")?;
    let instance = train_instance("stub", &split_set.plans[0], &config, &manifest, &store, None)?;

    println!("epoch  train_loss  val_loss");
    for record in &instance.history {
        println!(
            "{:>5}  {:>10.6}  {:>8.6}",
            record.epoch, record.train_loss, record.val_loss
        );
    }
    println!(
        "ran {} epochs; best epoch {} (val loss {:.6}); weights at {}",
        instance.epochs_run, instance.best_epoch, instance.best_val_loss, instance.weights_ref
    );
    Ok(())
}
