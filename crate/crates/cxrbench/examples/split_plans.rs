//! Build the five stratified train/validation plans shared by every model.
//!
//! ```bash
//! cargo run --example split_plans
//! ```

use cxrbench::dataset::{build_splits, generate_synthetic, SyntheticConfig};

fn main() -> cxrbench::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let manifest = generate_synthetic(&SyntheticConfig::new(50, 16, 3, 0.2), dir.path())?;

    let seeds = [101, 102, 103, 104, 105];
    let split_set = build_splits(&manifest, 0.2, &seeds)?;
    for warning in &split_set.warnings {
        println!("warning: {warning}");
    }
    for plan in &split_set.plans {
        let val_neg = plan.val_ids.iter().filter(|id| id.contains("-neg-")).count();
        let val_pos = plan.val_ids.iter().filter(|id| id.contains("-pos-")).count();
        println!(
            "plan {} (seed {}): train {}, validation {} ({} negative / {} positive)",
            plan.split_index,
            plan.seed,
            plan.train_ids.len(),
            plan.val_ids.len(),
            val_neg,
            val_pos
        );
    }

    // same manifest and seeds always reproduce the same plans
    let again = build_splits(&manifest, 0.2, &seeds)?;
    println!(
        "deterministic rebuild matches: {}",
        split_set.plans == again.plans
    );
    Ok(())
}
