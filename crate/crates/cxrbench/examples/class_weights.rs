//! Inverse-frequency class weights from dataset counts.
//!
//! ```bash
//! cargo run --example class_weights
//! ```

use cxrbench::dataset::{compute_class_weights, DatasetCounts};

fn main() -> cxrbench::Result<()> {
    // the benchmark's train subset composition
    let counts = DatasetCounts::new(13_794, 2_158);
    let weights = compute_class_weights(&counts)?;
    println!(
        "counts: negative {}, positive {}, total {}",
        counts.negative,
        counts.positive,
        counts.total()
    );
    println!(
        "weights: negative {:.4}, positive {:.4}",
        weights.negative, weights.positive
    );
    let balance =
        weights.negative * counts.negative as f64 + weights.positive * counts.positive as f64;
    println!(
        "balance identity: w_neg*c_neg + w_pos*c_pos = {balance:.6} (total = {})",
        counts.total()
    );

    let balanced = compute_class_weights(&DatasetCounts::new(100, 100))?;
    println!(
        "balanced classes degenerate to unit weights: ({}, {})",
        balanced.negative, balanced.positive
    );
    Ok(())
}
