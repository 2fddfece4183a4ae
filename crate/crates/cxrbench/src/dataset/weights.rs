use crate::error::{Error, Result};

use super::{ClassWeights, DatasetCounts, Label, ManifestEntry, Subset};

/// Inverse-frequency weights: `w_i = (1 / c_i) * (t / 2)`.
///
/// Balanced classes get unit weights; the minority class is up-weighted so
/// that `w_neg*c_neg + w_pos*c_pos == t`.
pub fn compute_class_weights(counts: &DatasetCounts) -> Result<ClassWeights> {
    if counts.negative == 0 || counts.positive == 0 {
        return Err(Error::Domain(format!(
            "class weights need both class counts > 0 (negative={}, positive={})",
            counts.negative, counts.positive
        )));
    }
    let t = counts.total() as f64;
    Ok(ClassWeights {
        negative: t / 2.0 / counts.negative as f64,
        positive: t / 2.0 / counts.positive as f64,
    })
}

/// Tallies one subset of a manifest. Weights are computed once from the full
/// train subset, not per split plan.
pub fn counts_from_entries(entries: &[ManifestEntry], subset: Subset) -> DatasetCounts {
    let mut counts = DatasetCounts::new(0, 0);
    for e in entries.iter().filter(|e| e.subset == subset) {
        match e.label {
            Label::Negative => counts.negative += 1,
            Label::Positive => counts.positive += 1,
        }
    }
    counts
}
