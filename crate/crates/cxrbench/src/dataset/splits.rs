use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

use super::{Label, Manifest, Subset};

const NEGATIVE_STREAM: u64 = 0x6e65_6761_7469_7665; // "negative"
const POSITIVE_STREAM: u64 = 0x706f_7369_7469_7665; // "positive"

/// One train/validation partition of the manifest's train subset.
///
/// Id lists are stored sorted so two equal plans serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub split_index: usize,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
}

/// The five plans plus any stratification warnings raised while rounding.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pub plans: Vec<SplitPlan>,
    pub warnings: Vec<String>,
}

/// Builds one stratified plan per seed.
///
/// Per class, `round_half_up(c_i * val_fraction)` ids go to validation; ids
/// are drawn by a seeded uniform shuffle within each class, so the same
/// (manifest, seed) pair always yields the same plan.
pub fn build_splits(manifest: &Manifest, val_fraction: f64, seeds: &[u64]) -> Result<SplitSet> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "val_fraction must lie in (0, 1), got {val_fraction}"
        )));
    }
    if seeds.len() != 5 {
        return Err(Error::Validation(format!(
            "expected exactly 5 seeds, got {}",
            seeds.len()
        )));
    }
    let distinct: HashSet<u64> = seeds.iter().copied().collect();
    if distinct.len() != seeds.len() {
        return Err(Error::Validation("seeds must be distinct".into()));
    }

    let mut negatives: Vec<&str> = Vec::new();
    let mut positives: Vec<&str> = Vec::new();
    for e in manifest.subset_entries(Subset::Train) {
        match e.label {
            Label::Negative => negatives.push(&e.image_id),
            Label::Positive => positives.push(&e.image_id),
        }
    }
    if negatives.len() < 2 || positives.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 train entries per class (negative={}, positive={})",
            negatives.len(),
            positives.len()
        )));
    }
    // class lists are sorted before shuffling so plans depend only on the id
    // set and the seed, not on manifest row order
    negatives.sort_unstable();
    positives.sort_unstable();

    let mut warnings = Vec::new();
    let mut plans = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let split_index = i + 1;
        let mut train_ids = Vec::new();
        let mut val_ids = Vec::new();
        for (class, ids, stream) in [
            (Label::Negative, &negatives, NEGATIVE_STREAM),
            (Label::Positive, &positives, POSITIVE_STREAM),
        ] {
            let k = round_half_up(ids.len() as f64 * val_fraction);
            if k == 0 {
                warnings.push(format!(
                    "split {split_index}: class {class} has no validation items under fraction {val_fraction}"
                ));
            }
            if k >= ids.len() {
                warnings.push(format!(
                    "split {split_index}: class {class} has no training items under fraction {val_fraction}"
                ));
            }
            let mut shuffled: Vec<&str> = ids.to_vec();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream));
            shuffled.shuffle(&mut rng);
            let k = k.min(ids.len());
            val_ids.extend(shuffled[..k].iter().map(|s| s.to_string()));
            train_ids.extend(shuffled[k..].iter().map(|s| s.to_string()));
        }
        train_ids.sort_unstable();
        val_ids.sort_unstable();
        plans.push(SplitPlan {
            seed,
            split_index,
            train_ids,
            val_ids,
        });
    }
    Ok(SplitSet { plans, warnings })
}

/// Round half up; exact for the non-negative values used here.
fn round_half_up(x: f64) -> usize {
    debug_assert!(x >= 0.0);
    x.round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ManifestEntry, Subset};
    use rand::Rng;
    use std::path::PathBuf;

    fn manifest_with(neg: usize, pos: usize) -> Manifest {
        let mut entries = Vec::new();
        for i in 0..neg {
            entries.push(ManifestEntry {
                image_id: format!("neg-{i:05}"),
                path: format!("images/neg-{i:05}.png"),
                label: Label::Negative,
                patient_id: Some(format!("pn{i}")),
                source: "synthetic".into(),
                subset: Subset::Train,
            });
        }
        for i in 0..pos {
            entries.push(ManifestEntry {
                image_id: format!("pos-{i:05}"),
                path: format!("images/pos-{i:05}.png"),
                label: Label::Positive,
                patient_id: Some(format!("pp{i}")),
                source: "synthetic".into(),
                subset: Subset::Train,
            });
        }
        Manifest::new(PathBuf::from("."), entries).unwrap()
    }

    const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

    #[test]
    fn exact_proportions_for_round_counts() {
        let manifest = manifest_with(80, 20);
        let set = build_splits(&manifest, 0.2, &SEEDS).unwrap();
        assert_eq!(set.plans.len(), 5);
        for plan in &set.plans {
            let val_neg = plan.val_ids.iter().filter(|id| id.starts_with("neg")).count();
            let val_pos = plan.val_ids.iter().filter(|id| id.starts_with("pos")).count();
            assert_eq!(val_neg, 16);
            assert_eq!(val_pos, 4);
            assert_eq!(plan.train_ids.len(), 80);
        }
    }

    #[test]
    fn same_inputs_give_byte_identical_plans() {
        let manifest = manifest_with(30, 10);
        let a = build_splits(&manifest, 0.25, &SEEDS).unwrap();
        let b = build_splits(&manifest, 0.25, &SEEDS).unwrap();
        let ser_a = serde_json::to_vec(&a.plans).unwrap();
        let ser_b = serde_json::to_vec(&b.plans).unwrap();
        assert_eq!(ser_a, ser_b);
    }

    #[test]
    fn rounding_rule_on_imbalanced_counts() {
        // round(13794 * 0.2) + round(2158 * 0.2) = 2759 + 432
        let manifest = manifest_with(13794, 2158);
        let set = build_splits(&manifest, 0.2, &SEEDS).unwrap();
        for plan in &set.plans {
            let val_neg = plan.val_ids.iter().filter(|id| id.starts_with("neg")).count();
            let val_pos = plan.val_ids.iter().filter(|id| id.starts_with("pos")).count();
            assert_eq!(val_neg, 2759);
            assert_eq!(val_pos, 432);
            assert_eq!(plan.val_ids.len(), 3191);
        }
    }

    #[test]
    fn fraction_outside_unit_interval_is_rejected() {
        let manifest = manifest_with(4, 4);
        assert!(matches!(
            build_splits(&manifest, 0.0, &SEEDS),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            build_splits(&manifest, 1.0, &SEEDS),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let manifest = manifest_with(4, 4);
        let err = build_splits(&manifest, 0.5, &[1, 1, 2, 3, 4]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn tiny_class_rounding_to_zero_warns() {
        let manifest = manifest_with(100, 2);
        let set = build_splits(&manifest, 0.1, &SEEDS).unwrap();
        // round(2 * 0.1) = 0 validation positives
        assert!(!set.warnings.is_empty());
        assert!(set.warnings[0].contains("positive"));
    }

    #[test]
    fn partition_and_stratification_hold_over_random_manifests() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..100 {
            let neg = rng.random_range(2..400usize);
            let pos = rng.random_range(2..400usize);
            let frac = rng.random_range(0.05..0.95);
            let manifest = manifest_with(neg, pos);
            let seeds: Vec<u64> = (0..5).map(|k| trial * 1000 + k).collect();
            let set = build_splits(&manifest, frac, &seeds).unwrap();
            let all: HashSet<String> = manifest
                .subset_entries(Subset::Train)
                .map(|e| e.image_id.clone())
                .collect();
            for plan in &set.plans {
                let train: HashSet<&String> = plan.train_ids.iter().collect();
                let val: HashSet<&String> = plan.val_ids.iter().collect();
                assert!(train.is_disjoint(&val), "trial {trial}: overlap");
                assert_eq!(train.len() + val.len(), all.len(), "trial {trial}: not a partition");
                for (prefix, count) in [("neg", neg), ("pos", pos)] {
                    let v = plan.val_ids.iter().filter(|id| id.starts_with(prefix)).count();
                    let target = count as f64 * frac;
                    assert!(
                        (v as f64 - target).abs() < 1.0,
                        "trial {trial}: {prefix} val {v} vs target {target}"
                    );
                }
            }
            // determinism across a rebuild
            let again = build_splits(&manifest, frac, &seeds).unwrap();
            assert_eq!(set.plans, again.plans);
        }
    }
}
