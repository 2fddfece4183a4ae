//! Confusion-matrix metrics (ACC, TPR, PPV, F1), per-subset evaluation from
//! the logit cache, and mean / sample-SD aggregation across instances.

use std::collections::BTreeMap;

use crate::dataset::Label;
use crate::ensemble::{EnsembleSpec, EvalSubset, InstanceKey, LogitCache, TieRule};
use crate::error::{Error, Result};

/// Binary confusion tally; the positive class is the screening target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// Tallies (true, predicted) label pairs.
pub fn confusion(records: &[(Label, Label)]) -> Result<ConfusionCounts> {
    if records.is_empty() {
        return Err(Error::Domain("cannot tally an empty record list".into()));
    }
    let mut c = ConfusionCounts::default();
    for (truth, predicted) in records {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => c.true_positive += 1,
            (Label::Negative, Label::Positive) => c.false_positive += 1,
            (Label::Negative, Label::Negative) => c.true_negative += 1,
            (Label::Positive, Label::Negative) => c.false_negative += 1,
        }
    }
    Ok(c)
}

/// The four reported metrics. `degenerate` flags any metric that fell back
/// to the 0-convention because its denominator was empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub acc: f64,
    pub tpr: f64,
    pub ppv: f64,
    pub f1: f64,
    pub degenerate: bool,
}

impl MetricSet {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Acc => self.acc,
            Metric::Tpr => self.tpr,
            Metric::Ppv => self.ppv,
            Metric::F1 => self.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Acc,
    Tpr,
    Ppv,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Acc, Metric::Tpr, Metric::Ppv, Metric::F1];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Acc => "ACC",
            Metric::Tpr => "TPR",
            Metric::Ppv => "PPV",
            Metric::F1 => "F1",
        }
    }
}

/// ACC, TPR, PPV, F1 from confusion counts.
///
/// Degenerate denominators (no positive truths, no positive predictions)
/// yield 0 with the `degenerate` flag set instead of an error.
pub fn metric_set(c: &ConfusionCounts) -> MetricSet {
    let total = c.total();
    assert!(total > 0, "metric_set needs a nonempty confusion tally");
    let acc = (c.true_positive + c.true_negative) as f64 / total as f64;
    let mut degenerate = false;
    let tpr = match c.true_positive + c.false_negative {
        0 => {
            degenerate = true;
            0.0
        }
        d => c.true_positive as f64 / d as f64,
    };
    let ppv = match c.true_positive + c.false_positive {
        0 => {
            degenerate = true;
            0.0
        }
        d => c.true_positive as f64 / d as f64,
    };
    let f1 = if tpr + ppv == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * tpr * ppv / (tpr + ppv)
    };
    MetricSet {
        acc,
        tpr,
        ppv,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// Per-metric mean and sample standard deviation over n repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub acc: MeanSd,
    pub tpr: MeanSd,
    pub ppv: MeanSd,
    pub f1: MeanSd,
    pub n: usize,
}

impl AggregateStats {
    pub fn get(&self, metric: Metric) -> MeanSd {
        match metric {
            Metric::Acc => self.acc,
            Metric::Tpr => self.tpr,
            Metric::Ppv => self.ppv,
            Metric::F1 => self.f1,
        }
    }
}

fn mean_sd(values: &[f64]) -> MeanSd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanSd {
        mean,
        sd: var.sqrt(),
    }
}

/// Mean and sample SD (n-1 divisor) of each metric over the given sets.
pub fn aggregate(sets: &[MetricSet]) -> Result<AggregateStats> {
    if sets.len() < 2 {
        return Err(Error::Domain(format!(
            "sample standard deviation needs >= 2 repetitions, got {}",
            sets.len()
        )));
    }
    let collect = |metric: Metric| -> Vec<f64> { sets.iter().map(|s| s.get(metric)).collect() };
    Ok(AggregateStats {
        acc: mean_sd(&collect(Metric::Acc)),
        tpr: mean_sd(&collect(Metric::Tpr)),
        ppv: mean_sd(&collect(Metric::Ppv)),
        f1: mean_sd(&collect(Metric::F1)),
        n: sets.len(),
    })
}

/// Evaluates one trained instance on its train, validation, and test logits
/// as a single-member ensemble under `rule`.
pub fn evaluate_subsets(
    instance: &InstanceKey,
    cache: &LogitCache,
    rule: TieRule,
) -> Result<BTreeMap<EvalSubset, MetricSet>> {
    let spec = EnsembleSpec::singleton(instance.model.clone(), instance.split_index);
    let mut out = BTreeMap::new();
    for subset in EvalSubset::ALL {
        out.insert(subset, spec.evaluate(subset, cache, rule)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tiny_tally() {
        let c = confusion(&[
            (Label::Positive, Label::Positive),
            (Label::Negative, Label::Negative),
        ])
        .unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                true_positive: 1,
                true_negative: 1,
                false_positive: 0,
                false_negative: 0
            }
        );
    }

    #[test]
    fn all_correct_on_balanced_set() {
        let mut records = Vec::new();
        for _ in 0..200 {
            records.push((Label::Positive, Label::Positive));
            records.push((Label::Negative, Label::Negative));
        }
        let c = confusion(&records).unwrap();
        assert_eq!(c.true_positive, 200);
        assert_eq!(c.true_negative, 200);
        assert_eq!(c.false_positive + c.false_negative, 0);
    }

    #[test]
    fn empty_records_are_a_domain_error() {
        assert!(matches!(confusion(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn random_pairs_match_a_brute_force_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let flip = |rng: &mut ChaCha8Rng| {
            if rng.random::<bool>() {
                Label::Positive
            } else {
                Label::Negative
            }
        };
        let records: Vec<(Label, Label)> =
            (0..1000).map(|_| (flip(&mut rng), flip(&mut rng))).collect();
        let c = confusion(&records).unwrap();
        // independent re-count
        let mut tp = 0;
        let mut fp = 0;
        let mut tn = 0;
        let mut fn_ = 0;
        for (t, p) in &records {
            if *t == Label::Positive && *p == Label::Positive {
                tp += 1;
            }
            if *t == Label::Negative && *p == Label::Positive {
                fp += 1;
            }
            if *t == Label::Negative && *p == Label::Negative {
                tn += 1;
            }
            if *t == Label::Positive && *p == Label::Negative {
                fn_ += 1;
            }
        }
        assert_eq!((c.true_positive, c.false_positive), (tp, fp));
        assert_eq!((c.true_negative, c.false_negative), (tn, fn_));
    }

    #[test]
    fn reference_counts_give_reference_metrics() {
        let m = metric_set(&ConfusionCounts {
            true_positive: 197,
            false_negative: 3,
            true_negative: 200,
            false_positive: 0,
        });
        assert_eq!(format!("{:.4}", m.acc), "0.9925");
        assert_eq!(format!("{:.4}", m.tpr), "0.9850");
        assert_eq!(format!("{:.4}", m.ppv), "1.0000");
        assert_eq!(format!("{:.4}", m.f1), "0.9924");
        assert!(!m.degenerate);
    }

    #[test]
    fn perfect_classifier_scores_ones() {
        let m = metric_set(&ConfusionCounts {
            true_positive: 10,
            true_negative: 10,
            ..Default::default()
        });
        assert_eq!((m.acc, m.tpr, m.ppv, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_negative_predictor_uses_zero_convention() {
        let m = metric_set(&ConfusionCounts {
            true_positive: 0,
            false_negative: 200,
            true_negative: 200,
            false_positive: 0,
        });
        assert_eq!(m.acc, 0.5);
        assert_eq!(m.tpr, 0.0);
        assert_eq!(m.ppv, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(m.degenerate);
    }

    #[test]
    fn metrics_match_brute_force_per_record_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..500 {
            let tp = rng.random_range(0..50usize);
            let fp = rng.random_range(0..50usize);
            let tn = rng.random_range(0..50usize);
            let fn_ = rng.random_range(0..50usize);
            if tp + fp + tn + fn_ == 0 {
                continue;
            }
            let c = ConfusionCounts {
                true_positive: tp,
                false_positive: fp,
                true_negative: tn,
                false_negative: fn_,
            };
            let m = metric_set(&c);
            let total = (tp + fp + tn + fn_) as f64;
            assert!((m.acc - (tp + tn) as f64 / total).abs() < 1e-12);
            if tp + fn_ > 0 {
                assert!((m.tpr - tp as f64 / (tp + fn_) as f64).abs() < 1e-12);
            }
            if tp + fp > 0 {
                assert!((m.ppv - tp as f64 / (tp + fp) as f64).abs() < 1e-12);
            }
            if m.tpr + m.ppv > 0.0 {
                let f1 = 2.0 * m.tpr * m.ppv / (m.tpr + m.ppv);
                assert!((m.f1 - f1).abs() < 1e-12);
                // harmonic mean bound
                assert!(m.f1 <= m.tpr.max(m.ppv) + 1e-12);
                assert!(m.f1 >= m.tpr.min(m.ppv) - 1e-12);
            }
        }
    }

    #[test]
    fn accuracy_is_invariant_under_class_swap() {
        let c = ConfusionCounts {
            true_positive: 7,
            false_positive: 3,
            true_negative: 11,
            false_negative: 2,
        };
        let swapped = ConfusionCounts {
            true_positive: c.true_negative,
            false_positive: c.false_negative,
            true_negative: c.true_positive,
            false_negative: c.false_positive,
        };
        assert_eq!(metric_set(&c).acc, metric_set(&swapped).acc);
    }

    #[test]
    fn aggregate_of_identical_sets_has_zero_sd() {
        let m = metric_set(&ConfusionCounts {
            true_positive: 9,
            false_negative: 1,
            true_negative: 8,
            false_positive: 2,
        });
        let stats = aggregate(&[m; 5]).unwrap();
        assert!((stats.acc.mean - m.acc).abs() < 1e-15);
        assert!(stats.acc.sd < 1e-12);
        assert!(stats.f1.sd < 1e-12);
        assert_eq!(stats.n, 5);
    }

    #[test]
    fn two_point_aggregate() {
        let mk = |acc: f64| MetricSet {
            acc,
            tpr: acc,
            ppv: acc,
            f1: acc,
            degenerate: false,
        };
        let stats = aggregate(&[mk(0.9), mk(1.0)]).unwrap();
        assert!((stats.acc.mean - 0.95).abs() < 1e-12);
        assert!((stats.acc.sd - 0.070711).abs() < 1e-6);
    }

    #[test]
    fn aggregate_needs_two_sets() {
        let m = metric_set(&ConfusionCounts {
            true_positive: 1,
            true_negative: 1,
            ..Default::default()
        });
        assert!(matches!(aggregate(&[m]), Err(Error::Domain(_))));
    }

    /// evaluate_subsets on the test subset must equal building the
    /// decisions by hand and running metric_set(confusion(..)) directly.
    #[test]
    fn evaluate_subsets_is_consistent_with_direct_computation() {
        use crate::ensemble::{decide, InstanceKey, LogitCache, LogitPair, LogitRecord};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut cache = LogitCache::new();
        let mut direct_pairs = Vec::new();
        for subset in EvalSubset::ALL {
            for i in 0..40 {
                let truth = if rng.random::<bool>() {
                    Label::Positive
                } else {
                    Label::Negative
                };
                let logits = LogitPair::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                if subset == EvalSubset::Test {
                    direct_pairs.push((truth, decide(&logits, TieRule::Positive)));
                }
                cache
                    .insert(LogitRecord {
                        image_id: format!("img-{i}"),
                        model: "m".into(),
                        split_index: 1,
                        subset,
                        logits,
                        true_label: truth,
                    })
                    .unwrap();
            }
        }
        let by_subset =
            evaluate_subsets(&InstanceKey::new("m", 1), &cache, TieRule::Positive).unwrap();
        let direct = metric_set(&confusion(&direct_pairs).unwrap());
        assert_eq!(by_subset[&EvalSubset::Test], direct);
    }

    #[test]
    fn aggregate_is_permutation_invariant_and_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let sets: Vec<MetricSet> = (0..5)
            .map(|_| MetricSet {
                acc: rng.random(),
                tpr: rng.random(),
                ppv: rng.random(),
                f1: rng.random(),
                degenerate: false,
            })
            .collect();
        let stats = aggregate(&sets).unwrap();
        let mut reversed = sets.clone();
        reversed.reverse();
        let stats_rev = aggregate(&reversed).unwrap();
        for metric in Metric::ALL {
            assert!((stats.get(metric).mean - stats_rev.get(metric).mean).abs() < 1e-12);
            assert!((stats.get(metric).sd - stats_rev.get(metric).sd).abs() < 1e-12);
            // oracle: explicit two-pass mean / SD
            let vals: Vec<f64> = sets.iter().map(|s| s.get(metric)).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (vals.len() - 1) as f64)
                .sqrt();
            assert!((stats.get(metric).mean - mean).abs() < 1e-12);
            assert!((stats.get(metric).sd - sd).abs() < 1e-12);
        }
    }
}
