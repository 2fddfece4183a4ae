//! Pre-softmax logit averaging and the three ensemble experiments:
//! heterogeneous top-k (one instance of each of the k best models, paired by
//! split index), homogeneous (all five instances of one model), and top-k
//! with all instances (k models x 5 instances). Averaging always happens in
//! logit space, before any softmax; probability-space averaging is
//! deliberately not offered because it can change decisions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, confusion, metric_set, AggregateStats, Metric, MetricSet};

/// Split indices of the five repetitions.
pub const SPLIT_INDICES: [usize; 5] = [1, 2, 3, 4, 5];

/// Subsets an instance's logits are cached for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EvalSubset {
    Train,
    Validation,
    Test,
}

impl EvalSubset {
    pub const ALL: [EvalSubset; 3] = [EvalSubset::Train, EvalSubset::Validation, EvalSubset::Test];

    pub fn parse(token: &str) -> Result<EvalSubset> {
        match token {
            "train" => Ok(EvalSubset::Train),
            "validation" => Ok(EvalSubset::Validation),
            "test" => Ok(EvalSubset::Test),
            other => Err(Error::Validation(format!(
                "unknown subset token \"{other}\""
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EvalSubset::Train => "train",
            EvalSubset::Validation => "validation",
            EvalSubset::Test => "test",
        }
    }
}

impl fmt::Display for EvalSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two continuous outputs a model produces for one image, read just
/// before the softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitPair {
    pub negative: f64,
    pub positive: f64,
}

impl LogitPair {
    pub fn new(negative: f64, positive: f64) -> Self {
        LogitPair { negative, positive }
    }

    pub fn is_finite(&self) -> bool {
        self.negative.is_finite() && self.positive.is_finite()
    }
}

/// One image's cached outputs from one trained instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub image_id: String,
    pub model: String,
    pub split_index: usize,
    pub subset: EvalSubset,
    pub logits: LogitPair,
    pub true_label: Label,
}

/// Identifies one trained instance: a model name plus a split index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceKey {
    pub model: String,
    pub split_index: usize,
}

impl InstanceKey {
    pub fn new(model: impl Into<String>, split_index: usize) -> Self {
        InstanceKey {
            model: model.into(),
            split_index,
        }
    }
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, split {})", self.model, self.split_index)
    }
}

/// One member's contribution for a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedLogit {
    pub image_id: String,
    pub logits: LogitPair,
    pub true_label: Label,
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    records: Vec<CachedLogit>,
    ids: HashSet<String>,
}

/// Immutable-after-load snapshot of every instance's cached logits, keyed by
/// (model, split_index, subset). `(model, split_index, image_id, subset)` is
/// unique within a cache.
#[derive(Debug, Clone, Default)]
pub struct LogitCache {
    buckets: BTreeMap<(String, usize, EvalSubset), Bucket>,
}

impl LogitCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: LogitRecord) -> Result<()> {
        if !record.logits.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite logits for image \"{}\" of ({}, split {})",
                record.image_id, record.model, record.split_index
            )));
        }
        let bucket = self
            .buckets
            .entry((record.model.clone(), record.split_index, record.subset))
            .or_default();
        if !bucket.ids.insert(record.image_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate logit record for image \"{}\" of ({}, split {}, {})",
                record.image_id, record.model, record.split_index, record.subset
            )));
        }
        bucket.records.push(CachedLogit {
            image_id: record.image_id,
            logits: record.logits,
            true_label: record.true_label,
        });
        Ok(())
    }

    pub fn insert_all(&mut self, records: impl IntoIterator<Item = LogitRecord>) -> Result<()> {
        for r in records {
            self.insert(r)?;
        }
        Ok(())
    }

    pub fn get(&self, instance: &InstanceKey, subset: EvalSubset) -> Option<&[CachedLogit]> {
        self.buckets
            .get(&(instance.model.clone(), instance.split_index, subset))
            .map(|b| b.records.as_slice())
    }

    pub fn len(&self) -> usize {
        self.buckets.values().map(|b| b.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn models(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .buckets
            .keys()
            .map(|(model, _, _)| model.clone())
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

const LOGIT_CSV_HEADER: &str =
    "run_id,model,split_index,subset,image_id,logit_negative,logit_positive,true_label";

/// Serializes records to the shared logit-cache CSV layout. Floats print at
/// full round-trip precision.
pub fn logit_records_to_csv(records: &[LogitRecord], run_id: &str) -> Result<String> {
    let mut out = String::from(LOGIT_CSV_HEADER);
    out.push('\n');
    for r in records {
        for field in [run_id, &r.model, &r.image_id] {
            if field.contains(',') || field.contains('\n') {
                return Err(Error::Validation(format!(
                    "csv field contains a delimiter: {field:?}"
                )));
            }
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            run_id,
            r.model,
            r.split_index,
            r.subset,
            r.image_id,
            r.logits.negative,
            r.logits.positive,
            r.true_label
        ));
    }
    Ok(out)
}

pub fn parse_logit_csv(text: &str, path: &Path) -> Result<Vec<LogitRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == LOGIT_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("bad header; expected \"{LOGIT_CSV_HEADER}\""),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad {what}: \"{s}\""),
            })
        };
        records.push(LogitRecord {
            model: fields[1].to_string(),
            split_index: fields[2].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad split_index: \"{}\"", fields[2]),
            })?,
            subset: EvalSubset::parse(fields[3])?,
            image_id: fields[4].to_string(),
            logits: LogitPair::new(
                parse_f(fields[5], "logit_negative")?,
                parse_f(fields[6], "logit_positive")?,
            ),
            true_label: Label::parse(fields[7])?,
        });
    }
    Ok(records)
}

/// How an ensemble's members were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleKind {
    /// One instance of each of the top-k models, all at one split index.
    HeterogeneousTopK,
    /// All five instances of a single model.
    Homogeneous,
    /// All five instances of each of the top-k models.
    TopKAllInstances,
    /// A single instance evaluated as a one-member ensemble.
    Singleton,
}

/// A validated ensemble membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleSpec {
    kind: EnsembleKind,
    members: Vec<InstanceKey>,
}

impl EnsembleSpec {
    pub fn singleton(model: impl Into<String>, split_index: usize) -> Self {
        EnsembleSpec {
            kind: EnsembleKind::Singleton,
            members: vec![InstanceKey::new(model, split_index)],
        }
    }

    pub fn heterogeneous(models: &[String], split_index: usize) -> Self {
        EnsembleSpec {
            kind: EnsembleKind::HeterogeneousTopK,
            members: models
                .iter()
                .map(|m| InstanceKey::new(m.clone(), split_index))
                .collect(),
        }
    }

    pub fn homogeneous(model: &str) -> Self {
        EnsembleSpec {
            kind: EnsembleKind::Homogeneous,
            members: SPLIT_INDICES
                .iter()
                .map(|&i| InstanceKey::new(model, i))
                .collect(),
        }
    }

    pub fn topk_all_instances(models: &[String]) -> Self {
        let mut members = Vec::with_capacity(5 * models.len());
        for model in models {
            for &i in &SPLIT_INDICES {
                members.push(InstanceKey::new(model.clone(), i));
            }
        }
        EnsembleSpec {
            kind: EnsembleKind::TopKAllInstances,
            members,
        }
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn members(&self) -> &[InstanceKey] {
        &self.members
    }

    /// Distinct members plus the shape constraint of the kind: homogeneous
    /// covers one model over all five splits, heterogeneous one shared
    /// split across distinct models.
    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Validation("ensemble has no members".into()));
        }
        let distinct: HashSet<&InstanceKey> = self.members.iter().collect();
        if distinct.len() != self.members.len() {
            return Err(Error::Validation("ensemble members must be distinct".into()));
        }
        match self.kind {
            EnsembleKind::Singleton => {
                if self.members.len() != 1 {
                    return Err(Error::Validation(
                        "singleton ensembles hold exactly one member".into(),
                    ));
                }
            }
            EnsembleKind::Homogeneous => {
                let model = &self.members[0].model;
                let mut splits: Vec<usize> =
                    self.members.iter().map(|m| m.split_index).collect();
                splits.sort_unstable();
                if self.members.iter().any(|m| &m.model != model)
                    || splits != SPLIT_INDICES.to_vec()
                {
                    return Err(Error::Validation(
                        "homogeneous ensembles cover one model over all five splits".into(),
                    ));
                }
            }
            EnsembleKind::HeterogeneousTopK => {
                let split = self.members[0].split_index;
                if self.members.iter().any(|m| m.split_index != split) {
                    return Err(Error::Validation(
                        "heterogeneous ensembles share one split index".into(),
                    ));
                }
            }
            EnsembleKind::TopKAllInstances => {
                if !self.members.len().is_multiple_of(SPLIT_INDICES.len()) {
                    return Err(Error::Validation(
                        "top-k all-instances ensembles hold five instances per model".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Validates and evaluates this ensemble on one subset.
    pub fn evaluate(
        &self,
        subset: EvalSubset,
        cache: &LogitCache,
        rule: TieRule,
    ) -> Result<MetricSet> {
        self.validate()?;
        evaluate_members(&self.members, subset, cache, rule)
    }
}

/// Tie handling for `decide`; exact ties are a measure-zero event but the
/// rule is fixed, configurable, and recorded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// A tie decides positive: for a screening task the conservative error
    /// is a false positive.
    #[default]
    Positive,
    Negative,
}

impl TieRule {
    pub fn parse(token: &str) -> Result<TieRule> {
        match token.to_ascii_lowercase().as_str() {
            "positive" => Ok(TieRule::Positive),
            "negative" => Ok(TieRule::Negative),
            other => Err(Error::Validation(format!(
                "unknown tie rule \"{other}\" (expected \"positive\" or \"negative\")"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TieRule::Positive => "positive",
            TieRule::Negative => "negative",
        }
    }
}

/// Elementwise arithmetic mean of the members' logit pairs. All members must
/// describe the same image.
pub fn combine_logits(members: &[CachedLogit]) -> Result<LogitPair> {
    let first = members
        .first()
        .ok_or_else(|| Error::Domain("cannot combine an empty member list".into()))?;
    let mut neg = 0.0;
    let mut pos = 0.0;
    for m in members {
        if m.image_id != first.image_id {
            return Err(Error::Data(format!(
                "mismatched image ids in ensemble members: \"{}\" vs \"{}\"",
                first.image_id, m.image_id
            )));
        }
        neg += m.logits.negative;
        pos += m.logits.positive;
    }
    let n = members.len() as f64;
    Ok(LogitPair::new(neg / n, pos / n))
}

/// Argmax decision over a logit pair; exact ties follow `rule`.
pub fn decide(logits: &LogitPair, rule: TieRule) -> Label {
    if logits.positive > logits.negative {
        Label::Positive
    } else if logits.positive < logits.negative {
        Label::Negative
    } else {
        match rule {
            TieRule::Positive => Label::Positive,
            TieRule::Negative => Label::Negative,
        }
    }
}

/// Relative percentage change of `value` over `baseline`; undefined for a
/// non-positive baseline.
pub fn gain_percent(baseline: f64, value: f64) -> Option<f64> {
    (baseline > 0.0).then(|| (value / baseline - 1.0) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricGain {
    pub baseline_mean: f64,
    pub ensemble_value: f64,
    pub gain_percent: Option<f64>,
}

/// Per-metric ensemble value against a baseline mean, with the relative
/// gain in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    pub acc: MetricGain,
    pub tpr: MetricGain,
    pub ppv: MetricGain,
    pub f1: MetricGain,
}

impl GainReport {
    pub fn get(&self, metric: Metric) -> MetricGain {
        match metric {
            Metric::Acc => self.acc,
            Metric::Tpr => self.tpr,
            Metric::Ppv => self.ppv,
            Metric::F1 => self.f1,
        }
    }
}

/// Builds the gain report of `ensemble` against per-metric baseline means.
pub fn gain_report(baseline: &AggregateStats, ensemble: &MetricSet) -> GainReport {
    let build = |metric: Metric| {
        let baseline_mean = baseline.get(metric).mean;
        let ensemble_value = ensemble.get(metric);
        MetricGain {
            baseline_mean,
            ensemble_value,
            gain_percent: gain_percent(baseline_mean, ensemble_value),
        }
    };
    GainReport {
        acc: build(Metric::Acc),
        tpr: build(Metric::Tpr),
        ppv: build(Metric::Ppv),
        f1: build(Metric::F1),
    }
}

/// Evaluates the ensemble of `members` on one subset: per image, average the
/// members' logits, decide, and tally against the true labels.
pub fn evaluate_members(
    members: &[InstanceKey],
    subset: EvalSubset,
    cache: &LogitCache,
    rule: TieRule,
) -> Result<MetricSet> {
    if members.is_empty() {
        return Err(Error::Domain("ensemble needs at least one member".into()));
    }
    let mut slices = Vec::with_capacity(members.len());
    for key in members {
        let slice = cache.get(key, subset).ok_or_else(|| {
            Error::Data(format!("logit cache is missing {key} on subset {subset}"))
        })?;
        slices.push(slice);
    }
    // group per image id, preserving a deterministic order
    let mut per_image: BTreeMap<&str, Vec<CachedLogit>> = BTreeMap::new();
    for slice in &slices {
        for rec in *slice {
            per_image
                .entry(rec.image_id.as_str())
                .or_default()
                .push(rec.clone());
        }
    }
    let mut pairs = Vec::with_capacity(per_image.len());
    for (image_id, group) in &per_image {
        if group.len() != members.len() {
            return Err(Error::Data(format!(
                "image \"{image_id}\" has logits from {} of {} members on subset {subset}",
                group.len(),
                members.len()
            )));
        }
        let truth = group[0].true_label;
        if group.iter().any(|g| g.true_label != truth) {
            return Err(Error::Data(format!(
                "inconsistent true labels for image \"{image_id}\""
            )));
        }
        let combined = combine_logits(group)?;
        pairs.push((truth, decide(&combined, rule)));
    }
    Ok(metric_set(&confusion(&pairs)?))
}

/// Models sorted by descending mean F1; ties break by descending mean ACC,
/// then lexicographic name.
pub fn rank_models(stats: &[(String, AggregateStats)]) -> Vec<String> {
    let mut order: Vec<&(String, AggregateStats)> = stats.iter().collect();
    order.sort_by(|a, b| {
        b.1.f1
            .mean
            .total_cmp(&a.1.f1.mean)
            .then(b.1.acc.mean.total_cmp(&a.1.acc.mean))
            .then(a.0.cmp(&b.0))
    });
    order.into_iter().map(|(name, _)| name.clone()).collect()
}

/// Five-split outcome of one heterogeneous configuration.
#[derive(Debug, Clone)]
pub struct HeterogeneousOutcome {
    pub k: usize,
    pub per_split: Vec<MetricSet>,
    pub stats: AggregateStats,
}

/// One instance of each of the top-k ranked models, paired by split index,
/// giving five ensembles; evaluated on the test subset and aggregated.
pub fn run_heterogeneous_topk(
    k: usize,
    ranking: &[String],
    cache: &LogitCache,
    rule: TieRule,
) -> Result<HeterogeneousOutcome> {
    if k == 0 || k > ranking.len() {
        return Err(Error::Validation(format!(
            "k must lie in 1..={}, got {k}",
            ranking.len()
        )));
    }
    let per_split: Vec<MetricSet> = SPLIT_INDICES
        .iter()
        .map(|&i| {
            EnsembleSpec::heterogeneous(&ranking[..k], i).evaluate(EvalSubset::Test, cache, rule)
        })
        .collect::<Result<_>>()?;
    let stats = aggregate(&per_split)?;
    Ok(HeterogeneousOutcome { k, per_split, stats })
}

#[derive(Debug, Clone)]
pub struct HomogeneousOutcome {
    pub model: String,
    pub singles: AggregateStats,
    pub ensemble: MetricSet,
    pub gains: GainReport,
}

/// All five instances of one model as a single ensemble; gains baseline on
/// the model's single-instance means.
pub fn run_homogeneous(
    model: &str,
    cache: &LogitCache,
    rule: TieRule,
) -> Result<HomogeneousOutcome> {
    let singles: Vec<MetricSet> = SPLIT_INDICES
        .iter()
        .map(|&i| EnsembleSpec::singleton(model, i).evaluate(EvalSubset::Test, cache, rule))
        .collect::<Result<_>>()?;
    let singles = aggregate(&singles)?;
    let ensemble = EnsembleSpec::homogeneous(model).evaluate(EvalSubset::Test, cache, rule)?;
    Ok(HomogeneousOutcome {
        model: model.to_string(),
        gains: gain_report(&singles, &ensemble),
        singles,
        ensemble,
    })
}

#[derive(Debug, Clone)]
pub struct TopkAllInstancesOutcome {
    pub k: usize,
    pub baseline: AggregateStats,
    pub ensemble: MetricSet,
    pub gains: GainReport,
}

/// All five instances of each of the top-k models in one 5k-member
/// ensemble; gains baseline on the heterogeneous top-k means.
pub fn run_topk_all_instances(
    k: usize,
    ranking: &[String],
    cache: &LogitCache,
    rule: TieRule,
) -> Result<TopkAllInstancesOutcome> {
    let hetero = run_heterogeneous_topk(k, ranking, cache, rule)?;
    let ensemble =
        EnsembleSpec::topk_all_instances(&ranking[..k]).evaluate(EvalSubset::Test, cache, rule)?;
    Ok(TopkAllInstancesOutcome {
        k,
        gains: gain_report(&hetero.stats, &ensemble),
        baseline: hetero.stats,
        ensemble,
    })
}
