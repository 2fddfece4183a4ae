//! Dataset handling: manifest ingestion and validation, class-weight
//! computation, stratified split planning, and a deterministic synthetic
//! two-class image generator for desk-scale runs.

mod manifest;
mod splits;
mod synthetic;
mod weights;

pub use manifest::{load_manifest, write_manifest_tsv, Manifest, ManifestFormat};
pub use splits::{build_splits, SplitPlan, SplitSet};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use weights::{compute_class_weights, counts_from_entries};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Binary class label. The positive class is the screening target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// Case-insensitive parse; any token other than the two class names is
    /// rejected rather than coerced.
    pub fn parse(token: &str) -> Result<Label> {
        match token.to_ascii_lowercase().as_str() {
            "negative" => Ok(Label::Negative),
            "positive" => Ok(Label::Positive),
            other => Err(Error::Validation(format!(
                "unknown label token \"{other}\" (expected \"negative\" or \"positive\")"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Positive => "positive",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which side of the held-out boundary a manifest entry sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subset {
    Train,
    Test,
}

impl Subset {
    pub fn parse(token: &str) -> Result<Subset> {
        match token.to_ascii_lowercase().as_str() {
            "train" => Ok(Subset::Train),
            "test" => Ok(Subset::Test),
            other => Err(Error::Validation(format!(
                "unknown subset token \"{other}\" (expected \"train\" or \"test\")"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Test => "test",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled image record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub path: String,
    pub label: Label,
    pub patient_id: Option<String>,
    pub source: String,
    pub subset: Subset,
}

/// Per-class totals of the training subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetCounts {
    pub negative: usize,
    pub positive: usize,
}

impl DatasetCounts {
    pub fn new(negative: usize, positive: usize) -> Self {
        DatasetCounts { negative, positive }
    }

    pub fn total(&self) -> usize {
        self.negative + self.positive
    }
}

/// Inverse-frequency class weights; satisfies
/// `negative*c_neg + positive*c_pos == total` up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub negative: f64,
    pub positive: f64,
}

impl ClassWeights {
    /// Unit weights: the weighted loss degenerates to the unweighted one.
    pub fn uniform() -> Self {
        ClassWeights {
            negative: 1.0,
            positive: 1.0,
        }
    }

    pub fn for_label(&self, label: Label) -> f64 {
        match label {
            Label::Negative => self.negative,
            Label::Positive => self.positive,
        }
    }
}
