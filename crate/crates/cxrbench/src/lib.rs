//! Benchmark harness for binary image classification with convolutional
//! backbones.
//!
//! The pipeline: a TSV manifest describes labeled images split into train and
//! test subsets; five stratified train/validation plans are derived from
//! seeds; each registered backbone is fine-tuned once per plan under a fixed
//! protocol (two-tier Adam learning rates, class-weighted cross-entropy,
//! patience-based early stopping with best-weight restoration); every trained
//! instance writes its pre-softmax logits for all subsets to a cache; metrics
//! and logit-averaging ensembles are computed from that cache alone; reports
//! are emitted as CSV plus aligned text.
//!
//! Everything lives under a resumable on-disk run store with atomic commits,
//! so interrupted experiments pick up where they left off.
//!
//! See the crate examples for one runnable program per capability:
//!
//! ```bash
//! cargo run --example synth_data
//! cargo run --example class_weights
//! cargo run --example split_plans
//! cargo run --example registry_tour
//! cargo run --example train_one
//! cargo run --example evaluate_instance
//! cargo run --example ensemble_gains
//! cargo run --example full_experiment
//! ```
//!
//! The `cxrbench` binary exposes the same stages as subcommands
//! (`synth-data`, `make-manifest`, `train`, `evaluate`, `ensemble`,
//! `report`, `registry`).

pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model_zoo;
pub mod nn;
pub mod report;
pub mod seed;
pub mod store;
pub mod trainer;

pub use error::{Error, Result};
