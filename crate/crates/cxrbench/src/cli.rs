//! Command-line surface. Each subcommand maps to one pipeline stage; `train`
//! populates the store, `evaluate` / `ensemble` / `report` re-derive their
//! tables from the stored logit caches, so the stages can run in separate
//! invocations or be resumed.
//!
//! Exit codes: 0 success, 1 validation error, 2 data error, 3 training
//! error. Failures print a one-line JSON summary to stderr.

use clap::{Parser, Subcommand};
use std::env;
use std::fs;
use std::path::PathBuf;

use crate::dataset::{
    generate_synthetic, load_manifest, write_manifest_tsv, ManifestFormat, Subset, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::experiment::{emit_reports, stage_train, ReportScope};
use crate::model_zoo::registry_tsv;
use crate::store::{resolve_config, ConfigOverlay, RunConfig, RunStore};

pub const OUTPUT_ROOT_ENV: &str = "CXRBENCH_ROOT";

#[derive(Parser, Debug)]
#[command(
    name = "cxrbench",
    about = "Benchmark harness for binary image classification with backbone ensembles"
)]
pub struct Cli {
    /// Flat key = value config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Run identifier under the output root.
    #[arg(long, global = true)]
    pub run_id: Option<String>,

    /// Store root (also via CXRBENCH_ROOT; the flag wins).
    #[arg(long, global = true)]
    pub output_root: Option<PathBuf>,

    /// Comma-separated model names, e.g. stub,stub-wide.
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,

    /// Exactly five comma-separated split seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a deterministic synthetic two-class dataset.
    SynthData {
        /// Output directory for images/ and manifest.tsv.
        #[arg(long)]
        out: PathBuf,
        /// Images per class (train and test combined).
        #[arg(long)]
        n_per_class: usize,
        #[arg(long, default_value_t = 32)]
        image_size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// 0 = mean-intensity separable, 1 = heavily overlapping.
        #[arg(long, default_value_t = 0.0)]
        difficulty: f64,
        /// Share of each class held out as the test subset.
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Convert plain-text records (patient_id filename class source) into a
    /// TSV manifest.
    MakeManifest {
        /// Records for the train subset.
        #[arg(long)]
        train_txt: Option<PathBuf>,
        /// Records for the test subset.
        #[arg(long)]
        test_txt: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every configured model over the five shared split plans.
    Train,
    /// Evaluate stored instances and emit the per-model and per-subset
    /// reports.
    Evaluate,
    /// Run the three ensemble experiments and emit their reports.
    Ensemble,
    /// Re-emit every report from the stored logit caches.
    Report,
    /// Dump the backbone registry as TSV.
    Registry {
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn env_output_root() -> Option<PathBuf> {
    env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from)
}

fn flag_overlay(cli: &Cli) -> ConfigOverlay {
    ConfigOverlay {
        run_id: cli.run_id.clone(),
        output_root: cli.output_root.clone(),
        models: cli.models.clone(),
        seeds: cli.seeds.clone(),
        ..Default::default()
    }
}

fn file_overlay(cli: &Cli) -> Result<ConfigOverlay> {
    match &cli.config {
        None => Ok(ConfigOverlay::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let base = path.parent().unwrap_or_else(|| std::path::Path::new("."));
            ConfigOverlay::parse(&text, path, base)
        }
    }
}

/// Full config resolution for `train`: flags over config file over env.
fn resolve_full(cli: &Cli) -> Result<RunConfig> {
    resolve_config(flag_overlay(cli).over(file_overlay(cli)?), env_output_root())
}

/// For the read-side stages the source of truth is the config snapshot in
/// the store; flags and config file only locate the run.
fn resolve_from_store(cli: &Cli) -> Result<(RunConfig, RunStore)> {
    let overlay = flag_overlay(cli).over(file_overlay(cli)?);
    let output_root = overlay
        .output_root
        .or_else(env_output_root)
        .unwrap_or_else(|| PathBuf::from("."));
    let run_id = overlay
        .run_id
        .ok_or_else(|| Error::Validation("missing required config value: run_id".into()))?;
    let store = RunStore::open(&output_root, &run_id)?;
    if !store.config_path().is_file() {
        return Err(Error::Data(format!(
            "run \"{run_id}\" has no config snapshot yet; run `cxrbench train` first"
        )));
    }
    let config = store.load_config_snapshot()?;
    Ok((config, store))
}

pub fn error_summary_json(err: &Error) -> String {
    format!(
        "{{\"error\":{},\"message\":{}}}",
        serde_json::to_string(err.kind()).unwrap_or_else(|_| "\"unknown\"".into()),
        serde_json::to_string(&err.to_string()).unwrap_or_else(|_| "\"\"".into()),
    )
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::SynthData {
            out,
            n_per_class,
            image_size,
            seed,
            difficulty,
            test_fraction,
        } => {
            let config = SyntheticConfig::new(*n_per_class, *image_size, *seed, *difficulty)
                .with_test_fraction(*test_fraction);
            let manifest = generate_synthetic(&config, out)?;
            println!(
                "wrote {} images and {} ({} train / {} test entries)",
                manifest.entries().len(),
                out.join("manifest.tsv").display(),
                manifest.subset_entries(Subset::Train).count(),
                manifest.subset_entries(Subset::Test).count(),
            );
            Ok(())
        }
        Command::MakeManifest {
            train_txt,
            test_txt,
            out,
        } => {
            if train_txt.is_none() && test_txt.is_none() {
                return Err(Error::Validation(
                    "make-manifest needs --train-txt and/or --test-txt".into(),
                ));
            }
            let mut entries = Vec::new();
            for (path, subset) in [
                (train_txt, Subset::Train),
                (test_txt, Subset::Test),
            ] {
                if let Some(path) = path {
                    let manifest = load_manifest(path, ManifestFormat::CovidxTxt { subset })?;
                    entries.extend(manifest.entries().iter().cloned());
                }
            }
            // re-validate the merged set (duplicate ids, patient overlap)
            crate::dataset::Manifest::new(PathBuf::from("."), entries.clone())?;
            write_manifest_tsv(out, &entries)?;
            println!("wrote {} with {} entries", out.display(), entries.len());
            Ok(())
        }
        Command::Train => {
            let config = resolve_full(&cli)?;
            let summary = stage_train(&config)?;
            println!(
                "run {}: trained {} instances, resumed {}",
                summary.run_id, summary.trained, summary.resumed
            );
            Ok(())
        }
        Command::Evaluate | Command::Ensemble | Command::Report => {
            let (config, store) = resolve_from_store(&cli)?;
            let _lock = store.acquire_lock()?;
            let (scope, stage) = match &cli.command {
                Command::Evaluate => (ReportScope::Evaluation, "evaluate"),
                Command::Ensemble => (ReportScope::Ensembles, "ensemble"),
                _ => (ReportScope::All, "report"),
            };
            let (paths, unchanged) = emit_reports(&config, &store, scope)?;
            println!(
                "{stage}: wrote {} report files under {}{}",
                paths.len(),
                store.report_dir().display(),
                if unchanged { " (unchanged)" } else { "" }
            );
            Ok(())
        }
        Command::Registry { out } => {
            let tsv = registry_tsv();
            match out {
                Some(path) => {
                    fs::write(path, tsv).map_err(|e| Error::io(path, e))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{tsv}"),
            }
            Ok(())
        }
    }
}

