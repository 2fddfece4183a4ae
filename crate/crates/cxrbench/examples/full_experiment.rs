//! End-to-end experiment: synthesize data, train the suite, evaluate, run
//! the ensembles, emit every report, then rerun to show resume semantics.
//!
//! ```bash
//! cargo run --example full_experiment
//! ```

use cxrbench::dataset::{generate_synthetic, SyntheticConfig};
use cxrbench::experiment::run_experiment;
use cxrbench::store::{resolve_config, ConfigOverlay};

fn main() -> cxrbench::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let data_dir = dir.path().join("data");
    generate_synthetic(&SyntheticConfig::new(50, 32, 8, 0.3), &data_dir)?;

    let overlay = ConfigOverlay {
        run_id: Some("demo".into()),
        manifest: Some(data_dir.join("manifest.tsv")),
        output_root: Some(dir.path().join("runs")),
        models: Some(vec!["stub".into()]),
        seeds: Some(vec![1, 2, 3, 4, 5]),
        max_epochs: Some(15),
        patience: Some(5),
        lr_backbone: Some(1e-3),
        lr_head: Some(1e-2),
        batch_size: Some(16),
        workers: Some(2),
        ..Default::default()
    };
    let config = resolve_config(overlay, None)?;

    let summary = run_experiment(&config)?;
    println!(
        "first run: trained {} instances, resumed {}",
        summary.trained, summary.resumed
    );
    for path in &summary.report_paths {
        println!("  report: {}", path.display());
    }

    // a rerun over the complete store trains nothing and re-emits
    // byte-identical reports
    let again = run_experiment(&config)?;
    println!(
        "second run: trained {}, resumed {}, reports unchanged: {}",
        again.trained, again.resumed, again.reports_unchanged
    );

    let report = std::fs::read_to_string(
        dir.path()
            .join("runs")
            .join("demo")
            .join("reports")
            .join("single_models.txt"),
    )
    .expect("report exists");
    println!("\n{report}");
    Ok(())
}
