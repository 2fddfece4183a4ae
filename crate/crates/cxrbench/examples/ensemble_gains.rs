//! Run the three ensemble experiments over a two-model suite and print the
//! homogeneous-ensemble gains.
//!
//! ```bash
//! cargo run --example ensemble_gains
//! ```

use cxrbench::dataset::{
    build_splits, compute_class_weights, counts_from_entries, generate_synthetic, Subset,
    SyntheticConfig,
};
use cxrbench::ensemble::{
    rank_models, run_heterogeneous_topk, run_homogeneous, run_topk_all_instances, TieRule,
};
use cxrbench::experiment::compute_evaluation;
use cxrbench::metrics::Metric;
use cxrbench::store::{resolve_config, ConfigOverlay, RunStore};
use cxrbench::trainer::{train_suite, TrainConfig};

fn main() -> cxrbench::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let manifest = generate_synthetic(
        &SyntheticConfig::new(60, 32, 21, 0.4),
        &dir.path().join("data"),
    )?;
    let split_set = build_splits(&manifest, 0.2, &[1, 2, 3, 4, 5])?;
    let counts = counts_from_entries(manifest.entries(), Subset::Train);
    let train_config = TrainConfig {
        max_epochs: 15,
        patience: 5,
        lr_backbone: 1e-3,
        lr_head: 1e-2,
        batch_size: 16,
        ..TrainConfig::with_weights(compute_class_weights(&counts)?)
    };
    let store = RunStore::open(&dir.path().join("runs"), "gains")?;
    let models = vec!["stub".to_string(), "stub-wide".to_string()];
    let summary = train_suite(&models, &split_set.plans, &train_config, &manifest, &store, 2)?;
    println!(
        "trained {} instances ({} failures)",
        summary.trained.len(),
        summary.failures.len()
    );

    let config = resolve_config(
        ConfigOverlay {
            run_id: Some("gains".into()),
            manifest: Some(dir.path().join("data").join("manifest.tsv")),
            output_root: Some(dir.path().join("runs")),
            models: Some(models.clone()),
            seeds: Some(vec![1, 2, 3, 4, 5]),
            ..Default::default()
        },
        None,
    )?;
    let cache = store.load_cache(&models)?;
    let evaluation = compute_evaluation(&config, &cache)?;
    let ranking = rank_models(&evaluation.singles);
    println!("ranking by mean F1: {}", ranking.join(", "));

    for model in &ranking {
        let outcome = run_homogeneous(model, &cache, TieRule::Positive)?;
        println!("homogeneous ensemble of {model}:");
        for metric in Metric::ALL {
            let gain = outcome.gains.get(metric);
            println!(
                "  {:<4} baseline {:.4} -> ensemble {:.4} (gain {})",
                metric.as_str(),
                gain.baseline_mean,
                gain.ensemble_value,
                gain.gain_percent
                    .map_or("n/a".to_string(), |g| format!("{g:+.2}%"))
            );
        }
    }

    let hetero = run_heterogeneous_topk(2, &ranking, &cache, TieRule::Positive)?;
    println!(
        "top-2 heterogeneous: mean ACC {:.4} (sd {:.4}) over {} ensembles",
        hetero.stats.acc.mean,
        hetero.stats.acc.sd,
        hetero.per_split.len()
    );
    let all = run_topk_all_instances(2, &ranking, &cache, TieRule::Positive)?;
    println!(
        "top-2 all-instances: ACC {:.4} (gain over heterogeneous {})",
        all.ensemble.acc,
        all.gains
            .acc
            .gain_percent
            .map_or("n/a".to_string(), |g| format!("{g:+.2}%"))
    );
    Ok(())
}
