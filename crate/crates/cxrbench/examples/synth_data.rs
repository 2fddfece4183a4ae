//! Generate a deterministic synthetic two-class dataset and verify that at
//! difficulty 0 a bare mean-intensity threshold separates the classes.
//!
//! ```bash
//! cargo run --example synth_data
//! ```

use cxrbench::dataset::{generate_synthetic, Label, Subset, SyntheticConfig};
use cxrbench::model_zoo::decode_png;

fn main() -> cxrbench::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let config = SyntheticConfig::new(20, 64, 7, 0.0);
    let manifest = generate_synthetic(&config, dir.path())?;

    println!(
        "wrote {} images under {}",
        manifest.entries().len(),
        dir.path().display()
    );
    println!(
        "train entries: {}, test entries: {}",
        manifest.subset_entries(Subset::Train).count(),
        manifest.subset_entries(Subset::Test).count()
    );

    // a depth-0 classifier: threshold on mean pixel intensity, learned from
    // the train subset
    let mut class_means = [(0.0, 0usize), (0.0, 0usize)];
    for entry in manifest.subset_entries(Subset::Train) {
        let img = decode_png(&manifest.resolve_path(entry))?;
        let slot = &mut class_means[(entry.label == Label::Positive) as usize];
        slot.0 += img.mean_intensity();
        slot.1 += 1;
    }
    let neg_mean = class_means[0].0 / class_means[0].1 as f64;
    let pos_mean = class_means[1].0 / class_means[1].1 as f64;
    let threshold = (neg_mean + pos_mean) / 2.0;
    println!("train mean intensities: negative {neg_mean:.1}, positive {pos_mean:.1}");

    let mut correct = 0;
    let mut total = 0;
    for entry in manifest.subset_entries(Subset::Test) {
        let img = decode_png(&manifest.resolve_path(entry))?;
        let predicted = if img.mean_intensity() > threshold {
            Label::Positive
        } else {
            Label::Negative
        };
        correct += usize::from(predicted == entry.label);
        total += 1;
    }
    println!("threshold classifier on the test subset: {correct}/{total} correct");
    Ok(())
}
