use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

use super::{write_manifest_tsv, Label, Manifest, ManifestEntry, Subset};

/// Parameters of the synthetic two-class dataset.
///
/// Negative images carry a striped texture around a dark base intensity,
/// positive images carry bright blobs around a lighter base. At difficulty 0
/// the per-image intensity offsets are tiny and the classes are separable by
/// mean pixel intensity alone; raising the difficulty widens the offsets
/// until the intensity distributions overlap and only the textures remain
/// informative.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    /// Images per class, train and test combined.
    pub n_per_class: usize,
    pub image_size: usize,
    pub seed: u64,
    pub difficulty: f64,
    /// Share of each class held out as the test subset (rounded half up,
    /// at least one image on each side).
    pub test_fraction: f64,
}

impl SyntheticConfig {
    pub fn new(n_per_class: usize, image_size: usize, seed: u64, difficulty: f64) -> Self {
        SyntheticConfig {
            n_per_class,
            image_size,
            seed,
            difficulty,
            test_fraction: 0.2,
        }
    }

    pub fn with_test_fraction(mut self, fraction: f64) -> Self {
        self.test_fraction = fraction;
        self
    }
}

/// Writes `2 * n_per_class` grayscale PNGs plus a TSV manifest under
/// `out_dir` and returns the loaded manifest. Byte-deterministic in all
/// arguments.
pub fn generate_synthetic(config: &SyntheticConfig, out_dir: &Path) -> Result<Manifest> {
    if config.n_per_class < 2 {
        return Err(Error::Domain(format!(
            "n_per_class must be >= 2 so both subsets are nonempty, got {}",
            config.n_per_class
        )));
    }
    if config.image_size < 8 {
        return Err(Error::Domain(format!(
            "image_size must be >= 8, got {}",
            config.image_size
        )));
    }
    if !(0.0..=1.0).contains(&config.difficulty) {
        return Err(Error::Domain(format!(
            "difficulty must lie in [0, 1], got {}",
            config.difficulty
        )));
    }
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "test_fraction must lie in (0, 1), got {}",
            config.test_fraction
        )));
    }
    let n = config.n_per_class;
    let test_count = ((n as f64 * config.test_fraction).round() as usize).clamp(1, n - 1);

    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;

    let mut entries = Vec::with_capacity(2 * n);
    for (class_idx, label) in [(0u64, Label::Negative), (1u64, Label::Positive)] {
        let tag = match label {
            Label::Negative => "neg",
            Label::Positive => "pos",
        };
        for i in 0..n {
            let stream = (class_idx << 32) | i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream));
            let pixels = render_image(label, config.image_size, config.difficulty, &mut rng);
            let png = encode_gray_png(&pixels, config.image_size as u32)?;
            let image_id = format!("synth-{tag}-{i:05}");
            let rel_path = format!("images/{image_id}.png");
            let file_path = out_dir.join(&rel_path);
            fs::write(&file_path, png).map_err(|e| Error::io(&file_path, e))?;
            entries.push(ManifestEntry {
                image_id,
                path: rel_path,
                label,
                patient_id: Some(format!("pat-{tag}-{i:05}")),
                source: "synthetic".into(),
                subset: if i < n - test_count {
                    Subset::Train
                } else {
                    Subset::Test
                },
            });
        }
    }

    let manifest_path = out_dir.join("manifest.tsv");
    write_manifest_tsv(&manifest_path, &entries)?;
    Manifest::new(out_dir.to_path_buf(), entries)
}

fn add_stripes(canvas: &mut [f64], size: usize, amp: f64, rng: &mut ChaCha8Rng) {
    let s = size as f64;
    let freq = rng.random_range(4.0..8.0);
    let phase = rng.random_range(0.0..TAU);
    for y in 0..size {
        let v = amp * (TAU * freq * y as f64 / s + phase).sin();
        for x in 0..size {
            canvas[y * size + x] += v;
        }
    }
}

fn add_blobs(canvas: &mut [f64], size: usize, count: usize, amp_scale: f64, rng: &mut ChaCha8Rng) {
    let s = size as f64;
    for _ in 0..count {
        let cx = rng.random_range(0.15..0.85) * s;
        let cy = rng.random_range(0.15..0.85) * s;
        let sigma = rng.random_range(0.06..0.12) * s;
        let amp = rng.random_range(35.0..60.0) * amp_scale;
        let denom = 2.0 * sigma * sigma;
        for y in 0..size {
            let dy = y as f64 - cy;
            for x in 0..size {
                let dx = x as f64 - cx;
                canvas[y * size + x] += amp * (-(dx * dx + dy * dy) / denom).exp();
            }
        }
    }
}

fn render_image(label: Label, size: usize, difficulty: f64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let base = match label {
        Label::Negative => 90.0,
        Label::Positive => 150.0,
    };
    // base-intensity jitter grows with difficulty until the class intensity
    // ranges overlap; the off-class pattern bleeds in proportionally, so the
    // textures stop being a clean tell as well
    let jitter = 5.0 + 140.0 * difficulty;
    let offset = (rng.random::<f64>() * 2.0 - 1.0) * jitter;
    let noise_sd = 2.0 + 25.0 * difficulty;

    let mut canvas = vec![base + offset; size * size];
    match label {
        Label::Negative => {
            add_stripes(&mut canvas, size, 22.0, rng);
            let bleed = difficulty * rng.random::<f64>();
            add_blobs(&mut canvas, size, 2, bleed, rng);
        }
        Label::Positive => {
            add_blobs(&mut canvas, size, 3, 1.0, rng);
            let bleed = difficulty * rng.random::<f64>();
            add_stripes(&mut canvas, size, 22.0 * bleed, rng);
        }
    }

    canvas
        .into_iter()
        .map(|v| {
            let z = gauss(rng) * noise_sd;
            (v + z).round().clamp(0.0, 255.0) as u8
        })
        .collect()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1-u keeps the log argument in (0, 1]
    let u1 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

fn encode_gray_png(pixels: &[u8], size: u32) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut encoder = png::Encoder::new(&mut buf, size, size);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Data(format!("png header: {e}")))?;
    writer
        .write_image_data(pixels)
        .map_err(|e| Error::Data(format!("png encode: {e}")))?;
    drop(writer);
    Ok(buf)
}
