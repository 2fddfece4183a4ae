use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Shape of a backbone's last convolutional output: spatial dims x channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvOutputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ConvOutputShape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        ConvOutputShape {
            height,
            width,
            channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PretrainedSource {
    Imagenet,
    None,
}

/// Input-range convention applied after resizing, following each backbone
/// family's published preprocessing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Plain `v / 255` scaling (stub backbones).
    ZeroOne,
    /// `v / 127.5 - 1`, the convention of the Inception-style families.
    TfStyle,
    /// BGR channel order minus the channel means, no scaling (VGG, ResNet v1).
    CaffeStyle,
    /// `v / 255` then per-channel mean/std normalization (DenseNet).
    TorchStyle,
    /// Raw 0..255 values; the network normalizes internally (EfficientNet).
    Passthrough,
}

/// One registry row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneSpec {
    pub name: String,
    pub input_resolution: usize,
    pub last_conv: ConvOutputShape,
    pub pretrained_source: PretrainedSource,
    pub reference_trainable_params: Option<u64>,
    pub normalization: Normalization,
}

impl BackboneSpec {
    pub fn is_stub(&self) -> bool {
        self.name.starts_with("stub")
    }

    /// Desk-scale stub spec at a custom input resolution. The trunk halves
    /// the spatial dims twice, so the feature map is ceil(x/4) square.
    pub fn stub_with_resolution(resolution: usize) -> Self {
        let spatial = resolution.div_ceil(4);
        BackboneSpec {
            name: "stub".into(),
            input_resolution: resolution,
            last_conv: ConvOutputShape::new(spatial, spatial, 16),
            pretrained_source: PretrainedSource::None,
            reference_trainable_params: None,
            normalization: Normalization::ZeroOne,
        }
    }
}

/// Classification head appended to every backbone: global average pooling,
/// a ReLU dense layer, dropout, and a 2-way output read before softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadSpec {
    pub dense_units: usize,
    pub dropout_rate: f64,
    pub output_classes: usize,
}

impl Default for HeadSpec {
    fn default() -> Self {
        HeadSpec {
            dense_units: 256,
            dropout_rate: 0.20,
            output_classes: 2,
        }
    }
}

impl HeadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Validation(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.dense_units == 0 || self.output_classes < 2 {
            return Err(Error::Validation(
                "head needs dense_units > 0 and output_classes >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// Head parameter count for a backbone with `channels` output channels:
/// dense (channels x 256 + 256) plus classifier (256 x 2 + 2).
pub fn head_param_count(channels: usize) -> Result<u64> {
    if channels == 0 {
        return Err(Error::Domain("channel count must be > 0".into()));
    }
    let z = channels as u64;
    Ok(z * 256 + 256 + 256 * 2 + 2)
}

struct Row {
    name: &'static str,
    resolution: usize,
    conv: (usize, usize, usize),
    params: u64,
    norm: Normalization,
}

// published characteristics of the benchmarked architectures
const ROWS: &[Row] = &[
    Row { name: "DenseNet121", resolution: 224, conv: (7, 7, 1024), params: 7_216_770, norm: Normalization::TorchStyle },
    Row { name: "DenseNet169", resolution: 224, conv: (7, 7, 1664), params: 12_911_234, norm: Normalization::TorchStyle },
    Row { name: "DenseNet201", resolution: 224, conv: (7, 7, 1920), params: 18_585_218, norm: Normalization::TorchStyle },
    Row { name: "EfficientNetB0", resolution: 224, conv: (7, 7, 1280), params: 4_335_998, norm: Normalization::Passthrough },
    Row { name: "EfficientNetB1", resolution: 240, conv: (8, 8, 1280), params: 6_841_634, norm: Normalization::Passthrough },
    Row { name: "EfficientNetB2", resolution: 260, conv: (9, 9, 1408), params: 8_062_212, norm: Normalization::Passthrough },
    Row { name: "EfficientNetB3", resolution: 300, conv: (10, 10, 1536), params: 11_090_218, norm: Normalization::Passthrough },
    Row { name: "InceptionResNetV2", resolution: 299, conv: (8, 8, 1536), params: 54_670_178, norm: Normalization::TfStyle },
    Row { name: "InceptionV3", resolution: 299, conv: (8, 8, 2048), params: 22_293_410, norm: Normalization::TfStyle },
    Row { name: "MobileNet", resolution: 224, conv: (7, 7, 1024), params: 3_469_890, norm: Normalization::TfStyle },
    Row { name: "MobileNetV2", resolution: 224, conv: (7, 7, 1280), params: 2_552_322, norm: Normalization::TfStyle },
    Row { name: "NASNetMobile", resolution: 224, conv: (7, 7, 1056), params: 4_504_084, norm: Normalization::TfStyle },
    Row { name: "ResNet101", resolution: 224, conv: (7, 7, 2048), params: 43_077_890, norm: Normalization::CaffeStyle },
    Row { name: "ResNet101V2", resolution: 224, conv: (7, 7, 2048), params: 43_053_954, norm: Normalization::TfStyle },
    Row { name: "ResNet152", resolution: 224, conv: (7, 7, 2048), params: 58_744_578, norm: Normalization::CaffeStyle },
    Row { name: "ResNet152V2", resolution: 224, conv: (7, 7, 2048), params: 58_712_962, norm: Normalization::TfStyle },
    Row { name: "ResNet50", resolution: 224, conv: (7, 7, 2048), params: 24_059_650, norm: Normalization::CaffeStyle },
    Row { name: "ResNet50V2", resolution: 224, conv: (7, 7, 2048), params: 24_044_418, norm: Normalization::TfStyle },
    Row { name: "VGG16", resolution: 224, conv: (7, 7, 512), params: 14_846_530, norm: Normalization::CaffeStyle },
    Row { name: "VGG19", resolution: 224, conv: (7, 7, 512), params: 20_156_226, norm: Normalization::CaffeStyle },
    Row { name: "Xception", resolution: 299, conv: (10, 10, 2048), params: 21_332_010, norm: Normalization::TfStyle },
];

fn build_registry() -> Vec<BackboneSpec> {
    let mut specs: Vec<BackboneSpec> = ROWS
        .iter()
        .map(|r| BackboneSpec {
            name: r.name.to_string(),
            input_resolution: r.resolution,
            last_conv: ConvOutputShape::new(r.conv.0, r.conv.1, r.conv.2),
            pretrained_source: PretrainedSource::Imagenet,
            reference_trainable_params: Some(r.params),
            normalization: r.norm,
        })
        .collect();
    specs.push(BackboneSpec::stub_with_resolution(32));
    // a second desk-scale trunk with a wider feature map, so multi-model
    // experiments can run without any pretrained ecosystem
    specs.push(BackboneSpec {
        name: "stub-wide".into(),
        input_resolution: 32,
        last_conv: ConvOutputShape::new(8, 8, 24),
        pretrained_source: PretrainedSource::None,
        reference_trainable_params: None,
        normalization: Normalization::ZeroOne,
    });
    specs
}

/// Immutable registry, built once.
pub fn registry() -> &'static [BackboneSpec] {
    static REGISTRY: OnceLock<Vec<BackboneSpec>> = OnceLock::new();
    REGISTRY.get_or_init(build_registry)
}

pub fn registry_lookup(name: &str) -> Result<&'static BackboneSpec> {
    registry()
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Lookup {
            name: name.to_string(),
            valid: registry().iter().map(|s| s.name.clone()).collect(),
        })
}

/// Registry dump as TSV for documentation parity.
pub fn registry_tsv() -> String {
    let mut out = String::from("model\tinput_resolution\tlast_conv_shape\treference_trainable_params\n");
    for spec in registry() {
        let params = spec
            .reference_trainable_params
            .map(|p| p.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}x{}x{}\t{}\n",
            spec.name,
            spec.input_resolution,
            spec.last_conv.height,
            spec.last_conv.width,
            spec.last_conv.channels,
            params
        ));
    }
    out
}
