//! Backbone registry, input preprocessing, and classifier construction.
//!
//! The registry records every benchmarked architecture's published input
//! resolution, final feature-map shape, and reference trainable-parameter
//! count. Only the desk-scale stub backbones have an in-crate trainable
//! implementation; the full-size architectures are registry metadata whose
//! classifier construction reports the missing pretrained implementation.

mod classifier;
mod preprocess;
mod registry;
mod stub;

pub use classifier::{build_classifier, Classifier, ForwardCache, InitMode};
pub use preprocess::{decode_png, normalize, preprocess, resize_bilinear, RasterImage};
pub use registry::{
    head_param_count, registry, registry_lookup, registry_tsv, BackboneSpec, ConvOutputShape,
    HeadSpec, Normalization, PretrainedSource,
};
pub use stub::StubBackbone;
