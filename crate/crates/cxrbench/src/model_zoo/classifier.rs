use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{
    dropout_mask, gap_backward, gap_forward, relu_backward, relu_forward, Dense, ParamGroup,
    ParamSlot, Tensor3,
};
use crate::seed::derive_seed;

use super::registry::{BackboneSpec, HeadSpec};
use super::stub::{StubBackbone, StubCache};

const INIT_STREAM: u64 = 0x696e_6974;
const DROPOUT_STREAM: u64 = 0x6472_6f70;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Pretrained,
    Random,
}

/// Trainable model handle: stub trunk plus the classification head
/// (global average pool, dense + ReLU, dropout, 2-way output).
///
/// The forward pass ends before any softmax; decisions and losses work on
/// the raw two-logit output. Parameters split into the `Backbone` and `Head`
/// groups for the two-tier learning rates. Single-owner: one training loop
/// per handle.
#[derive(Debug, Clone)]
pub struct Classifier {
    spec: BackboneSpec,
    head_spec: HeadSpec,
    backbone: StubBackbone,
    dense: Dense,
    output: Dense,
    dropout_rng: ChaCha8Rng,
}

/// Intermediates for one sample's backward pass.
pub struct ForwardCache {
    stub: StubCache,
    features: Tensor3,
    pooled: Vec<f64>,
    dense_pre: Vec<f64>,
    mask: Option<Vec<f64>>,
    dropped: Vec<f64>,
}

/// Builds a trainable classifier for `spec`.
///
/// Only the stub backbones have an in-crate implementation, and they carry
/// no pretrained weights, so `Pretrained` init (and any full-size backbone)
/// reports an initialization error.
pub fn build_classifier(
    spec: &BackboneSpec,
    head: &HeadSpec,
    init: InitMode,
    seed: u64,
) -> Result<Classifier> {
    head.validate()?;
    if !spec.is_stub() {
        return Err(Error::Init(format!(
            "pretrained weights and a trainable implementation for \"{}\" are not bundled; \
             use a stub backbone for desk-scale runs",
            spec.name
        )));
    }
    if init == InitMode::Pretrained {
        return Err(Error::Init(format!(
            "backbone \"{}\" supports random init only",
            spec.name
        )));
    }
    let out_channels = spec.last_conv.channels;
    let mid_channels = out_channels / 2;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
    let backbone = StubBackbone::init(mid_channels, out_channels, &mut init_rng);
    let dense = Dense::init(out_channels, head.dense_units, &mut init_rng);
    let output = Dense::init(head.dense_units, head.output_classes, &mut init_rng);
    let classifier = Classifier {
        spec: spec.clone(),
        head_spec: *head,
        backbone,
        dense,
        output,
        dropout_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, DROPOUT_STREAM)),
    };
    if let Some(reference) = spec.reference_trainable_params {
        let actual = classifier.param_count();
        if actual != reference {
            eprintln!(
                "warning: backbone \"{}\" has {actual} trainable parameters, reference lists {reference}",
                spec.name
            );
        }
    }
    Ok(classifier)
}

impl Classifier {
    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn input_resolution(&self) -> usize {
        self.spec.input_resolution
    }

    fn forward_inner(&mut self, input: &Tensor3, train_mode: bool) -> ([f64; 2], ForwardCache) {
        debug_assert_eq!((input.h, input.w, input.c), (
            self.spec.input_resolution,
            self.spec.input_resolution,
            3
        ));
        let (features, stub) = self.backbone.forward(input);
        let pooled = gap_forward(&features);
        let dense_pre = self.dense.forward(&pooled);
        let dense_act = relu_forward(&dense_pre);
        let (mask, dropped) = if train_mode && self.head_spec.dropout_rate > 0.0 {
            let mask = dropout_mask(
                &mut self.dropout_rng,
                dense_act.len(),
                self.head_spec.dropout_rate,
            );
            let dropped: Vec<f64> = dense_act.iter().zip(&mask).map(|(v, m)| v * m).collect();
            (Some(mask), dropped)
        } else {
            (None, dense_act)
        };
        let logits_vec = self.output.forward(&dropped);
        let logits = [logits_vec[0], logits_vec[1]];
        (
            logits,
            ForwardCache {
                stub,
                features,
                pooled,
                dense_pre,
                mask,
                dropped,
            },
        )
    }

    /// Inference forward pass (dropout disabled): two pre-softmax outputs.
    pub fn forward_eval(&mut self, input: &Tensor3) -> [f64; 2] {
        self.forward_inner(input, false).0
    }

    /// Training forward pass; keep the cache for `backward`.
    pub fn forward_train(&mut self, input: &Tensor3) -> ([f64; 2], ForwardCache) {
        self.forward_inner(input, true)
    }

    /// Accumulates parameter gradients for one sample.
    pub fn backward(&mut self, input: &Tensor3, cache: &ForwardCache, grad_logits: [f64; 2]) {
        let g_dropped = self.output.backward(&cache.dropped, &grad_logits);
        let g_act: Vec<f64> = match &cache.mask {
            Some(mask) => g_dropped.iter().zip(mask).map(|(g, m)| g * m).collect(),
            None => g_dropped,
        };
        let g_dense_pre = relu_backward(&cache.dense_pre, &g_act);
        let g_pooled = self.dense.backward(&cache.pooled, &g_dense_pre);
        let g_features = gap_backward(&g_pooled, cache.features.h, cache.features.w);
        self.backbone.backward(input, &cache.stub, &g_features);
    }

    pub fn zero_grads(&mut self) {
        for slot in self.param_slots() {
            slot.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Scale all accumulated gradients, e.g. by 1/batch_size.
    pub fn scale_grads(&mut self, factor: f64) {
        for slot in self.param_slots() {
            slot.grad.iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Stable-ordered parameter views for the optimizer.
    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        vec![
            ParamSlot {
                group: ParamGroup::Backbone,
                value: &mut self.backbone.conv1.weight,
                grad: &mut self.backbone.conv1.grad_weight,
            },
            ParamSlot {
                group: ParamGroup::Backbone,
                value: &mut self.backbone.conv1.bias,
                grad: &mut self.backbone.conv1.grad_bias,
            },
            ParamSlot {
                group: ParamGroup::Backbone,
                value: &mut self.backbone.conv2.weight,
                grad: &mut self.backbone.conv2.grad_weight,
            },
            ParamSlot {
                group: ParamGroup::Backbone,
                value: &mut self.backbone.conv2.bias,
                grad: &mut self.backbone.conv2.grad_bias,
            },
            ParamSlot {
                group: ParamGroup::Head,
                value: &mut self.dense.weight,
                grad: &mut self.dense.grad_weight,
            },
            ParamSlot {
                group: ParamGroup::Head,
                value: &mut self.dense.bias,
                grad: &mut self.dense.grad_bias,
            },
            ParamSlot {
                group: ParamGroup::Head,
                value: &mut self.output.weight,
                grad: &mut self.output.grad_weight,
            },
            ParamSlot {
                group: ParamGroup::Head,
                value: &mut self.output.bias,
                grad: &mut self.output.grad_bias,
            },
        ]
    }

    /// Full-precision copy of every parameter tensor, in slot order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        vec![
            self.backbone.conv1.weight.clone(),
            self.backbone.conv1.bias.clone(),
            self.backbone.conv2.weight.clone(),
            self.backbone.conv2.bias.clone(),
            self.dense.weight.clone(),
            self.dense.bias.clone(),
            self.output.weight.clone(),
            self.output.bias.clone(),
        ]
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        let mut slots = self.param_slots();
        if snapshot.len() != slots.len() {
            return Err(Error::Data(format!(
                "weight snapshot has {} tensors, model has {}",
                snapshot.len(),
                slots.len()
            )));
        }
        for (slot, saved) in slots.iter_mut().zip(snapshot) {
            if slot.value.len() != saved.len() {
                return Err(Error::Data(format!(
                    "weight tensor length mismatch: {} vs {}",
                    slot.value.len(),
                    saved.len()
                )));
            }
            slot.value.copy_from_slice(saved);
        }
        Ok(())
    }

    pub fn param_count(&self) -> u64 {
        self.snapshot().iter().map(|t| t.len() as u64).sum()
    }

    pub fn head_param_count(&self) -> u64 {
        (self.dense.weight.len()
            + self.dense.bias.len()
            + self.output.weight.len()
            + self.output.bias.len()) as u64
    }
}
