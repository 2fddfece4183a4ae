use rand::Rng;

use crate::nn::{relu_backward, relu_forward, Conv2d, Tensor3};

/// Desk-scale convolutional trunk: two stride-2 3x3 conv + ReLU stages.
///
/// Maps an (x, x, 3) input to a (ceil(x/4), ceil(x/4), out_channels)
/// feature map, standing in for the full-size backbones so the whole
/// pipeline is exercisable on a CPU.
#[derive(Debug, Clone)]
pub struct StubBackbone {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

/// Intermediates needed by the backward pass.
#[derive(Debug, Clone)]
pub struct StubCache {
    pub a1_pre: Tensor3,
    pub a1: Tensor3,
    pub a2_pre: Tensor3,
}

impl StubBackbone {
    pub fn init(mid_channels: usize, out_channels: usize, rng: &mut impl Rng) -> Self {
        StubBackbone {
            conv1: Conv2d::init(3, mid_channels, 3, 2, 1, rng),
            conv2: Conv2d::init(mid_channels, out_channels, 3, 2, 1, rng),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_ch
    }

    pub fn forward(&self, input: &Tensor3) -> (Tensor3, StubCache) {
        let a1_pre = self.conv1.forward(input);
        let a1 = Tensor3 {
            h: a1_pre.h,
            w: a1_pre.w,
            c: a1_pre.c,
            data: relu_forward(&a1_pre.data),
        };
        let a2_pre = self.conv2.forward(&a1);
        let features = Tensor3 {
            h: a2_pre.h,
            w: a2_pre.w,
            c: a2_pre.c,
            data: relu_forward(&a2_pre.data),
        };
        (features, StubCache { a1_pre, a1, a2_pre })
    }

    pub fn backward(&mut self, input: &Tensor3, cache: &StubCache, grad_features: &Tensor3) {
        let g_a2_pre = Tensor3 {
            h: grad_features.h,
            w: grad_features.w,
            c: grad_features.c,
            data: relu_backward(&cache.a2_pre.data, &grad_features.data),
        };
        let g_a1 = self.conv2.backward(&cache.a1, &g_a2_pre);
        let g_a1_pre = Tensor3 {
            h: g_a1.h,
            w: g_a1.w,
            c: g_a1.c,
            data: relu_backward(&cache.a1_pre.data, &g_a1.data),
        };
        self.conv1.backward(input, &g_a1_pre);
    }
}
