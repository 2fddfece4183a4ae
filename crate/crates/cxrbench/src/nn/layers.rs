use rand::Rng;

use super::tensor::Tensor3;

/// 2-D convolution with square kernel, zero padding, and bias.
///
/// Gradients accumulate into `grad_weight` / `grad_bias` until the owner
/// zeroes them; `backward` also returns the gradient w.r.t. the input.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub ksize: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

impl Conv2d {
    /// He-uniform weight init, zero bias.
    pub fn init(
        in_ch: usize,
        out_ch: usize,
        ksize: usize,
        stride: usize,
        pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = (in_ch * ksize * ksize) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let n = out_ch * in_ch * ksize * ksize;
        let weight = (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound).collect();
        Conv2d {
            in_ch,
            out_ch,
            ksize,
            stride,
            pad,
            weight,
            bias: vec![0.0; out_ch],
            grad_weight: vec![0.0; n],
            grad_bias: vec![0.0; out_ch],
        }
    }

    pub fn out_dim(&self, in_dim: usize) -> usize {
        (in_dim + 2 * self.pad - self.ksize) / self.stride + 1
    }

    #[inline]
    fn widx(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_ch + ic) * self.ksize + ky) * self.ksize + kx
    }

    pub fn forward(&self, input: &Tensor3) -> Tensor3 {
        debug_assert_eq!(input.c, self.in_ch);
        let oh = self.out_dim(input.h);
        let ow = self.out_dim(input.w);
        let mut out = Tensor3::zeros(oh, ow, self.out_ch);
        for oy in 0..oh {
            for ox in 0..ow {
                for oc in 0..self.out_ch {
                    let mut acc = self.bias[oc];
                    for ky in 0..self.ksize {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= input.h as isize {
                            continue;
                        }
                        for kx in 0..self.ksize {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= input.w as isize {
                                continue;
                            }
                            for ic in 0..self.in_ch {
                                acc += self.weight[self.widx(oc, ic, ky, kx)]
                                    * input.at(iy as usize, ix as usize, ic);
                            }
                        }
                    }
                    *out.at_mut(oy, ox, oc) = acc;
                }
            }
        }
        out
    }

    /// Accumulates weight/bias gradients and returns d(loss)/d(input).
    pub fn backward(&mut self, input: &Tensor3, grad_out: &Tensor3) -> Tensor3 {
        let mut grad_in = Tensor3::zeros(input.h, input.w, input.c);
        for oy in 0..grad_out.h {
            for ox in 0..grad_out.w {
                for oc in 0..self.out_ch {
                    let g = grad_out.at(oy, ox, oc);
                    if g == 0.0 {
                        continue;
                    }
                    self.grad_bias[oc] += g;
                    for ky in 0..self.ksize {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= input.h as isize {
                            continue;
                        }
                        for kx in 0..self.ksize {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= input.w as isize {
                                continue;
                            }
                            for ic in 0..self.in_ch {
                                let wi = self.widx(oc, ic, ky, kx);
                                self.grad_weight[wi] += g * input.at(iy as usize, ix as usize, ic);
                                *grad_in.at_mut(iy as usize, ix as usize, ic) += g * self.weight[wi];
                            }
                        }
                    }
                }
            }
        }
        grad_in
    }
}

/// Fully connected layer, weight layout `[out][in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weight init, zero bias.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let n = in_dim * out_dim;
        let weight = (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound).collect();
        Dense {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
            grad_weight: vec![0.0; n],
            grad_bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.in_dim);
        let mut out = self.bias.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *out_v += acc;
        }
        out
    }

    pub fn backward(&mut self, input: &[f64], grad_out: &[f64]) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.in_dim];
        for (o, g) in grad_out.iter().enumerate() {
            self.grad_bias[o] += g;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                self.grad_weight[row + i] += g * input[i];
                grad_in[i] += g * self.weight[row + i];
            }
        }
        grad_in
    }
}

pub fn relu_forward(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Masks `grad` by the sign of the pre-activation values.
pub fn relu_backward(pre: &[f64], grad: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(grad)
        .map(|(p, g)| if *p > 0.0 { *g } else { 0.0 })
        .collect()
}

/// Global average pool over the spatial dims: (h, w, c) -> c values.
pub fn gap_forward(t: &Tensor3) -> Vec<f64> {
    let area = (t.h * t.w) as f64;
    let mut out = vec![0.0; t.c];
    for y in 0..t.h {
        for x in 0..t.w {
            for (c, acc) in out.iter_mut().enumerate() {
                *acc += t.at(y, x, c);
            }
        }
    }
    for v in &mut out {
        *v /= area;
    }
    out
}

pub fn gap_backward(grad: &[f64], h: usize, w: usize) -> Tensor3 {
    let area = (h * w) as f64;
    Tensor3::from_fn(h, w, grad.len(), |_, _, c| grad[c] / area)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise 1/(1-rate).
pub fn dropout_mask(rng: &mut impl Rng, len: usize, rate: f64) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&rate));
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}
