//! Dense building blocks with hand-written backward passes.
//!
//! Activations are flat `f32` buffers in channel-major layout
//! (`[channel][row][col]`). Every backward function *accumulates* into the
//! parameter gradients it is handed, so callers zero them once per step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `c = op(a) * op(b)` (or `c += ...` when `accumulate`), with `op(a)` of
/// shape `m x k` and `op(b)` of shape `k x n`, all row-major.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    trans_a: bool,
    b: &[f32],
    trans_b: bool,
    c: &mut [f32],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices cover exactly the m*k, k*n and m*n elements addressed
    // by these strides, as asserted above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2 / pi)
const GELU_A: f32 = 0.044_715;

/// Tanh-approximated GELU.
#[inline]
pub fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad(x: f32) -> f32 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn gelu_inplace(xs: &mut [f32]) {
    xs.iter_mut().for_each(|x| *x = gelu(*x));
}

/// `grad[i] *= gelu'(pre[i])`.
pub fn gelu_backward(pre: &[f32], grad: &mut [f32]) {
    for (g, &x) in grad.iter_mut().zip(pre) {
        *g *= gelu_grad(x);
    }
}

/// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
pub fn fan_in_uniform(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<f32> {
    let bound = 1.0 / (fan_in.max(1) as f32).sqrt();
    (0..len).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Square-kernel, stride-1, zero-padded ("same") 2-D convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `out_channels x (in_channels * kernel * kernel)`
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: vec![0.0; out_channels * in_channels * kernel * kernel],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn init(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            weight: fan_in_uniform(rng, out_channels * fan_in, fan_in),
            bias: fan_in_uniform(rng, out_channels, fan_in),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    fn im2col(&self, input: &[f32], h: usize, w: usize) -> Vec<f32> {
        let k = self.kernel;
        let pad = k / 2;
        let hw = h * w;
        let mut col = vec![0f32; self.patch_len() * hw];
        for ci in 0..self.in_channels {
            let plane = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - pad as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        let dst = &mut row[y * w..(y + 1) * w];
                        let shift = kx as isize - pad as isize;
                        let x0 = (-shift).max(0) as usize;
                        let x1 = (w as isize - shift).min(w as isize).max(0) as usize;
                        for x in x0..x1 {
                            dst[x] = src[(x as isize + shift) as usize];
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f32], h: usize, w: usize) -> Vec<f32> {
        let k = self.kernel;
        let pad = k / 2;
        let hw = h * w;
        let mut out = vec![0f32; self.in_channels * hw];
        for ci in 0..self.in_channels {
            let plane = &mut out[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - pad as isize;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let shift = kx as isize - pad as isize;
                        let x0 = (-shift).max(0) as usize;
                        let x1 = (w as isize - shift).min(w as isize).max(0) as usize;
                        let src = &row[y * w..(y + 1) * w];
                        let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                        for x in x0..x1 {
                            dst[(x as isize + shift) as usize] += src[x];
                        }
                    }
                }
            }
        }
        out
    }

    pub fn forward(&self, input: &[f32], h: usize, w: usize) -> Vec<f32> {
        debug_assert_eq!(input.len(), self.in_channels * h * w);
        let hw = h * w;
        let mut out = vec![0f32; self.out_channels * hw];
        for (o, &b) in self.bias.iter().enumerate() {
            out[o * hw..(o + 1) * hw].fill(b);
        }
        if self.kernel == 1 {
            gemm(self.out_channels, self.in_channels, hw, &self.weight, false, input, false, &mut out, true);
        } else {
            let col = self.im2col(input, h, w);
            gemm(self.out_channels, self.patch_len(), hw, &self.weight, false, &col, false, &mut out, true);
        }
        out
    }

    /// Accumulates parameter gradients and returns the input gradient (when requested).
    pub fn backward(
        &self,
        input: &[f32],
        h: usize,
        w: usize,
        grad_out: &[f32],
        grads: &mut ConvGrads,
        want_input_grad: bool,
    ) -> Option<Vec<f32>> {
        let hw = h * w;
        for (o, gb) in grads.bias.iter_mut().enumerate() {
            *gb += grad_out[o * hw..(o + 1) * hw].iter().sum::<f32>();
        }
        let ckk = self.patch_len();
        if self.kernel == 1 {
            gemm(self.out_channels, hw, ckk, grad_out, false, input, true, &mut grads.weight, true);
            if !want_input_grad {
                return None;
            }
            let mut gin = vec![0f32; ckk * hw];
            gemm(ckk, self.out_channels, hw, &self.weight, true, grad_out, false, &mut gin, false);
            return Some(gin);
        }
        let col = self.im2col(input, h, w);
        gemm(self.out_channels, hw, ckk, grad_out, false, &col, true, &mut grads.weight, true);
        if !want_input_grad {
            return None;
        }
        let mut gcol = vec![0f32; ckk * hw];
        gemm(ckk, self.out_channels, hw, &self.weight, true, grad_out, false, &mut gcol, false);
        Some(self.col2im(&gcol, h, w))
    }

    pub fn zero_grads(&self) -> ConvGrads {
        ConvGrads { weight: vec![0.0; self.weight.len()], bias: vec![0.0; self.bias.len()] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Depth-to-space: `(C*s*s, H, W) -> (C, H*s, W*s)` with
/// `out[c, y*s+i, x*s+j] = in[c*s*s + i*s + j, y, x]`.
pub fn pixel_shuffle(input: &[f32], channels: usize, h: usize, w: usize, s: usize) -> Vec<f32> {
    debug_assert_eq!(input.len(), channels * s * s * h * w);
    let (oh, ow) = (h * s, w * s);
    let mut out = vec![0f32; channels * oh * ow];
    for c in 0..channels {
        for i in 0..s {
            for j in 0..s {
                let src = &input[((c * s + i) * s + j) * h * w..][..h * w];
                for y in 0..h {
                    let dst_row = &mut out[(c * oh + y * s + i) * ow..][..ow];
                    for x in 0..w {
                        dst_row[x * s + j] = src[y * w + x];
                    }
                }
            }
        }
    }
    out
}

/// Inverse of [`pixel_shuffle`]; also its exact backward pass.
pub fn pixel_unshuffle(input: &[f32], channels: usize, h: usize, w: usize, s: usize) -> Vec<f32> {
    let (oh, ow) = (h * s, w * s);
    debug_assert_eq!(input.len(), channels * oh * ow);
    let mut out = vec![0f32; channels * s * s * h * w];
    for c in 0..channels {
        for i in 0..s {
            for j in 0..s {
                let dst = &mut out[((c * s + i) * s + j) * h * w..][..h * w];
                for y in 0..h {
                    let src_row = &input[(c * oh + y * s + i) * ow..][..ow];
                    for x in 0..w {
                        dst[y * w + x] = src_row[x * s + j];
                    }
                }
            }
        }
    }
    out
}

/// Offsets `(floor((h - th)/2), floor((w - tw)/2))` of a centered crop.
pub fn crop_offsets(h: usize, w: usize, th: usize, tw: usize) -> (usize, usize) {
    ((h - th) / 2, (w - tw) / 2)
}

pub fn center_crop(input: &[f32], channels: usize, h: usize, w: usize, th: usize, tw: usize) -> Vec<f32> {
    let (oy, ox) = crop_offsets(h, w, th, tw);
    let mut out = Vec::with_capacity(channels * th * tw);
    for c in 0..channels {
        for y in 0..th {
            let start = (c * h + oy + y) * w + ox;
            out.extend_from_slice(&input[start..start + tw]);
        }
    }
    out
}

/// Backward of [`center_crop`]: scatters into a zero buffer of the pre-crop size.
pub fn center_uncrop(grad: &[f32], channels: usize, h: usize, w: usize, th: usize, tw: usize) -> Vec<f32> {
    let (oy, ox) = crop_offsets(h, w, th, tw);
    let mut out = vec![0f32; channels * h * w];
    for c in 0..channels {
        for y in 0..th {
            let start = (c * h + oy + y) * w + ox;
            out[start..start + tw].copy_from_slice(&grad[(c * th + y) * tw..][..tw]);
        }
    }
    out
}

/// Fully connected layer acting on row vectors: `Y = X W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    pub fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            inputs,
            outputs,
            weight: fan_in_uniform(rng, inputs * outputs, inputs),
            bias: fan_in_uniform(rng, outputs, inputs),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// `x` holds `rows` row vectors of length `inputs`.
    pub fn forward(&self, x: &[f32], rows: usize) -> Vec<f32> {
        debug_assert_eq!(x.len(), rows * self.inputs);
        let mut y = Vec::with_capacity(rows * self.outputs);
        for _ in 0..rows {
            y.extend_from_slice(&self.bias);
        }
        gemm(rows, self.inputs, self.outputs, x, false, &self.weight, true, &mut y, true);
        y
    }

    pub fn backward(
        &self,
        x: &[f32],
        rows: usize,
        grad_y: &[f32],
        grads: &mut LinearGrads,
        want_input_grad: bool,
    ) -> Option<Vec<f32>> {
        for r in 0..rows {
            for (gb, &g) in grads.bias.iter_mut().zip(&grad_y[r * self.outputs..(r + 1) * self.outputs]) {
                *gb += g;
            }
        }
        gemm(self.outputs, rows, self.inputs, grad_y, true, x, false, &mut grads.weight, true);
        if !want_input_grad {
            return None;
        }
        let mut gx = vec![0f32; rows * self.inputs];
        gemm(rows, self.outputs, self.inputs, grad_y, false, &self.weight, false, &mut gx, false);
        Some(gx)
    }

    pub fn zero_grads(&self) -> LinearGrads {
        LinearGrads { weight: vec![0.0; self.weight.len()], bias: vec![0.0; self.bias.len()] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Adam with optional L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    step: u32,
    moments: Vec<(Vec<f32>, Vec<f32>)>,
}

impl Adam {
    pub fn new(shapes: &[usize], weight_decay: f32) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            moments: shapes.iter().map(|&n| (vec![0.0; n], vec![0.0; n])).collect(),
        }
    }

    /// One update over parallel lists of parameter and gradient tensors.
    pub fn step(&mut self, params: Vec<&mut [f32]>, grads: Vec<&[f32]>, lr: f32) {
        assert_eq!(params.len(), self.moments.len());
        assert_eq!(grads.len(), self.moments.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let step_size = lr / bc1;
        let bc2_sqrt = bc2.sqrt();
        for ((p, g), (m, v)) in params.into_iter().zip(grads).zip(&mut self.moments) {
            for i in 0..p.len() {
                let gi = g[i] + self.weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                p[i] -= step_size * m[i] / (v[i].sqrt() / bc2_sqrt + self.eps);
            }
        }
    }
}

/// Cosine decay from `lr_init` at step 0 to zero at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineSchedule {
    pub lr_init: f64,
    pub total_steps: usize,
}

impl CosineSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if self.total_steps == 0 {
            return self.lr_init;
        }
        let progress = (step as f64 / self.total_steps as f64).min(1.0);
        0.5 * self.lr_init * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}
