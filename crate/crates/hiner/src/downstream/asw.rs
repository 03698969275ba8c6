//! Adaptive spectral weighting: a learned per-band gain followed by a
//! residual cross-band 1x1 mixer.
//!
//! ```text
//! d = spatial mean of each band            (C)
//! W = mlp2(gelu(mlp1(d)))                  (C)
//! P = recon * W, band-wise
//! out = P + conv_b(gelu(conv_a(P)))
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{self, Conv2d, ConvGrads, Linear, LinearGrads};

#[derive(Debug, Clone, PartialEq)]
pub struct AswParams {
    pub bands: usize,
    pub hidden: usize,
    pub mlp1: Linear,
    pub mlp2: Linear,
    pub conv_a: Conv2d,
    pub conv_b: Conv2d,
}

/// Mixer width used by [`AswParams::init`].
pub fn default_hidden(bands: usize) -> usize {
    (bands / 2).max(4)
}

impl AswParams {
    /// Random first layers; the gain starts at exactly 1 and the mixer's
    /// output layer at 0, so a fresh adapter is the identity.
    pub fn init(bands: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = default_hidden(bands);
        let mlp1 = Linear::init(bands, bands, &mut rng);
        let mut mlp2 = Linear::zeros(bands, bands);
        mlp2.bias.fill(1.0);
        let conv_a = Conv2d::init(bands, hidden, 1, &mut rng);
        let conv_b = Conv2d::zeros(hidden, bands, 1);
        Self { bands, hidden, mlp1, mlp2, conv_a, conv_b }
    }

    /// All-zero except the unit gain bias.
    pub fn identity(bands: usize) -> Self {
        let hidden = default_hidden(bands);
        let mut mlp2 = Linear::zeros(bands, bands);
        mlp2.bias.fill(1.0);
        Self {
            bands,
            hidden,
            mlp1: Linear::zeros(bands, bands),
            mlp2,
            conv_a: Conv2d::zeros(bands, hidden, 1),
            conv_b: Conv2d::zeros(hidden, bands, 1),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        vec![
            &mut self.mlp1.weight,
            &mut self.mlp1.bias,
            &mut self.mlp2.weight,
            &mut self.mlp2.bias,
            &mut self.conv_a.weight,
            &mut self.conv_a.bias,
            &mut self.conv_b.weight,
            &mut self.conv_b.bias,
        ]
    }

    pub fn tensor_sizes(&self) -> Vec<usize> {
        vec![
            self.mlp1.weight.len(),
            self.mlp1.bias.len(),
            self.mlp2.weight.len(),
            self.mlp2.bias.len(),
            self.conv_a.weight.len(),
            self.conv_a.bias.len(),
            self.conv_b.weight.len(),
            self.conv_b.bias.len(),
        ]
    }

    pub fn zero_grads(&self) -> AswGrads {
        AswGrads {
            mlp1: self.mlp1.zero_grads(),
            mlp2: self.mlp2.zero_grads(),
            conv_a: self.conv_a.zero_grads(),
            conv_b: self.conv_b.zero_grads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AswGrads {
    pub mlp1: LinearGrads,
    pub mlp2: LinearGrads,
    pub conv_a: ConvGrads,
    pub conv_b: ConvGrads,
}

impl AswGrads {
    pub fn tensors(&self) -> Vec<&[f32]> {
        vec![
            &self.mlp1.weight,
            &self.mlp1.bias,
            &self.mlp2.weight,
            &self.mlp2.bias,
            &self.conv_a.weight,
            &self.conv_a.bias,
            &self.conv_b.weight,
            &self.conv_b.bias,
        ]
    }

    pub fn clear(&mut self) {
        for g in [
            &mut self.mlp1.weight,
            &mut self.mlp1.bias,
            &mut self.mlp2.weight,
            &mut self.mlp2.bias,
            &mut self.conv_a.weight,
            &mut self.conv_a.bias,
            &mut self.conv_b.weight,
            &mut self.conv_b.bias,
        ] {
            g.fill(0.0);
        }
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AswTrace {
    pub h: usize,
    pub w: usize,
    input: Vec<f32>,
    descriptor: Vec<f32>,
    mlp_pre: Vec<f32>,
    weighted: Vec<f32>,
    mix_pre: Vec<f32>,
    pub output: Vec<f32>,
}

/// Per-band spatial mean.
pub fn band_descriptor(cube: &[f32], bands: usize) -> Vec<f32> {
    let n = cube.len() / bands;
    (0..bands).map(|b| (cube[b * n..(b + 1) * n].iter().map(|&v| v as f64).sum::<f64>() / n as f64) as f32).collect()
}

pub fn asw_forward(recon: &[f32], h: usize, w: usize, params: &AswParams) -> Result<Vec<f32>> {
    Ok(asw_forward_traced(recon, h, w, params)?.output)
}

pub fn asw_forward_traced(recon: &[f32], h: usize, w: usize, params: &AswParams) -> Result<AswTrace> {
    let c = params.bands;
    if recon.len() != c * h * w || h * w == 0 {
        return Err(Error::ShapeMismatch(format!(
            "adapter for {c} bands given {} values at {h}x{w}",
            recon.len()
        )));
    }
    let n = h * w;
    let descriptor = band_descriptor(recon, c);
    let mlp_pre = params.mlp1.forward(&descriptor, 1);
    let mut hidden = mlp_pre.clone();
    nn::gelu_inplace(&mut hidden);
    let gains = params.mlp2.forward(&hidden, 1);
    let mut weighted = recon.to_vec();
    for b in 0..c {
        weighted[b * n..(b + 1) * n].iter_mut().for_each(|v| *v *= gains[b]);
    }
    let mix_pre = params.conv_a.forward(&weighted, h, w);
    let mut act = mix_pre.clone();
    nn::gelu_inplace(&mut act);
    let mut output = params.conv_b.forward(&act, h, w);
    for (o, &p) in output.iter_mut().zip(&weighted) {
        *o += p;
    }
    Ok(AswTrace { h, w, input: recon.to_vec(), descriptor, mlp_pre, weighted, mix_pre, output })
}

/// Accumulates parameter gradients for `grad_out = dL/d output`. The input
/// cube is treated as a constant.
pub fn asw_backward(params: &AswParams, trace: &AswTrace, grad_out: &[f32], grads: &mut AswGrads) {
    let (c, h, w) = (params.bands, trace.h, trace.w);
    let n = h * w;
    let mut act = trace.mix_pre.clone();
    nn::gelu_inplace(&mut act);
    let mut g_act = params.conv_b.backward(&act, h, w, grad_out, &mut grads.conv_b, true).unwrap();
    nn::gelu_backward(&trace.mix_pre, &mut g_act);
    let g_weighted_mix = params.conv_a.backward(&trace.weighted, h, w, &g_act, &mut grads.conv_a, true).unwrap();
    let mut g_gains = vec![0f32; c];
    for b in 0..c {
        let r = b * n..(b + 1) * n;
        g_gains[b] = grad_out[r.clone()]
            .iter()
            .zip(&g_weighted_mix[r.clone()])
            .zip(&trace.input[r])
            .map(|((&go, &gm), &x)| (go + gm) as f64 * x as f64)
            .sum::<f64>() as f32;
    }
    let mut hidden = trace.mlp_pre.clone();
    nn::gelu_inplace(&mut hidden);
    let mut g_hidden = params.mlp2.backward(&hidden, 1, &g_gains, &mut grads.mlp2, true).unwrap();
    nn::gelu_backward(&trace.mlp_pre, &mut g_hidden);
    params.mlp1.backward(&trace.descriptor, 1, &g_hidden, &mut grads.mlp1, false);
}
