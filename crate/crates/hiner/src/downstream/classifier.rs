//! A small reference pixel classifier over spectral tokens.
//!
//! Token `i` of a pixel holds the `k x k` spatial patch of bands `i-1, i, i+1`
//! (zeros past either end of the spectrum). Tokens share a linear embedding,
//! get a learned per-token offset, and pass through mixer layers that
//! alternate mixing across tokens and across features, each with a residual.
//! The head reads the token mean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, fan_in_uniform, Linear, LinearGrads};

/// Bands per spectral token.
pub const GROUP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerConfig {
    pub patch_size: usize,
    pub dim: usize,
    pub token_hidden: usize,
    pub channel_hidden: usize,
    pub layers: usize,
}

impl Default for MixerConfig {
    fn default() -> Self {
        Self { patch_size: 7, dim: 16, token_hidden: 16, channel_hidden: 32, layers: 2 }
    }
}

impl MixerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size % 2 == 0 || self.patch_size == 0 {
            return Err(Error::Config(format!("patch size {} must be odd", self.patch_size)));
        }
        if self.dim == 0 || self.token_hidden == 0 || self.channel_hidden == 0 {
            return Err(Error::Config("classifier widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MixerLayer {
    token1: Linear,
    token2: Linear,
    channel1: Linear,
    channel2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMixer {
    pub config: MixerConfig,
    pub bands: usize,
    pub classes: usize,
    embed: Linear,
    /// `bands x dim`
    position: Vec<f32>,
    layers: Vec<MixerLayer>,
    head: Linear,
}

/// Mirror (reflect without repeating the edge) index into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut i = i.rem_euclid(period);
    if i >= n as isize {
        i = period - i;
    }
    i as usize
}

/// Gathers the `k x k` patch around `(row, col)` for every band,
/// `bands x k x k`, with mirrored borders.
pub fn extract_patch(cube: &[f32], bands: usize, h: usize, w: usize, row: usize, col: usize, k: usize) -> Vec<f32> {
    let r = (k / 2) as isize;
    let mut out = Vec::with_capacity(bands * k * k);
    for b in 0..bands {
        let band = &cube[b * h * w..(b + 1) * h * w];
        for dy in -r..=r {
            let y = reflect(row as isize + dy, h);
            for dx in -r..=r {
                out.push(band[y * w + reflect(col as isize + dx, w)]);
            }
        }
    }
    out
}

/// Adds a patch gradient back onto the cube gradient, undoing the mirroring.
pub fn scatter_patch(grad_cube: &mut [f32], grad_patch: &[f32], bands: usize, h: usize, w: usize, row: usize, col: usize, k: usize) {
    let r = (k / 2) as isize;
    let mut i = 0;
    for b in 0..bands {
        for dy in -r..=r {
            let y = reflect(row as isize + dy, h);
            for dx in -r..=r {
                grad_cube[b * h * w + y * w + reflect(col as isize + dx, w)] += grad_patch[i];
                i += 1;
            }
        }
    }
}

fn tokens_from_patch(patch: &[f32], bands: usize, kk: usize) -> Vec<f32> {
    let f = GROUP * kk;
    let mut t = vec![0f32; bands * f];
    for i in 0..bands {
        for g in 0..GROUP {
            let b = i as isize + g as isize - 1;
            if b >= 0 && (b as usize) < bands {
                let b = b as usize;
                t[i * f + g * kk..i * f + (g + 1) * kk].copy_from_slice(&patch[b * kk..(b + 1) * kk]);
            }
        }
    }
    t
}

fn tokens_backward(grad_tokens: &[f32], bands: usize, kk: usize) -> Vec<f32> {
    let f = GROUP * kk;
    let mut g = vec![0f32; bands * kk];
    for i in 0..bands {
        for j in 0..GROUP {
            let b = i as isize + j as isize - 1;
            if b >= 0 && (b as usize) < bands {
                let b = b as usize;
                for (dst, &src) in g[b * kk..(b + 1) * kk].iter_mut().zip(&grad_tokens[i * f + j * kk..i * f + (j + 1) * kk]) {
                    *dst += src;
                }
            }
        }
    }
    g
}

fn transpose(x: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut t = vec![0f32; x.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = x[r * cols + c];
        }
    }
    t
}

struct LayerTrace {
    x_in: Vec<f32>,
    token_pre: Vec<f32>,
    x_mid: Vec<f32>,
    channel_pre: Vec<f32>,
}

struct Trace {
    tokens: Vec<f32>,
    layers: Vec<LayerTrace>,
    pooled: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixerGrads {
    embed: LinearGrads,
    position: Vec<f32>,
    layers: Vec<[LinearGrads; 4]>,
    head: LinearGrads,
}

impl MixerGrads {
    pub fn tensors(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = vec![&self.embed.weight, &self.embed.bias, &self.position];
        for l in &self.layers {
            for g in l {
                out.push(&g.weight);
                out.push(&g.bias);
            }
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    pub fn clear(&mut self) {
        let mut all: Vec<&mut Vec<f32>> = vec![&mut self.embed.weight, &mut self.embed.bias, &mut self.position];
        for l in &mut self.layers {
            for g in l.iter_mut() {
                all.push(&mut g.weight);
                all.push(&mut g.bias);
            }
        }
        all.push(&mut self.head.weight);
        all.push(&mut self.head.bias);
        all.into_iter().for_each(|t| t.fill(0.0));
    }
}

impl SpectralMixer {
    pub fn init(bands: usize, classes: usize, config: MixerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if bands == 0 || classes < 2 {
            return Err(Error::Config("classifier needs bands and at least two classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = GROUP * config.patch_size * config.patch_size;
        let embed = Linear::init(f, config.dim, &mut rng);
        let position = fan_in_uniform(&mut rng, bands * config.dim, config.dim);
        let layers = (0..config.layers)
            .map(|_| MixerLayer {
                token1: Linear::init(bands, config.token_hidden, &mut rng),
                token2: Linear::init(config.token_hidden, bands, &mut rng),
                channel1: Linear::init(config.dim, config.channel_hidden, &mut rng),
                channel2: Linear::init(config.channel_hidden, config.dim, &mut rng),
            })
            .collect();
        let head = Linear::init(config.dim, classes, &mut rng);
        Ok(Self { config, bands, classes, embed, position, layers, head })
    }

    pub fn patch_len(&self) -> usize {
        self.bands * self.config.patch_size * self.config.patch_size
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = vec![&mut self.embed.weight, &mut self.embed.bias, &mut self.position];
        for l in &mut self.layers {
            for lin in [&mut l.token1, &mut l.token2, &mut l.channel1, &mut l.channel2] {
                out.push(&mut lin.weight);
                out.push(&mut lin.bias);
            }
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    pub fn tensor_sizes(&mut self) -> Vec<usize> {
        self.tensors_mut().iter().map(|t| t.len()).collect()
    }

    pub fn zero_grads(&self) -> MixerGrads {
        MixerGrads {
            embed: self.embed.zero_grads(),
            position: vec![0.0; self.position.len()],
            layers: self
                .layers
                .iter()
                .map(|l| [l.token1.zero_grads(), l.token2.zero_grads(), l.channel1.zero_grads(), l.channel2.zero_grads()])
                .collect(),
            head: self.head.zero_grads(),
        }
    }

    fn check_patch(&self, patch: &[f32]) -> Result<()> {
        if patch.len() != self.patch_len() {
            return Err(Error::ShapeMismatch(format!("patch has {} values, classifier expects {}", patch.len(), self.patch_len())));
        }
        Ok(())
    }

    fn forward_traced(&self, patch: &[f32]) -> (Vec<f32>, Trace) {
        let (c, d) = (self.bands, self.config.dim);
        let kk = self.config.patch_size * self.config.patch_size;
        let tokens = tokens_from_patch(patch, c, kk);
        let mut x = self.embed.forward(&tokens, c);
        for (v, &p) in x.iter_mut().zip(&self.position) {
            *v += p;
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let x_in = x.clone();
            let token_pre = l.token1.forward(&transpose(&x, c, d), d);
            let mut act = token_pre.clone();
            nn::gelu_inplace(&mut act);
            let mixed = transpose(&l.token2.forward(&act, d), d, c);
            for (v, m) in x.iter_mut().zip(&mixed) {
                *v += m;
            }
            let x_mid = x.clone();
            let channel_pre = l.channel1.forward(&x, c);
            let mut act = channel_pre.clone();
            nn::gelu_inplace(&mut act);
            let y = l.channel2.forward(&act, c);
            for (v, m) in x.iter_mut().zip(&y) {
                *v += m;
            }
            layers.push(LayerTrace { x_in, token_pre, x_mid, channel_pre });
        }
        let mut pooled = vec![0f32; d];
        for t in 0..c {
            for j in 0..d {
                pooled[j] += x[t * d + j];
            }
        }
        pooled.iter_mut().for_each(|v| *v /= c as f32);
        let logits = self.head.forward(&pooled, 1);
        (logits, Trace { tokens, layers, pooled })
    }

    pub fn logits(&self, patch: &[f32]) -> Result<Vec<f32>> {
        self.check_patch(patch)?;
        Ok(self.forward_traced(patch).0)
    }

    /// 0-based arg-max class.
    pub fn predict(&self, patch: &[f32]) -> Result<usize> {
        let logits = self.logits(patch)?;
        Ok(argmax(&logits))
    }

    /// Softmax cross-entropy against a 0-based class; accumulates parameter
    /// gradients scaled by `weight` and returns the loss and, on request, the
    /// gradient with respect to the patch.
    pub fn cross_entropy_backward(
        &self,
        patch: &[f32],
        class: usize,
        weight: f32,
        grads: &mut MixerGrads,
        want_patch_grad: bool,
    ) -> Result<(f64, Option<Vec<f32>>)> {
        self.check_patch(patch)?;
        if class >= self.classes {
            return Err(Error::InvalidInput(format!("class {class} outside {} classes", self.classes)));
        }
        let (c, d) = (self.bands, self.config.dim);
        let kk = self.config.patch_size * self.config.patch_size;
        let (logits, trace) = self.forward_traced(patch);
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let z: f64 = logits.iter().map(|&l| (l as f64 - max).exp()).sum();
        let loss = max + z.ln() - logits[class] as f64;
        let mut g_logits: Vec<f32> = logits.iter().map(|&l| (((l as f64 - max).exp() / z) as f32) * weight).collect();
        g_logits[class] -= weight;

        let g_pooled = self.head.backward(&trace.pooled, 1, &g_logits, &mut grads.head, true).unwrap();
        let mut gx = vec![0f32; c * d];
        for t in 0..c {
            for j in 0..d {
                gx[t * d + j] = g_pooled[j] / c as f32;
            }
        }
        for ((layer, lt), lg) in self.layers.iter().zip(&trace.layers).zip(&mut grads.layers).rev() {
            let [g_t1, g_t2, g_c1, g_c2] = lg;
            let mut act = lt.channel_pre.clone();
            nn::gelu_inplace(&mut act);
            let mut g_act = layer.channel2.backward(&act, c, &gx, g_c2, true).unwrap();
            nn::gelu_backward(&lt.channel_pre, &mut g_act);
            let g_mid = layer.channel1.backward(&lt.x_mid, c, &g_act, g_c1, true).unwrap();
            for (g, m) in gx.iter_mut().zip(&g_mid) {
                *g += m;
            }
            let g_mixed_t = transpose(&gx, c, d);
            let mut act = lt.token_pre.clone();
            nn::gelu_inplace(&mut act);
            let mut g_act = layer.token2.backward(&act, d, &g_mixed_t, g_t2, true).unwrap();
            nn::gelu_backward(&lt.token_pre, &mut g_act);
            let g_in_t = layer.token1.backward(&transpose(&lt.x_in, c, d), d, &g_act, g_t1, true).unwrap();
            for (g, m) in gx.iter_mut().zip(&transpose(&g_in_t, d, c)) {
                *g += m;
            }
        }
        for (gp, &g) in grads.position.iter_mut().zip(&gx) {
            *gp += g;
        }
        let g_tokens = self.embed.backward(&trace.tokens, c, &gx, &mut grads.embed, want_patch_grad);
        Ok((loss, g_tokens.map(|g| tokens_backward(&g, c, kk))))
    }
}

pub fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
