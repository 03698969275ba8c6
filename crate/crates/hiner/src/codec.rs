//! The wavelength-conditioned representation: a positional encoding of the
//! normalized wavelength, a one-layer encoder producing a small spatial
//! embedding, and a convolutional decoder that upsamples it into one band.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsi_io::WavelengthGrid;
use crate::nn::{self, Conv2d, ConvGrads, Linear, LinearGrads};

/// Frequency positional encoding `(sin(b^k pi l), cos(b^k pi l))`, `k < levels_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosEncodingConfig {
    pub base_b: f64,
    pub levels_l: usize,
}

impl PosEncodingConfig {
    pub fn new(base_b: f64, levels_l: usize) -> Result<Self> {
        if !(base_b > 1.0) || levels_l == 0 {
            return Err(Error::Config(format!(
                "positional encoding needs base > 1 and levels >= 1, got b={base_b}, l={levels_l}"
            )));
        }
        Ok(Self { base_b, levels_l })
    }

    pub fn dim(&self) -> usize {
        2 * self.levels_l
    }
}

impl Default for PosEncodingConfig {
    fn default() -> Self {
        Self { base_b: 1.25, levels_l: 80 }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("wavelength {lambda} is outside (0,1)")))
    }
}

pub fn pos_encode(lambda: f64, cfg: &PosEncodingConfig) -> Result<Vec<f32>> {
    check_lambda(lambda)?;
    let mut out = Vec::with_capacity(cfg.dim());
    let mut freq = 1.0f64;
    for _ in 0..cfg.levels_l {
        let phase = freq * std::f64::consts::PI * lambda;
        out.push(phase.sin() as f32);
        out.push(phase.cos() as f32);
        freq *= cfg.base_b;
    }
    Ok(out)
}

/// What the encoder sees: the Fourier lift of lambda, or lambda itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavelengthInput {
    Fourier(PosEncodingConfig),
    Raw,
}

impl WavelengthInput {
    pub fn dim(&self) -> usize {
        match self {
            WavelengthInput::Fourier(pe) => pe.dim(),
            WavelengthInput::Raw => 1,
        }
    }

    pub fn lift(&self, lambda: f64) -> Result<Vec<f32>> {
        match self {
            WavelengthInput::Fourier(pe) => pos_encode(lambda, pe),
            WavelengthInput::Raw => {
                check_lambda(lambda)?;
                Ok(vec![lambda as f32])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedShape {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl EmbedShape {
    pub fn new(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c }
    }

    pub fn len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Trainable affine layer followed by GELU.
    Learned,
    /// Frozen seeded linear map with no activation; only the decoder learns.
    FixedProjection,
}

/// Maps a wavelength to its spectral embedding. The embedding is laid out
/// channel-major, `c x h x w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthEncoder {
    pub input: WavelengthInput,
    pub kind: EncoderKind,
    pub embed_shape: EmbedShape,
    pub layer: Linear,
}

impl WavelengthEncoder {
    pub fn init(input: WavelengthInput, kind: EncoderKind, embed_shape: EmbedShape, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Linear::init(input.dim(), embed_shape.len(), rng);
        if kind == EncoderKind::FixedProjection {
            layer.bias.fill(0.0);
        }
        Self { input, kind, embed_shape, layer }
    }

    pub fn param_count(&self) -> usize {
        self.layer.param_count()
    }

    fn pre_activation(&self, lambda: f64) -> Result<(Vec<f32>, Vec<f32>)> {
        let lifted = self.input.lift(lambda)?;
        let z = self.layer.forward(&lifted, 1);
        Ok((lifted, z))
    }

    pub fn encode(&self, lambda: f64) -> Result<Vec<f32>> {
        let (_, mut z) = self.pre_activation(lambda)?;
        if self.kind == EncoderKind::Learned {
            nn::gelu_inplace(&mut z);
        }
        Ok(z)
    }
}

/// Decoder architecture: `channel_widths[0]` is the embedding depth, then one
/// width per upsampling block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub embed_shape: EmbedShape,
    pub strides: Vec<usize>,
    pub channel_widths: Vec<usize>,
    pub kernel_size: usize,
    pub target_hw: (usize, usize),
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        let e = self.embed_shape;
        if e.h == 0 || e.w == 0 || e.c == 0 {
            return Err(Error::Config("embedding shape must be positive".into()));
        }
        if self.strides.is_empty() || self.strides.iter().any(|&s| s == 0) {
            return Err(Error::Config("decoder needs at least one positive stride".into()));
        }
        if self.channel_widths.len() != self.strides.len() + 1 {
            return Err(Error::Config(format!(
                "{} strides need {} channel widths, got {}",
                self.strides.len(),
                self.strides.len() + 1,
                self.channel_widths.len()
            )));
        }
        if self.channel_widths[0] != e.c {
            return Err(Error::Config("first channel width must equal the embedding depth".into()));
        }
        if self.channel_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config("kernel size must be odd".into()));
        }
        let (ph, pw) = self.pre_crop_hw();
        let (th, tw) = self.target_hw;
        if th == 0 || tw == 0 || ph < th || pw < tw {
            return Err(Error::Config(format!(
                "decoder output {ph}x{pw} cannot be cropped to {th}x{tw}"
            )));
        }
        Ok(())
    }

    pub fn upsampling(&self) -> usize {
        self.strides.iter().product()
    }

    pub fn pre_crop_hw(&self) -> (usize, usize) {
        let u = self.upsampling();
        (self.embed_shape.h * u, self.embed_shape.w * u)
    }

    /// Parameter count of the blocks and head for these widths.
    pub fn param_count(&self) -> usize {
        let k2 = self.kernel_size * self.kernel_size;
        let blocks: usize = self
            .strides
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let out = self.channel_widths[i + 1] * s * s;
                self.channel_widths[i] * out * k2 + out
            })
            .sum();
        blocks + self.channel_widths.last().copied().unwrap_or(0) + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub config: DecoderConfig,
    pub blocks: Vec<Conv2d>,
    pub head: Conv2d,
}

impl Decoder {
    pub fn init(config: DecoderConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let w = &config.channel_widths;
        let blocks = config
            .strides
            .iter()
            .enumerate()
            .map(|(i, &s)| Conv2d::init(w[i], w[i + 1] * s * s, config.kernel_size, rng))
            .collect();
        let head = Conv2d::init(*w.last().unwrap(), 1, 1, rng);
        Ok(Self { config, blocks, head })
    }

    pub fn zeros(config: DecoderConfig) -> Result<Self> {
        config.validate()?;
        let w = &config.channel_widths;
        let blocks = config
            .strides
            .iter()
            .enumerate()
            .map(|(i, &s)| Conv2d::zeros(w[i], w[i + 1] * s * s, config.kernel_size))
            .collect();
        let head = Conv2d::zeros(*w.last().unwrap(), 1, 1);
        Ok(Self { config, blocks, head })
    }

    pub fn param_count(&self) -> usize {
        self.blocks.iter().map(Conv2d::param_count).sum::<usize>() + self.head.param_count()
    }

    /// Named tensors in serialization order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            let k = b.kernel;
            out.push((format!("decoder.{i}.weight"), vec![b.out_channels, b.in_channels, k, k], &b.weight[..]));
            out.push((format!("decoder.{i}.bias"), vec![b.out_channels], &b.bias[..]));
        }
        out.push(("head.weight".into(), vec![1, self.head.in_channels, 1, 1], &self.head.weight[..]));
        out.push(("head.bias".into(), vec![1], &self.head.bias[..]));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f32>> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.push(&mut b.weight);
            out.push(&mut b.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }

    fn check_embedding(&self, embedding: &[f32]) -> Result<()> {
        if embedding.len() != self.config.embed_shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "embedding has {} entries, decoder expects {:?} = {}",
                embedding.len(),
                self.config.embed_shape,
                self.config.embed_shape.len()
            )));
        }
        Ok(())
    }

    pub fn decode(&self, embedding: &[f32]) -> Result<Vec<f32>> {
        Ok(self.decode_traced(embedding)?.band)
    }

    pub(crate) fn decode_traced(&self, embedding: &[f32]) -> Result<DecoderTrace> {
        self.check_embedding(embedding)?;
        let cfg = &self.config;
        let (mut h, mut w) = (cfg.embed_shape.h, cfg.embed_shape.w);
        let mut x = embedding.to_vec();
        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut shuffled = Vec::with_capacity(self.blocks.len());
        for (conv, &s) in self.blocks.iter().zip(&cfg.strides) {
            let y = conv.forward(&x, h, w);
            let up = nn::pixel_shuffle(&y, conv.out_channels / (s * s), h, w, s);
            block_inputs.push(std::mem::take(&mut x));
            h *= s;
            w *= s;
            x = up.clone();
            nn::gelu_inplace(&mut x);
            shuffled.push(up);
        }
        let full = self.head.forward(&x, h, w);
        let (th, tw) = cfg.target_hw;
        let band = nn::center_crop(&full, 1, h, w, th, tw);
        Ok(DecoderTrace { block_inputs, shuffled, head_input: x, band })
    }

    /// Backpropagates `grad_band` (H x W), accumulating into `grads`, and returns
    /// the gradient with respect to the embedding.
    pub(crate) fn backward(&self, trace: &DecoderTrace, grad_band: &[f32], grads: &mut DecoderGrads) -> Vec<f32> {
        let cfg = &self.config;
        let (ph, pw) = cfg.pre_crop_hw();
        let (th, tw) = cfg.target_hw;
        let g_full = nn::center_uncrop(grad_band, 1, ph, pw, th, tw);
        let mut g = self
            .head
            .backward(&trace.head_input, ph, pw, &g_full, &mut grads.head, true)
            .expect("input grad requested");
        let (mut h, mut w) = (ph, pw);
        for k in (0..self.blocks.len()).rev() {
            let s = cfg.strides[k];
            nn::gelu_backward(&trace.shuffled[k], &mut g);
            h /= s;
            w /= s;
            let conv = &self.blocks[k];
            let g_pre = nn::pixel_unshuffle(&g, conv.out_channels / (s * s), h, w, s);
            g = conv
                .backward(&trace.block_inputs[k], h, w, &g_pre, &mut grads.blocks[k], true)
                .expect("input grad requested");
        }
        g
    }

    pub(crate) fn zero_grads(&self) -> DecoderGrads {
        DecoderGrads {
            blocks: self.blocks.iter().map(Conv2d::zero_grads).collect(),
            head: self.head.zero_grads(),
        }
    }
}

pub(crate) struct DecoderTrace {
    block_inputs: Vec<Vec<f32>>,
    shuffled: Vec<Vec<f32>>,
    head_input: Vec<f32>,
    pub band: Vec<f32>,
}

pub(crate) struct DecoderGrads {
    pub blocks: Vec<ConvGrads>,
    pub head: ConvGrads,
}

impl DecoderGrads {
    pub fn tensors(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        for b in &self.blocks {
            out.push(&b.weight);
            out.push(&b.bias);
        }
        out.push(&self.head.weight);
        out.push(&self.head.bias);
        out
    }

    pub fn clear(&mut self) {
        for b in &mut self.blocks {
            b.weight.fill(0.0);
            b.bias.fill(0.0);
        }
        self.head.weight.fill(0.0);
        self.head.bias.fill(0.0);
    }
}

/// Architecture template from which [`init_model`] sizes channel widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub embed_shape: EmbedShape,
    pub strides: Vec<usize>,
    pub kernel_size: usize,
    pub input: WavelengthInput,
    pub encoder: EncoderKind,
    /// Lower bound on every block width.
    pub width_floor: usize,
}

impl ArchSpec {
    pub fn new(embed_shape: EmbedShape, strides: Vec<usize>) -> Self {
        Self {
            embed_shape,
            strides,
            kernel_size: 3,
            input: WavelengthInput::Fourier(PosEncodingConfig::default()),
            encoder: EncoderKind::Learned,
            width_floor: 8,
        }
    }

    /// `widths[k] = max(floor, round(scale / 2^(k-1)))` for the blocks.
    pub fn widths_for_scale(&self, scale: usize) -> Vec<usize> {
        let mut widths = vec![self.embed_shape.c];
        for k in 0..self.strides.len() {
            let w = (scale as f64 / 2f64.powi(k as i32)).round() as usize;
            widths.push(w.max(self.width_floor).max(1));
        }
        widths
    }

    pub fn decoder_config(&self, widths: Vec<usize>, target_hw: (usize, usize)) -> DecoderConfig {
        DecoderConfig {
            embed_shape: self.embed_shape,
            strides: self.strides.clone(),
            channel_widths: widths,
            kernel_size: self.kernel_size,
            target_hw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HinerModel {
    pub encoder: WavelengthEncoder,
    pub decoder: Decoder,
}

/// Allowed deviation of the sized model from the requested byte budget.
pub const BUDGET_TOLERANCE: f64 = 0.05;

impl HinerModel {
    pub fn new(encoder: WavelengthEncoder, decoder: Decoder) -> Result<Self> {
        if encoder.embed_shape != decoder.config.embed_shape {
            return Err(Error::ShapeMismatch("encoder and decoder disagree on the embedding shape".into()));
        }
        Ok(Self { encoder, decoder })
    }

    /// Builds a model with explicit channel widths.
    pub fn with_widths(
        dims: (usize, usize, usize),
        arch: &ArchSpec,
        widths: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        let config = arch.decoder_config(widths, (dims.0, dims.1));
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = WavelengthEncoder::init(arch.input, arch.encoder, arch.embed_shape, &mut rng);
        let decoder = Decoder::init(config, &mut rng)?;
        Self::new(encoder, decoder)
    }

    pub fn embed_shape(&self) -> EmbedShape {
        self.decoder.config.embed_shape
    }

    pub fn target_hw(&self) -> (usize, usize) {
        self.decoder.config.target_hw
    }

    pub fn encode_wavelength(&self, lambda: f64) -> Result<Vec<f32>> {
        self.encoder.encode(lambda)
    }

    pub fn decode_band(&self, embedding: &[f32]) -> Result<Vec<f32>> {
        self.decoder.decode(embedding)
    }

    pub fn forward(&self, lambda: f64) -> Result<Vec<f32>> {
        self.decoder.decode(&self.encoder.encode(lambda)?)
    }

    /// Embeddings for every wavelength of the grid.
    pub fn embeddings(&self, grid: &WavelengthGrid) -> Result<Embeddings> {
        let shape = self.embed_shape();
        let mut data = Vec::with_capacity(grid.len() * shape.len());
        for &l in grid.lambdas() {
            data.extend(self.encoder.encode(l)?);
        }
        Ok(Embeddings { shape, bands: grid.len(), data })
    }

    /// Forward pass over a whole grid, band-sequential output (unclamped).
    pub fn reconstruct(&self, grid: &WavelengthGrid) -> Result<Vec<f32>> {
        let (h, w) = self.target_hw();
        let mut out = Vec::with_capacity(grid.len() * h * w);
        for &l in grid.lambdas() {
            out.extend(self.forward(l)?);
        }
        Ok(out)
    }
}

/// Chooses channel widths so that the 8-bit decoder plus `C` 8-bit embeddings
/// land within 5% of `target_total_bytes`, then initializes every weight
/// from `seed`.
pub fn init_model(
    dims: (usize, usize, usize),
    arch: &ArchSpec,
    target_total_bytes: usize,
    seed: u64,
) -> Result<HinerModel> {
    let widths = size_widths(dims, arch, target_total_bytes)?;
    HinerModel::with_widths(dims, arch, widths, seed)
}

/// The width search behind [`init_model`].
pub fn size_widths(dims: (usize, usize, usize), arch: &ArchSpec, target_total_bytes: usize) -> Result<Vec<usize>> {
    let (h, w, c) = dims;
    let embed_bytes = c * arch.embed_shape.len();
    let total = |scale: usize| {
        let cfg = arch.decoder_config(arch.widths_for_scale(scale), (h, w));
        cfg.param_count() + embed_bytes
    };
    arch.decoder_config(arch.widths_for_scale(1), (h, w)).validate()?;

    let mut hi = 1usize;
    while total(hi) < target_total_bytes && hi < 1 << 20 {
        hi *= 2;
    }
    let mut lo = 1usize;
    // smallest scale whose size reaches the target
    while lo < hi {
        let mid = (lo + hi) / 2;
        if total(mid) >= target_total_bytes {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let candidates = [lo.saturating_sub(1).max(1), lo];
    let best = candidates
        .iter()
        .copied()
        .min_by_key(|&s| (total(s) as i64 - target_total_bytes as i64).unsigned_abs())
        .unwrap();
    let achieved = total(best);
    let rel = (achieved as f64 - target_total_bytes as f64).abs() / target_total_bytes.max(1) as f64;
    if rel > BUDGET_TOLERANCE {
        return Err(Error::UnreachableBudget { target: target_total_bytes, closest: achieved });
    }
    Ok(arch.widths_for_scale(best))
}

/// Byte count of the decoder (and optionally `bands` embeddings) stored at
/// `bitwidth` bits per value, without container overhead.
pub fn size_bytes(model: &HinerModel, bitwidth: u32, include_embeddings: bool, bands: usize) -> usize {
    let bits = |n: usize| (n * bitwidth as usize).div_ceil(8);
    let mut bytes = bits(model.decoder.param_count());
    if include_embeddings {
        bytes += bits(bands * model.embed_shape().len());
    }
    bytes
}

/// Per-band embeddings, `bands x (c x h x w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub shape: EmbedShape,
    pub bands: usize,
    pub data: Vec<f32>,
}

impl Embeddings {
    pub fn band(&self, i: usize) -> &[f32] {
        let n = self.shape.len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Encoder gradients, present only for the learned encoder.
pub(crate) fn encoder_backward(
    encoder: &WavelengthEncoder,
    lambda: f64,
    grad_embedding: &[f32],
    grads: &mut LinearGrads,
) -> Result<()> {
    if encoder.kind == EncoderKind::FixedProjection {
        return Ok(());
    }
    let (lifted, z) = encoder.pre_activation(lambda)?;
    let mut g = grad_embedding.to_vec();
    nn::gelu_backward(&z, &mut g);
    encoder.layer.backward(&lifted, 1, &g, grads, false);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_arch() -> ArchSpec {
        ArchSpec::new(EmbedShape::new(3, 3, 4), vec![2, 2])
    }

    #[test]
    fn pe_values() {
        let tiny = pos_encode(1e-12, &PosEncodingConfig::new(2.0, 3).unwrap()).unwrap();
        for k in 0..3 {
            assert!(tiny[2 * k].abs() < 1e-9);
            assert!((tiny[2 * k + 1] - 1.0).abs() < 1e-9);
        }
        let half = pos_encode(0.5, &PosEncodingConfig::new(2.0, 2).unwrap()).unwrap();
        let expected = [1.0, 0.0, 0.0, -1.0];
        for (a, b) in half.iter().zip(expected) {
            assert!((a - b).abs() < 1e-7);
        }
        let long = pos_encode(0.3, &PosEncodingConfig::default()).unwrap();
        assert_eq!(long.len(), 160);
        assert!(long.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn pe_domain() {
        let cfg = PosEncodingConfig::default();
        assert!(matches!(pos_encode(0.0, &cfg), Err(Error::Domain(_))));
        assert!(matches!(pos_encode(1.0, &cfg), Err(Error::Domain(_))));
        assert!(PosEncodingConfig::new(1.0, 4).is_err());
    }

    #[test]
    fn zero_encoder_gives_constant_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut enc = WavelengthEncoder::init(
            WavelengthInput::Fourier(PosEncodingConfig::default()),
            EncoderKind::Learned,
            EmbedShape::new(6, 3, 16),
            &mut rng,
        );
        enc.layer.weight.fill(0.0);
        enc.layer.bias.fill(0.0);
        let e = enc.encode(0.37).unwrap();
        assert_eq!(e.len(), 288);
        assert!(e.iter().all(|&v| v == nn::gelu(0.0)));
    }

    #[test]
    fn benchmark_scene_geometries() {
        let ip = DecoderConfig {
            embed_shape: EmbedShape::new(3, 3, 16),
            strides: vec![5, 3, 2, 2],
            channel_widths: vec![16, 8, 8, 8, 8],
            kernel_size: 3,
            target_hw: (145, 145),
        };
        ip.validate().unwrap();
        assert_eq!(ip.pre_crop_hw(), (180, 180));
        let pu = DecoderConfig {
            embed_shape: EmbedShape::new(6, 3, 16),
            strides: vec![5, 4, 3, 2],
            channel_widths: vec![16, 8, 8, 8, 8],
            kernel_size: 3,
            target_hw: (610, 340),
        };
        pu.validate().unwrap();
        assert_eq!(pu.pre_crop_hw(), (720, 360));
    }

    #[test]
    fn decode_shapes_and_zero_decoder() {
        let arch = small_arch();
        let model = HinerModel::with_widths((10, 11, 5), &arch, vec![4, 8, 8], 1).unwrap();
        let band = model.forward(0.4).unwrap();
        assert_eq!(band.len(), 110);
        let zero = Decoder::zeros(model.decoder.config.clone()).unwrap();
        let emb = model.encode_wavelength(0.4).unwrap();
        assert!(zero.decode(&emb).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(model.decode_band(&emb[1..]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn forward_is_deterministic() {
        let model = HinerModel::with_widths((12, 12, 3), &small_arch(), vec![4, 8, 8], 5).unwrap();
        let a = model.forward(0.25).unwrap();
        let b = model.forward(0.25).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let again = HinerModel::with_widths((12, 12, 3), &small_arch(), vec![4, 8, 8], 5).unwrap();
        assert_eq!(again, model);
    }

    #[test]
    fn encoder_is_continuous() {
        let model = HinerModel::with_widths((12, 12, 3), &small_arch(), vec![4, 8, 8], 5).unwrap();
        let a = model.encode_wavelength(0.4).unwrap();
        let b = model.encode_wavelength(0.4 + 1e-6).unwrap();
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max);
        // |d gelu| <= 1.13, |d PE_k / d lambda| <= pi b^k, so Lip <= 1.13 * ||W||_inf * pi * sum b^k
        let w = &model.encoder.layer.weight;
        let n_in = model.encoder.layer.inputs;
        let row_norm = (0..model.encoder.layer.outputs)
            .map(|o| (0..n_in).map(|i| w[o * n_in + i].abs() as f64 * std::f64::consts::PI * 1.25f64.powi((i / 2) as i32)).sum::<f64>())
            .fold(0.0, f64::max);
        assert!((diff as f64) <= 1.13 * row_norm * 1e-6 + 1e-6);
    }

    #[test]
    fn embedding_bytes_for_pavia_shape() {
        let arch = ArchSpec::new(EmbedShape::new(6, 3, 16), vec![5, 4, 3, 2]);
        let model = HinerModel::with_widths((610, 340, 103), &arch, vec![16, 8, 8, 8, 8], 0).unwrap();
        let with = size_bytes(&model, 8, true, 103);
        let without = size_bytes(&model, 8, false, 103);
        assert_eq!(with - without, 29_664);
        assert_eq!(without, model.decoder.param_count());
        assert!(without < with);
    }

    #[test]
    fn size_bytes_arithmetic() {
        let arch = small_arch();
        let model = HinerModel::with_widths((12, 12, 3), &arch, vec![4, 8, 8], 0).unwrap();
        let n = model.decoder.param_count();
        assert_eq!(size_bytes(&model, 8, false, 3), n);
        assert_eq!(size_bytes(&model, 16, false, 3), 2 * n);
        assert_eq!(size_bytes(&model, 32, false, 3), 4 * n);
    }

    #[test]
    fn sizing_hits_budget_and_scales() {
        let arch = ArchSpec::new(EmbedShape::new(6, 3, 16), vec![5, 4, 3, 2]);
        let dims = (610, 340, 103);
        let target = 1 << 19;
        let widths = size_widths(dims, &arch, target).unwrap();
        let cfg = arch.decoder_config(widths, (610, 340));
        let total = cfg.param_count() + 103 * 288;
        assert!(((total as f64) - target as f64).abs() / (target as f64) <= BUDGET_TOLERANCE);
        let embed_mb = (103 * 288) as f64 / (1 << 20) as f64;
        assert!((embed_mb - 0.03).abs() < 0.005);

        let doubled = arch.decoder_config(size_widths(dims, &arch, 2 * target).unwrap(), (610, 340));
        let ratio = doubled.param_count() as f64 / cfg.param_count() as f64;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn unreachable_budget_names_closest() {
        let arch = small_arch();
        match size_widths((12, 12, 3), &arch, 10) {
            Err(Error::UnreachableBudget { target: 10, closest }) => assert!(closest > 10),
            other => panic!("unexpected {other:?}"),
        }
    }
}
