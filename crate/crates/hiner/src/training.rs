//! Fitting a [`HinerModel`] to one cube with the L1 + content-angle objective,
//! and measuring how well it reconstructs.
//!
//! Losses are computed in `f64` per band. L1 is mean-reduced over the band's
//! pixels (the summed form differs by the constant factor `H*W`); the angle
//! term is in degrees and independent of resolution.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{self, EncoderKind, HinerModel, WavelengthEncoder, WavelengthInput};
use crate::error::{Error, Result};
use crate::hsi_io::{shuffle_bands, BandPermutation, HsiCube, WavelengthGrid};
use crate::nn::{Adam, CosineSchedule};

const RAD_TO_DEG: f64 = 180.0 / std::f64::consts::PI;

/// PSNR reported for bands reconstructed without error.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight of the angle term.
    pub gamma: f64,
    /// Cosine similarities are clamped to `[-1 + eps, 1 - eps]` before `acos`.
    pub eps_angle: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { gamma: 0.01, eps_angle: 1e-7 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::Config("gamma must be nonnegative".into()));
        }
        if !(self.eps_angle > 0.0 && self.eps_angle < 1e-3) {
            return Err(Error::Config("eps_angle must lie in (0, 1e-3)".into()));
        }
        Ok(())
    }
}

fn check_shapes(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("band sizes differ: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::ShapeMismatch("empty band".into()));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn l1_loss<T: Copy + Into<f64>>(recon: &[T], target: &[T]) -> Result<f64> {
    check_shapes(recon.len(), target.len())?;
    let sum: f64 = recon.iter().zip(target).map(|(&r, &t)| (r.into() - t.into()).abs()).sum();
    Ok(sum / recon.len() as f64)
}

struct AngleParts {
    dot: f64,
    norm_r: f64,
    norm_t: f64,
    cos: f64,
    clamped: bool,
}

fn angle_parts<T: Copy + Into<f64>>(recon: &[T], target: &[T], eps: f64) -> Result<AngleParts> {
    let (mut dot, mut rr, mut tt) = (0.0f64, 0.0f64, 0.0f64);
    for (&r, &t) in recon.iter().zip(target) {
        let (r, t) = (r.into(), t.into());
        dot += r * t;
        rr += r * r;
        tt += t * t;
    }
    if rr == 0.0 || tt == 0.0 {
        return Err(Error::DegenerateInput("angle is undefined for a zero-norm band".into()));
    }
    let (norm_r, norm_t) = (rr.sqrt(), tt.sqrt());
    let raw = dot / (norm_r * norm_t);
    let cos = raw.clamp(-1.0 + eps, 1.0 - eps);
    Ok(AngleParts { dot, norm_r, norm_t, cos, clamped: cos != raw })
}

/// Angle in degrees between the flattened bands.
pub fn cam_loss<T: Copy + Into<f64>>(recon: &[T], target: &[T], cfg: &LossConfig) -> Result<f64> {
    check_shapes(recon.len(), target.len())?;
    Ok(angle_parts(recon, target, cfg.eps_angle)?.cos.acos() * RAD_TO_DEG)
}

/// `l1 + gamma * cam`.
pub fn hiner_loss<T: Copy + Into<f64>>(recon: &[T], target: &[T], cfg: &LossConfig) -> Result<f64> {
    let l1 = l1_loss(recon, target)?;
    if cfg.gamma == 0.0 {
        return Ok(l1);
    }
    Ok(l1 + cfg.gamma * cam_loss(recon, target, cfg)?)
}

/// Loss value and its gradient with respect to `recon`.
pub fn hiner_loss_grad<T: Copy + Into<f64>>(
    recon: &[T],
    target: &[T],
    cfg: &LossConfig,
) -> Result<(f64, Vec<f64>)> {
    check_shapes(recon.len(), target.len())?;
    let m = recon.len() as f64;
    let mut grad = Vec::with_capacity(recon.len());
    let mut l1 = 0.0;
    for (&r, &t) in recon.iter().zip(target) {
        let d = r.into() - t.into();
        l1 += d.abs();
        grad.push(if d > 0.0 { 1.0 / m } else if d < 0.0 { -1.0 / m } else { 0.0 });
    }
    l1 /= m;
    if cfg.gamma == 0.0 {
        return Ok((l1, grad));
    }
    let p = angle_parts(recon, target, cfg.eps_angle)?;
    let angle = p.cos.acos() * RAD_TO_DEG;
    if !p.clamped {
        // d angle / d cos = -(180/pi) / sqrt(1 - cos^2)
        let d_angle = -RAD_TO_DEG / (1.0 - p.cos * p.cos).sqrt();
        let scale = cfg.gamma * d_angle;
        let inv = 1.0 / (p.norm_r * p.norm_t);
        let radial = p.dot / (p.norm_r.powi(3) * p.norm_t);
        for (g, (&r, &t)) in grad.iter_mut().zip(recon.iter().zip(target)) {
            *g += scale * (t.into() * inv - r.into() * radial);
        }
    }
    Ok((l1 + cfg.gamma * angle, grad))
}

/// Peak signal-to-noise ratio per band, peak = the original band's maximum.
/// Returns the mean over bands and the per-band values.
pub fn evaluate_psnr(recon: &[f32], cube: &HsiCube) -> Result<(f64, Vec<f64>)> {
    if recon.len() != cube.data().len() {
        return Err(Error::ShapeMismatch(format!(
            "reconstruction has {} values, cube has {}",
            recon.len(),
            cube.data().len()
        )));
    }
    let m = cube.pixels();
    let per_band: Vec<f64> = (0..cube.bands())
        .map(|b| {
            let orig = cube.band(b);
            let rec = &recon[b * m..(b + 1) * m];
            let mse = orig.iter().zip(rec).map(|(&o, &r)| (o as f64 - r as f64).powi(2)).sum::<f64>() / m as f64;
            band_psnr(cube.band_max()[b] as f64, mse)
        })
        .collect();
    let mean = per_band.iter().sum::<f64>() / per_band.len() as f64;
    Ok((mean, per_band))
}

pub fn band_psnr(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    Default,
    /// Bands are permuted once, breaking the wavelength-to-band ordering.
    BandShuffle,
    /// A frozen projection of the positional encoding replaces the learned encoder.
    NoEncoder,
    /// The angle term is dropped (`gamma = 0`).
    L1Only,
    /// The encoder sees lambda directly instead of its positional encoding.
    RawWavelength,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Default,
        Ablation::BandShuffle,
        Ablation::NoEncoder,
        Ablation::L1Only,
        Ablation::RawWavelength,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Ablation::Default => "default",
            Ablation::BandShuffle => "band_shuffle",
            Ablation::NoEncoder => "no_encoder",
            Ablation::L1Only => "l1_only",
            Ablation::RawWavelength => "raw_wavelength",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr_init: f64,
    pub batch_bands: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, lr_init: 1e-3, batch_bands: 1, seed: 0, ablation: Ablation::Default }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean PSNR of the reconstructions seen during each epoch's steps.
    pub epoch_psnr: Vec<f64>,
    pub epoch_loss: Vec<f64>,
    pub epoch_lr: Vec<f64>,
    /// Loss of every optimization step, in order.
    pub step_loss: Vec<f64>,
    /// Per-band PSNR of the final model against the training target.
    pub final_band_psnr: Vec<f64>,
    pub final_mean_psnr: f64,
    pub wall_time_secs: f64,
    /// Band permutation applied by the shuffle ablation.
    pub permutation: Option<BandPermutation>,
}

impl TrainReport {
    /// CSV with columns `epoch,loss,mean_psnr,lr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,mean_psnr,lr")?;
        for e in 0..self.epoch_loss.len() {
            writeln!(out, "{},{},{},{}", e + 1, self.epoch_loss[e], self.epoch_psnr[e], self.epoch_lr[e])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

/// Rewires a model for the encoder-related ablations.
pub fn apply_encoder_ablation(model: &HinerModel, ablation: Ablation, seed: u64) -> HinerModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e4c0);
    let enc = &model.encoder;
    let replace = |input: WavelengthInput, kind: EncoderKind, rng: &mut ChaCha8Rng| {
        WavelengthEncoder::init(input, kind, enc.embed_shape, rng)
    };
    let encoder = match ablation {
        Ablation::NoEncoder if enc.kind != EncoderKind::FixedProjection => {
            replace(enc.input, EncoderKind::FixedProjection, &mut rng)
        }
        Ablation::RawWavelength if enc.input != WavelengthInput::Raw => {
            replace(WavelengthInput::Raw, enc.kind, &mut rng)
        }
        _ => enc.clone(),
    };
    HinerModel { encoder, decoder: model.decoder.clone() }
}

/// Optimizes `model` against `cube`, one band per step, bands visited in a
/// fresh seeded order each epoch, learning rate on a cosine decay.
pub fn train_hiner(
    cube: &HsiCube,
    grid: &WavelengthGrid,
    model: HinerModel,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
) -> Result<(HinerModel, TrainReport)> {
    loss_cfg.validate()?;
    if train_cfg.epochs == 0 || !(train_cfg.lr_init > 0.0) {
        return Err(Error::Config("epochs and lr_init must be positive".into()));
    }
    if train_cfg.batch_bands != 1 {
        return Err(Error::Config("only one band per step is supported".into()));
    }
    if grid.len() != cube.bands() {
        return Err(Error::ShapeMismatch(format!("grid has {} wavelengths, cube {} bands", grid.len(), cube.bands())));
    }
    if model.target_hw() != (cube.height(), cube.width()) {
        return Err(Error::ShapeMismatch(format!(
            "model decodes {:?} but cube is {}x{}",
            model.target_hw(),
            cube.height(),
            cube.width()
        )));
    }

    let started = Instant::now();
    let mut loss_cfg = *loss_cfg;
    if train_cfg.ablation == Ablation::L1Only {
        loss_cfg.gamma = 0.0;
    }
    let l1_cfg = LossConfig { gamma: 0.0, ..loss_cfg };
    let (target, permutation) = match train_cfg.ablation {
        Ablation::BandShuffle => {
            let (c, p) = shuffle_bands(cube, grid, train_cfg.seed)?;
            (c, Some(p))
        }
        _ => (cube.clone(), None),
    };
    let mut model = apply_encoder_ablation(&model, train_cfg.ablation, train_cfg.seed);
    let learn_encoder = model.encoder.kind == EncoderKind::Learned;

    let mut dec_grads = model.decoder.zero_grads();
    let mut enc_grads = model.encoder.layer.zero_grads();
    let mut shapes: Vec<usize> = Vec::new();
    if learn_encoder {
        shapes.push(model.encoder.layer.weight.len());
        shapes.push(model.encoder.layer.bias.len());
    }
    shapes.extend(model.decoder.tensors().iter().map(|t| t.2.len()));
    let mut adam = Adam::new(&shapes, 0.0);

    let bands = cube.bands();
    let schedule = CosineSchedule { lr_init: train_cfg.lr_init, total_steps: train_cfg.epochs * bands };
    let mut order_rng = ChaCha8Rng::seed_from_u64(train_cfg.seed.wrapping_add(0x0bd3_7a11));
    let mut order: Vec<usize> = (0..bands).collect();

    let m = cube.pixels();
    let mut report = TrainReport {
        epoch_psnr: Vec::with_capacity(train_cfg.epochs),
        epoch_loss: Vec::with_capacity(train_cfg.epochs),
        epoch_lr: Vec::with_capacity(train_cfg.epochs),
        step_loss: Vec::with_capacity(train_cfg.epochs * bands),
        final_band_psnr: Vec::new(),
        final_mean_psnr: 0.0,
        wall_time_secs: 0.0,
        permutation,
    };
    let mut step = 0usize;
    let mut last_good = model.clone();
    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut psnr_sum = 0.0;
        report.epoch_lr.push(schedule.lr(step));
        for &b in &order {
            let lambda = grid.lambdas()[b];
            let lr = schedule.lr(step);
            let embedding = model.encoder.encode(lambda)?;
            let trace = model.decoder.decode_traced(&embedding)?;
            let tgt = target.band(b);
            let (loss, grad) = match hiner_loss_grad(&trace.band, tgt, &loss_cfg) {
                // an all-zero band has no spectral angle
                Err(Error::DegenerateInput(_)) => hiner_loss_grad(&trace.band, tgt, &l1_cfg)?,
                r => r?,
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch: epoch + 1, step, last_good: Some(Box::new(last_good)) });
            }
            let mse = trace.band.iter().zip(tgt).map(|(&r, &t)| (r as f64 - t as f64).powi(2)).sum::<f64>() / m as f64;
            psnr_sum += band_psnr(target.band_max()[b] as f64, mse);
            loss_sum += loss;
            report.step_loss.push(loss);

            let grad: Vec<f32> = grad.iter().map(|&g| g as f32).collect();
            dec_grads.clear();
            let g_emb = model.decoder.backward(&trace, &grad, &mut dec_grads);
            let mut params: Vec<&mut [f32]> = Vec::with_capacity(shapes.len());
            let mut grads: Vec<&[f32]> = Vec::with_capacity(shapes.len());
            if learn_encoder {
                enc_grads.weight.fill(0.0);
                enc_grads.bias.fill(0.0);
                codec::encoder_backward(&model.encoder, lambda, &g_emb, &mut enc_grads)?;
                params.push(&mut model.encoder.layer.weight);
                params.push(&mut model.encoder.layer.bias);
                grads.push(&enc_grads.weight);
                grads.push(&enc_grads.bias);
            }
            params.extend(model.decoder.tensors_mut().into_iter().map(|t| t.as_mut_slice()));
            grads.extend(dec_grads.tensors());
            adam.step(params, grads, lr as f32);
            step += 1;
        }
        report.epoch_loss.push(loss_sum / bands as f64);
        report.epoch_psnr.push(psnr_sum / bands as f64);
        last_good = model.clone();
    }

    let recon = model.reconstruct(grid)?;
    let (mean, per_band) = evaluate_psnr(&recon, &target)?;
    report.final_mean_psnr = mean;
    report.final_band_psnr = per_band;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((model, report))
}

/// A trained model measured as delivered: reconstructions clamped to `[0, 1]`,
/// both straight from the float model and after quantizing and entropy coding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub variant: String,
    /// Rate from the entropy-coded embedding and decoder payload.
    pub bpppb: f64,
    /// Rate from the whole file, headers and code tables included.
    pub file_bpppb: f64,
    pub psnr_float: f64,
    pub psnr_quantized: f64,
    pub psnr_quantized_per_band: Vec<f64>,
    pub report: TrainReport,
}

/// Trains, quantizes at `bitwidth` and evaluates. Returns the float model and
/// the serialized stream alongside the measurements.
pub fn fit_and_measure(
    cube: &HsiCube,
    grid: &WavelengthGrid,
    model: HinerModel,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    bitwidth: u8,
    include_encoder: bool,
) -> Result<(HinerModel, FitOutcome, Vec<u8>)> {
    crate::bitstream::check_bitwidth(bitwidth)?;
    let (model, report) = train_hiner(cube, grid, model, loss_cfg, train_cfg)?;
    let target = match &report.permutation {
        Some(p) => p.apply(cube)?,
        None => cube.clone(),
    };
    let clamp = |mut v: Vec<f32>| {
        v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        v
    };
    let (psnr_float, _) = evaluate_psnr(&clamp(model.reconstruct(grid)?), &target)?;
    let stream = crate::bitstream::HinerBitstream::from_model(&model, grid, bitwidth, include_encoder)?;
    let (bytes, sizes) = stream.encode()?;
    let (psnr_quantized, per_band) = evaluate_psnr(&clamp(stream.decode_bands()?), &target)?;
    let dims = cube.dims();
    let outcome = FitOutcome {
        variant: train_cfg.ablation.name().into(),
        bpppb: crate::bitstream::bpppb(sizes.rate_payload, dims),
        file_bpppb: crate::bitstream::bpppb(bytes.len(), dims),
        psnr_float,
        psnr_quantized,
        psnr_quantized_per_band: per_band,
        report,
    };
    Ok((model, outcome, bytes))
}
