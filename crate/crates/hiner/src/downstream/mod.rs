//! Pixel classification on decoded cubes.
//!
//! The classifier never sees ground truth spectra. It reads either a raw cube
//! or the reconstruction `Î` stored in a bitstream, optionally through the
//! [`asw`] adapter `I_c = ASW(Î)`. Training minimizes
//!
//! ```text
//! CE(train pixels of I_c) + beta * sum over bands of hiner_loss(I_c, Î)
//! ```
//!
//! and, with [`isi`] enabled, redraws `Î` at jittered wavelengths every epoch.

pub mod asw;
pub mod classifier;
pub mod isi;
pub mod metrics;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitstream::HinerBitstream;
use crate::codec::HinerModel;
use crate::error::{Error, Result};
use crate::hsi_io::{wavelength_grid, HsiCube, LabelMap, WavelengthGrid};
use crate::nn::{Adam, CosineSchedule};
use crate::training::{hiner_loss_grad, LossConfig};

pub use asw::{asw_backward, asw_forward, asw_forward_traced, AswParams};
pub use classifier::{extract_patch, MixerConfig, SpectralMixer};
pub use isi::{isi_grid, isi_sample, IsiConfig};
pub use metrics::{evaluate_classification, ClassificationMetrics, ConfusionMatrix};

const ISI_SEED_SALT: u64 = 0x1515_0000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierTrainConfig {
    /// Weight of the reconstruction term.
    pub beta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_size: usize,
    /// Token feature width of the reference classifier.
    pub dim: usize,
    pub seed: u64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        Self { beta: 2.5, lr: 5e-4, weight_decay: 5e-3, epochs: 100, batch_size: 16, patch_size: 7, dim: 16, seed: 0 }
    }
}

impl ClassifierTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta {} must be finite and nonnegative", self.beta)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight_decay {} must be nonnegative", self.weight_decay)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        self.mixer().validate()
    }

    pub fn mixer(&self) -> MixerConfig {
        MixerConfig {
            patch_size: self.patch_size,
            dim: self.dim,
            token_hidden: self.dim,
            channel_hidden: 2 * self.dim,
            layers: 2,
        }
    }
}

/// Where the classifier's input comes from.
#[derive(Debug, Clone, Copy)]
pub enum ClassifierSource<'a> {
    Raw(&'a HsiCube),
    Compressed(&'a HinerBitstream),
}

struct Prepared {
    dims: (usize, usize, usize),
    /// The cube the classifier is evaluated on, clamped to [0, 1].
    plain: Vec<f32>,
    model: Option<HinerModel>,
    grid: WavelengthGrid,
}

fn clamp01(mut v: Vec<f32>) -> Vec<f32> {
    v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    v
}

fn prepare(source: ClassifierSource<'_>) -> Result<Prepared> {
    match source {
        ClassifierSource::Raw(cube) => Ok(Prepared {
            dims: cube.dims(),
            plain: cube.data().to_vec(),
            model: None,
            grid: wavelength_grid(cube.bands())?,
        }),
        ClassifierSource::Compressed(stream) => {
            let dims = stream.header.dims();
            Ok(Prepared {
                dims,
                plain: clamp01(stream.decode_bands()?),
                model: stream.model()?,
                grid: wavelength_grid(dims.2)?,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierVariant {
    /// Classifier directly on the decoded cube.
    Plain,
    Asw,
    AswIsi,
}

impl ClassifierVariant {
    pub const ALL: [ClassifierVariant; 3] = [ClassifierVariant::Plain, ClassifierVariant::Asw, ClassifierVariant::AswIsi];

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierVariant::Plain => "plain",
            ClassifierVariant::Asw => "asw",
            ClassifierVariant::AswIsi => "asw_isi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub epoch_loss: Vec<f64>,
    pub epoch_ce: Vec<f64>,
    /// Band-summed reconstruction term, before the `beta` weight.
    pub epoch_recon: Vec<f64>,
    pub wall_time_secs: f64,
}

/// Jointly fits the classifier and, when `asw` is given, the adapter.
pub fn train_classifier(
    source: ClassifierSource<'_>,
    labels: &LabelMap,
    asw: Option<AswParams>,
    isi: &IsiConfig,
    cfg: &ClassifierTrainConfig,
) -> Result<(SpectralMixer, Option<AswParams>, ClassifierReport)> {
    cfg.validate()?;
    isi.validate()?;
    let prepared = prepare(source)?;
    let (h, w, c) = prepared.dims;
    if labels.height() != h || labels.width() != w {
        return Err(Error::DimensionMismatch(format!(
            "labels are {}x{}, cube is {h}x{w}",
            labels.height(),
            labels.width()
        )));
    }
    if let Some(a) = &asw {
        if a.bands != c {
            return Err(Error::DimensionMismatch(format!("adapter has {} bands, cube has {c}", a.bands)));
        }
    }
    if isi.is_active() && prepared.model.is_none() {
        return Err(Error::Config("spectral interpolation needs the encoder side channel in the bitstream".into()));
    }
    let train = labels.train_indices();
    if train.is_empty() {
        return Err(Error::InvalidInput("train mask is empty".into()));
    }

    let start = Instant::now();
    let mut mixer = SpectralMixer::init(c, labels.class_count(), cfg.mixer(), cfg.seed)?;
    let mut mixer_grads = mixer.zero_grads();
    let mut mixer_opt = Adam::new(&mixer.tensor_sizes(), cfg.weight_decay as f32);
    let mut asw = asw;
    let mut asw_grads = asw.as_ref().map(|a| a.zero_grads());
    let mut asw_opt = asw.as_ref().map(|a| Adam::new(&a.tensor_sizes(), cfg.weight_decay as f32));

    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let schedule = CosineSchedule { lr_init: cfg.lr, total_steps: cfg.epochs * steps_per_epoch };
    let loss_cfg = LossConfig::default();
    let l1_cfg = LossConfig { gamma: 0.0, ..loss_cfg };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = train.clone();
    let n = h * w;
    let k = cfg.patch_size;
    let mut report = ClassifierReport { epoch_loss: vec![], epoch_ce: vec![], epoch_recon: vec![], wall_time_secs: 0.0 };
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        let decoded = match &prepared.model {
            Some(model) if isi.is_active() => {
                let seed = cfg.seed.wrapping_add(ISI_SEED_SALT).wrapping_add(epoch as u64);
                clamp01(isi_sample(model, &prepared.grid, isi, seed)?)
            }
            _ => prepared.plain.clone(),
        };
        order.shuffle(&mut rng);
        let (mut ce_sum, mut recon_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            mixer_grads.clear();
            let trace = match &asw {
                Some(a) => Some(asw_forward_traced(&decoded, h, w, a)?),
                None => None,
            };
            let input = trace.as_ref().map_or(&decoded, |t| &t.output);
            let mut grad_cube = trace.as_ref().map(|_| vec![0f32; c * n]);
            let weight = 1.0 / batch.len() as f32;
            for &p in batch {
                let (row, col) = (p / w, p % w);
                let patch = extract_patch(input, c, h, w, row, col, k);
                let class = labels.labels()[p] as usize - 1;
                let (loss, g_patch) =
                    mixer.cross_entropy_backward(&patch, class, weight, &mut mixer_grads, grad_cube.is_some())?;
                ce_sum += loss;
                if let (Some(g), Some(gp)) = (grad_cube.as_mut(), g_patch) {
                    classifier::scatter_patch(g, &gp, c, h, w, row, col, k);
                }
            }
            if let (Some(a), Some(trace), Some(g_cube)) = (asw.as_mut(), trace.as_ref(), grad_cube.as_mut()) {
                for b in 0..c {
                    let r = b * n..(b + 1) * n;
                    let (out_b, dec_b) = (&trace.output[r.clone()], &decoded[r.clone()]);
                    let (l, g) = match hiner_loss_grad(out_b, dec_b, &loss_cfg) {
                        // a band clamped to all zeros has no spectral angle
                        Err(Error::DegenerateInput(_)) => hiner_loss_grad(out_b, dec_b, &l1_cfg)?,
                        r => r?,
                    };
                    recon_sum += l * batch.len() as f64;
                    if cfg.beta > 0.0 {
                        for (dst, gv) in g_cube[r].iter_mut().zip(g) {
                            *dst += (cfg.beta * gv) as f32;
                        }
                    }
                }
                let grads = asw_grads.as_mut().unwrap();
                grads.clear();
                asw_backward(a, trace, g_cube, grads);
                let lr = schedule.lr(step) as f32;
                asw_opt.as_mut().unwrap().step(a.tensors_mut(), grads.tensors(), lr);
            }
            let lr = schedule.lr(step) as f32;
            mixer_opt.step(mixer.tensors_mut(), mixer_grads.tensors(), lr);
            step += 1;
        }
        let ce = ce_sum / train.len() as f64;
        let recon = recon_sum / train.len() as f64;
        if !ce.is_finite() || !recon.is_finite() {
            return Err(Error::Divergence { epoch, step, last_good: None });
        }
        report.epoch_ce.push(ce);
        report.epoch_recon.push(recon);
        report.epoch_loss.push(ce + cfg.beta * recon);
    }
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((mixer, asw, report))
}

/// 1-based class ids for every pixel of `cube` (band-sequential, `h x w`).
pub fn predict_cube(mixer: &SpectralMixer, cube: &[f32], h: usize, w: usize) -> Result<Vec<u16>> {
    let c = mixer.bands;
    if cube.len() != c * h * w {
        return Err(Error::ShapeMismatch(format!("{} values for {c} bands at {h}x{w}", cube.len())));
    }
    (0..h * w)
        .map(|p| {
            let patch = extract_patch(cube, c, h, w, p / w, p % w, mixer.config.patch_size);
            Ok(mixer.predict(&patch)? as u16 + 1)
        })
        .collect()
}

/// Test-split metrics of a trained classifier, read through the adapter when
/// one is given.
pub fn evaluate_classifier(
    source: ClassifierSource<'_>,
    labels: &LabelMap,
    mixer: &SpectralMixer,
    asw: Option<&AswParams>,
) -> Result<ClassificationMetrics> {
    let prepared = prepare(source)?;
    let (h, w, _) = prepared.dims;
    let input = match asw {
        Some(a) => asw_forward(&prepared.plain, h, w, a)?,
        None => prepared.plain,
    };
    evaluate_classification(&predict_cube(mixer, &input, h, w)?, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub variant: ClassifierVariant,
    pub beta: f64,
    pub isi: IsiConfig,
    pub metrics: ClassificationMetrics,
    pub report: ClassifierReport,
}

/// Trained classifier and adapter weights, tensor by tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierCheckpoint {
    pub bands: usize,
    pub classes: usize,
    pub mixer_config: MixerConfig,
    pub mixer: Vec<Vec<f32>>,
    pub asw: Option<Vec<Vec<f32>>>,
}

impl ClassifierCheckpoint {
    pub fn capture(mixer: &SpectralMixer, asw: Option<&AswParams>) -> Self {
        let mut mixer = mixer.clone();
        let mut asw = asw.cloned();
        Self {
            bands: mixer.bands,
            classes: mixer.classes,
            mixer_config: mixer.config,
            mixer: mixer.tensors_mut().into_iter().map(|t| t.to_vec()).collect(),
            asw: asw.as_mut().map(|a| a.tensors_mut().into_iter().map(|t| t.to_vec()).collect()),
        }
    }

    pub fn restore(&self) -> Result<(SpectralMixer, Option<AswParams>)> {
        fn fill(dst: Vec<&mut [f32]>, src: &[Vec<f32>], what: &str) -> Result<()> {
            if dst.len() != src.len() || dst.iter().zip(src).any(|(d, s)| d.len() != s.len()) {
                return Err(Error::ShapeMismatch(format!("{what} checkpoint does not match its configuration")));
            }
            for (d, s) in dst.into_iter().zip(src) {
                d.copy_from_slice(s);
            }
            Ok(())
        }
        let mut mixer = SpectralMixer::init(self.bands, self.classes, self.mixer_config, 0)?;
        fill(mixer.tensors_mut(), &self.mixer, "classifier")?;
        let asw = match &self.asw {
            Some(tensors) => {
                let mut a = AswParams::identity(self.bands);
                fill(a.tensors_mut(), tensors, "adapter")?;
                Some(a)
            }
            None => None,
        };
        Ok((mixer, asw))
    }
}

/// Trains and scores one variant. `Plain` ignores `beta` and `isi`, `Asw`
/// ignores `isi`.
pub fn run_variant(
    source: ClassifierSource<'_>,
    labels: &LabelMap,
    variant: ClassifierVariant,
    isi: &IsiConfig,
    cfg: &ClassifierTrainConfig,
) -> Result<ClassificationOutcome> {
    Ok(train_variant(source, labels, variant, isi, cfg)?.0)
}

/// [`run_variant`], also returning the trained weights.
pub fn train_variant(
    source: ClassifierSource<'_>,
    labels: &LabelMap,
    variant: ClassifierVariant,
    isi: &IsiConfig,
    cfg: &ClassifierTrainConfig,
) -> Result<(ClassificationOutcome, ClassifierCheckpoint)> {
    let bands = match source {
        ClassifierSource::Raw(cube) => cube.bands(),
        ClassifierSource::Compressed(s) => s.header.dims().2,
    };
    let (asw, isi, beta) = match variant {
        ClassifierVariant::Plain => (None, IsiConfig::OFF, 0.0),
        ClassifierVariant::Asw => (Some(AswParams::init(bands, cfg.seed)), IsiConfig::OFF, cfg.beta),
        ClassifierVariant::AswIsi => (Some(AswParams::init(bands, cfg.seed)), *isi, cfg.beta),
    };
    let cfg = ClassifierTrainConfig { beta, ..*cfg };
    let (mixer, asw, report) = train_classifier(source, labels, asw, &isi, &cfg)?;
    let metrics = evaluate_classifier(source, labels, &mixer, asw.as_ref())?;
    let checkpoint = ClassifierCheckpoint::capture(&mixer, asw.as_ref());
    Ok((ClassificationOutcome { variant, beta, isi, metrics, report }, checkpoint))
}
