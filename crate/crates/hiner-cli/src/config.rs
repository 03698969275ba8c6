//! Run configuration: a TOML file, then `--set key=value` and dedicated flags
//! layered on top.

use std::path::{Path, PathBuf};

use hiner::codec::{ArchSpec, EmbedShape, PosEncodingConfig, WavelengthInput};
use hiner::downstream::{ClassifierTrainConfig, ClassifierVariant, IsiConfig};
use hiner::training::{Ablation, LossConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub io: IoConfig,
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub ablate: AblateConfig,
    pub classify: ClassifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            io: IoConfig::default(),
            synth: SynthConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            ablate: AblateConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

/// Input and artifact paths. Reports go to `--out` or stdout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub stream: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub cube_out: Option<PathBuf>,
    pub labels_out: Option<PathBuf>,
    pub stream_out: Option<PathBuf>,
    pub checkpoint_out: Option<PathBuf>,
    /// Per-epoch training log (CSV).
    pub log_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    pub noise_sigma: f64,
    pub smoothness: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { height: 36, width: 36, bands: 20, classes: 4, noise_sigma: 0.01, smoothness: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// 8-bit size of decoder plus embeddings that the widths are fitted to.
    pub budget_bytes: usize,
    /// `[h, w, c]`; by default `c = 16` and `h, w` just cover the image.
    pub embed: Option<[usize; 3]>,
    pub strides: Vec<usize>,
    pub width_floor: usize,
    pub pe_base: f64,
    pub pe_levels: usize,
    pub bitwidth: u8,
    /// Ship the encoder so the decoder side can sample new wavelengths.
    pub include_encoder: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            budget_bytes: 209_715,
            embed: None,
            strides: vec![3, 2, 2],
            width_floor: 8,
            pe_base: 1.25,
            pe_levels: 80,
            bitwidth: 8,
            include_encoder: true,
        }
    }
}

impl ModelConfig {
    pub fn arch(&self, height: usize, width: usize) -> Result<ArchSpec, CliError> {
        if self.strides.is_empty() || self.strides.contains(&0) {
            return Err(CliError::Config("model.strides must be nonempty and positive".into()));
        }
        let up: usize = self.strides.iter().product();
        let [h, w, c] = self.embed.unwrap_or([height.div_ceil(up), width.div_ceil(up), 16]);
        let mut arch = ArchSpec::new(EmbedShape::new(h, w, c), self.strides.clone());
        arch.input = WavelengthInput::Fourier(PosEncodingConfig::new(self.pe_base, self.pe_levels)?);
        arch.width_floor = self.width_floor;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub gamma: f64,
    pub ablation: Ablation,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self { epochs: t.epochs, lr: t.lr_init, gamma: LossConfig::default().gamma, ablation: Ablation::Default }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { epochs: self.epochs, lr_init: self.lr, seed, ablation: self.ablation, ..TrainConfig::default() }
    }

    pub fn loss_config(&self) -> Result<LossConfig, CliError> {
        let cfg = LossConfig { gamma: self.gamma, ..LossConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub variants: Vec<Ablation>,
    /// Embedding shapes `[h, w, c]` swept with the default variant.
    pub embed_sizes: Vec<[usize; 3]>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self { variants: Ablation::ALL.to_vec(), embed_sizes: vec![[3, 3, 4], [3, 3, 8], [3, 3, 16], [3, 3, 32]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub variants: Vec<ClassifierVariant>,
    pub beta: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_size: usize,
    pub dim: usize,
    pub eta: f64,
    pub enable_prob: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let c = ClassifierTrainConfig::default();
        let i = IsiConfig::default();
        Self {
            variants: ClassifierVariant::ALL.to_vec(),
            beta: c.beta,
            lr: c.lr,
            weight_decay: c.weight_decay,
            epochs: c.epochs,
            batch_size: c.batch_size,
            patch_size: c.patch_size,
            dim: c.dim,
            eta: i.eta,
            enable_prob: i.enable_prob,
        }
    }
}

impl ClassifyConfig {
    pub fn train_config(&self, seed: u64) -> Result<ClassifierTrainConfig, CliError> {
        let cfg = ClassifierTrainConfig {
            beta: self.beta,
            lr: self.lr,
            weight_decay: self.weight_decay,
            epochs: self.epochs,
            batch_size: self.batch_size,
            patch_size: self.patch_size,
            dim: self.dim,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn isi(&self) -> Result<IsiConfig, CliError> {
        let isi = IsiConfig { eta: self.eta, enable_prob: self.enable_prob };
        isi.validate()?;
        Ok(isi)
    }
}

/// Parses the right-hand side of `--set key=value` as a TOML value; bare
/// words fall back to strings.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key was just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// An override `key=value`, dotted keys addressing sections.
pub fn parse_override(s: &str) -> Result<(String, toml::Value), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), parse_value(v.trim())))
}

impl RunConfig {
    /// Reads `path` if given, applies `overrides` in order, then checks every
    /// field name and type.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            set_path(&mut table, k, v.clone())?;
        }
        RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
        value.as_deref().ok_or_else(|| CliError::Config(format!("`{key}` is required for this command")))
    }
}
