//! Spectral interpolation augmentation: decode the cube at randomly perturbed
//! wavelengths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::HinerModel;
use crate::error::{Error, Result};
use crate::hsi_io::WavelengthGrid;

/// Jittered wavelengths stay this far inside `(0, 1)`.
pub const LAMBDA_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsiConfig {
    /// Jitter half-width in normalized wavelength units.
    pub eta: f64,
    /// Probability that a draw is jittered at all.
    pub enable_prob: f64,
}

impl Default for IsiConfig {
    fn default() -> Self {
        Self { eta: 0.1, enable_prob: 0.5 }
    }
}

impl IsiConfig {
    pub const OFF: IsiConfig = IsiConfig { eta: 0.0, enable_prob: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta < 0.5) {
            return Err(Error::Config(format!("eta {} must lie in [0, 0.5)", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.enable_prob) {
            return Err(Error::Config(format!("enable_prob {} must lie in [0, 1]", self.enable_prob)));
        }
        Ok(())
    }

    /// Whether draws can ever differ from the plain grid.
    pub fn is_active(&self) -> bool {
        self.eta > 0.0 && self.enable_prob > 0.0
    }
}

/// The wavelengths one draw decodes at. Jittered neighbours may swap order.
pub fn isi_grid(grid: &WavelengthGrid, cfg: &IsiConfig, seed: u64) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !cfg.is_active() {
        return Ok(grid.lambdas().to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if rng.gen::<f64>() >= cfg.enable_prob {
        return Ok(grid.lambdas().to_vec());
    }
    Ok(grid
        .lambdas()
        .iter()
        .map(|&l| (l + rng.gen_range(-cfg.eta..=cfg.eta)).clamp(LAMBDA_MARGIN, 1.0 - LAMBDA_MARGIN))
        .collect())
}

/// A cube decoded at one seeded draw of jittered wavelengths,
/// band-sequential and unclamped like [`HinerModel::reconstruct`].
pub fn isi_sample(model: &HinerModel, grid: &WavelengthGrid, cfg: &IsiConfig, seed: u64) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    for l in isi_grid(grid, cfg, seed)? {
        out.extend(model.forward(l)?);
    }
    Ok(out)
}
