//! Hyperspectral cubes, the normalized wavelength grid, label maps and the
//! on-disk formats they travel in.
//!
//! Cubes are stored band-sequential: `data[band * H * W + row * W + col]`.

mod container;
mod envi;
mod labels;
mod synth;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use container::{read_container, write_container, ContainerSidecar};
pub use envi::{read_envi, write_envi, EnviHeader};
pub use labels::{read_labels, write_labels, LabelMap};
pub use synth::{synth_cube, SyntheticSpec};

/// A hyperspectral image of `bands` spectral slices, each `height x width`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    data: Vec<f32>,
    bands: usize,
    height: usize,
    width: usize,
    source_bitdepth: u32,
    band_max: Vec<f32>,
}

impl HsiCube {
    /// Builds a cube from band-sequential data, recomputing per-band maxima.
    pub fn new(
        data: Vec<f32>,
        bands: usize,
        height: usize,
        width: usize,
        source_bitdepth: u32,
    ) -> Result<Self> {
        if bands == 0 || height == 0 || width == 0 {
            return Err(Error::DimensionMismatch(format!(
                "cube dimensions must be positive, got C={bands} H={height} W={width}"
            )));
        }
        let expected = bands * height * width;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "C*H*W = {expected} but {} values supplied",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        let band_max = compute_band_max(&data, bands, height * width);
        Ok(Self { data, bands, height, width, source_bitdepth, band_max })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(H, W, C)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn source_bitdepth(&self) -> u32 {
        self.source_bitdepth
    }

    pub fn band_max(&self) -> &[f32] {
        &self.band_max
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn band(&self, index: usize) -> &[f32] {
        let m = self.pixels();
        &self.data[index * m..(index + 1) * m]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.height + row) * self.width + col]
    }

    /// The spectrum of one pixel, one value per band.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f32> {
        (0..self.bands).map(|b| self.get(b, row, col)).collect()
    }

    pub fn global_max(&self) -> f32 {
        self.band_max.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }
}

fn compute_band_max(data: &[f32], bands: usize, pixels: usize) -> Vec<f32> {
    (0..bands)
        .map(|b| data[b * pixels..(b + 1) * pixels].iter().copied().fold(f32::NEG_INFINITY, f32::max))
        .collect()
}

/// Divides the cube by its single global maximum so the result peaks at exactly 1.0.
pub fn normalize(cube: &HsiCube) -> Result<HsiCube> {
    let max = cube.global_max();
    if max <= 0.0 || cube.data.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("cannot normalize a cube without positive values".into()));
    }
    if cube.data.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("negative reflectance values cannot be normalized into [0,1]".into()));
    }
    let data = cube.data.iter().map(|&v| v / max).collect();
    HsiCube::new(data, cube.bands, cube.height, cube.width, cube.source_bitdepth)
}

/// Normalized wavelengths, strictly increasing inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthGrid {
    lambdas: Vec<f64>,
}

impl WavelengthGrid {
    pub fn from_lambdas(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidInput("wavelength grid must have at least one entry".into()));
        }
        if lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
            return Err(Error::Domain("normalized wavelengths must lie in (0,1)".into()));
        }
        if lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("wavelength grid must be strictly increasing".into()));
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `lambda_i = (i + 1) / (bands + 1)`.
pub fn wavelength_grid(bands: usize) -> Result<WavelengthGrid> {
    if bands == 0 {
        return Err(Error::InvalidInput("wavelength grid needs at least one band".into()));
    }
    let denom = (bands + 1) as f64;
    Ok(WavelengthGrid { lambdas: (0..bands).map(|i| (i + 1) as f64 / denom).collect() })
}

/// A band permutation: output band `i` is input band `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandPermutation(pub Vec<usize>);

impl BandPermutation {
    pub fn seeded(bands: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..bands).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self(perm)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }

    /// The permutation equivalent to applying `self` and then `other`.
    pub fn then(&self, other: &BandPermutation) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn apply(&self, cube: &HsiCube) -> Result<HsiCube> {
        if self.0.len() != cube.bands {
            return Err(Error::ShapeMismatch(format!(
                "permutation over {} bands applied to a {}-band cube",
                self.0.len(),
                cube.bands
            )));
        }
        let mut data = Vec::with_capacity(cube.data.len());
        for &src in &self.0 {
            data.extend_from_slice(cube.band(src));
        }
        HsiCube::new(data, cube.bands, cube.height, cube.width, cube.source_bitdepth)
    }
}

/// Permutes the bands of `cube` while leaving the wavelength grid in place, so
/// that wavelength `i` now addresses a different band.
pub fn shuffle_bands(
    cube: &HsiCube,
    grid: &WavelengthGrid,
    seed: u64,
) -> Result<(HsiCube, BandPermutation)> {
    if grid.len() != cube.bands {
        return Err(Error::ShapeMismatch(format!(
            "grid has {} wavelengths but cube has {} bands",
            grid.len(),
            cube.bands
        )));
    }
    let perm = BandPermutation::seeded(cube.bands, seed);
    Ok((perm.apply(cube)?, perm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeFormat {
    /// `<name>.raw` + `<name>.hdr`, BSQ, 16-bit unsigned little-endian.
    EnviRaw,
    /// `<name>.hsrb` (f32 LE, band-major) + `<name>.json` sidecar.
    PortableContainer,
}

impl CubeFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "raw" | "hdr" => Some(CubeFormat::EnviRaw),
            "hsrb" | "json" => Some(CubeFormat::PortableContainer),
            _ => None,
        }
    }
}

/// Reads a cube without touching its values.
pub fn load_cube(path: &Path, format: CubeFormat) -> Result<HsiCube> {
    match format {
        CubeFormat::EnviRaw => read_envi(path),
        CubeFormat::PortableContainer => read_container(path).map(|(cube, _)| cube),
    }
}

pub fn save_cube(cube: &HsiCube, path: &Path, format: CubeFormat) -> Result<()> {
    match format {
        CubeFormat::EnviRaw => write_envi(cube, path),
        CubeFormat::PortableContainer => write_container(cube, None, path),
    }
}
