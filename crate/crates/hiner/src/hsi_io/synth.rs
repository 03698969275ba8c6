//! Seeded synthetic scenes: a Voronoi partition of the image into classes, each
//! class carrying a smooth reflectance curve over wavelength.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{wavelength_grid, HsiCube, LabelMap};
use crate::error::{Error, Result};

const SITES_PER_CLASS: usize = 2;
const SINUSOIDS: usize = 3;
const TRAIN_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub class_count: usize,
    pub seed: u64,
    /// Standard deviation of additive Gaussian noise, normalized units.
    pub noise_sigma: f64,
    /// Larger values give slower-varying spectral curves.
    pub signature_smoothness: f64,
}

impl SyntheticSpec {
    /// The 36x36x20, four-class scene used throughout the tests.
    pub fn fixture(seed: u64, noise_sigma: f64) -> Self {
        Self {
            height: 36,
            width: 36,
            bands: 20,
            class_count: 4,
            seed,
            noise_sigma,
            signature_smoothness: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.bands == 0 {
            return Err(Error::InvalidInput("synthetic dimensions must be positive".into()));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidInput("synthetic scenes need at least two classes".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidInput("noise_sigma must be nonnegative".into()));
        }
        if !(self.signature_smoothness > 0.0) {
            return Err(Error::InvalidInput("signature_smoothness must be positive".into()));
        }
        Ok(())
    }
}

struct Signature {
    offset: f64,
    terms: [(f64, f64, f64); SINUSOIDS],
}

impl Signature {
    fn sample(rng: &mut ChaCha8Rng, smoothness: f64) -> Self {
        let offset = rng.gen_range(0.3..0.6);
        let terms = std::array::from_fn(|_| {
            let amplitude = rng.gen_range(0.03..0.1);
            let cycles = rng.gen_range(0.3..1.5) / smoothness;
            let phase = rng.gen_range(0.0..2.0 * PI);
            (amplitude, cycles, phase)
        });
        Self { offset, terms }
    }

    fn at(&self, lambda: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|&(a, f, p)| a * (2.0 * PI * f * lambda + p).sin())
                .sum::<f64>()
    }
}

/// Generates a seeded scene and its ground truth. All pixels are labeled; about
/// 5% of each class goes to the training split.
pub fn synth_cube(spec: &SyntheticSpec) -> Result<(HsiCube, LabelMap)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, w, c, k) = (spec.height, spec.width, spec.bands, spec.class_count);

    let signatures: Vec<Signature> =
        (0..k).map(|_| Signature::sample(&mut rng, spec.signature_smoothness)).collect();
    let sites: Vec<(f64, f64, usize)> = (0..k * SITES_PER_CLASS)
        .map(|i| (rng.gen_range(0.0..h as f64), rng.gen_range(0.0..w as f64), i % k))
        .collect();

    let mut class_of = vec![0usize; h * w];
    for r in 0..h {
        for col in 0..w {
            let (y, x) = (r as f64 + 0.5, col as f64 + 0.5);
            let mut best = (f64::INFINITY, 0);
            for &(sy, sx, class) in &sites {
                let d = (y - sy).powi(2) + (x - sx).powi(2);
                if d < best.0 {
                    best = (d, class);
                }
            }
            class_of[r * w + col] = best.1;
        }
    }

    let grid = wavelength_grid(c)?;
    let curves: Vec<Vec<f64>> =
        signatures.iter().map(|s| grid.lambdas().iter().map(|&l| s.at(l)).collect()).collect();
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut data = vec![0f32; c * h * w];
    for p in 0..h * w {
        let curve = &curves[class_of[p]];
        for b in 0..c {
            let eps = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            data[b * h * w + p] = (curve[b] + eps).clamp(0.0, 1.0) as f32;
        }
    }

    let mut train = vec![false; h * w];
    let mut test = vec![false; h * w];
    for class in 0..k {
        let mut members: Vec<usize> = (0..h * w).filter(|&p| class_of[p] == class).collect();
        members.shuffle(&mut rng);
        let n_train = ((members.len() as f64 * TRAIN_FRACTION).round() as usize).max(1).min(members.len());
        for (i, &p) in members.iter().enumerate() {
            if i < n_train {
                train[p] = true;
            } else {
                test[p] = true;
            }
        }
    }
    let labels = class_of.iter().map(|&cl| cl as u16 + 1).collect();
    let cube = HsiCube::new(data, c, h, w, 16)?;
    let map = LabelMap::new(h, w, labels, k, train, test)?;
    Ok((cube, map))
}
