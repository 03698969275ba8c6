//! Uniform per-tensor quantization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BITWIDTH: u8 = 2;
pub const MAX_BITWIDTH: u8 = 16;

/// Affine map between codes and values: `v = min + code * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantSpec {
    pub bitwidth: u8,
    pub min: f32,
    pub scale: f32,
}

impl QuantSpec {
    pub fn max_code(&self) -> u32 {
        (1u32 << self.bitwidth) - 1
    }

    pub fn value(&self, code: u16) -> f64 {
        self.min as f64 + code as f64 * self.scale as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub spec: QuantSpec,
    pub codes: Vec<u16>,
}

impl QuantizedTensor {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn dequantize(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| self.spec.value(c)).collect()
    }

    /// The values a model actually runs with.
    pub fn dequantize_f32(&self) -> Vec<f32> {
        self.codes.iter().map(|&c| self.spec.value(c) as f32).collect()
    }
}

pub fn check_bitwidth(bitwidth: u8) -> Result<()> {
    if (MIN_BITWIDTH..=MAX_BITWIDTH).contains(&bitwidth) {
        Ok(())
    } else {
        Err(Error::Config(format!("bit width {bitwidth} outside {MIN_BITWIDTH}..={MAX_BITWIDTH}")))
    }
}

/// Largest f32 not above `x` (for finite positive `x`).
fn f32_at_most(x: f64) -> f32 {
    let s = x as f32;
    if s as f64 > x {
        f32::from_bits(s.to_bits() - 1)
    } else {
        s
    }
}

/// Quantizes with `scale = (max - min) / (2^b - 1)`, rounded down to the
/// nearest f32 so the stored scale never overshoots the range. Codes round
/// half away from zero, then each is nudged to whichever neighbour decodes
/// closest in `f64`, which makes `|dequantize - v| <= scale / 2` hold exactly.
pub fn quantize_tensor(name: &str, shape: &[usize], values: &[f32], bitwidth: u8) -> Result<QuantizedTensor> {
    check_bitwidth(bitwidth)?;
    if shape.iter().product::<usize>() != values.len() {
        return Err(Error::ShapeMismatch(format!("{name}: shape {shape:?} does not hold {} values", values.len())));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name}: cannot quantize non-finite value {bad}")));
    }
    let (min, max) = values
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let max_code = (1u32 << bitwidth) - 1;
    if values.is_empty() || min == max {
        let spec = QuantSpec { bitwidth, min: if values.is_empty() { 0.0 } else { min }, scale: 0.0 };
        return Ok(QuantizedTensor { name: name.into(), shape: shape.to_vec(), spec, codes: vec![0; values.len()] });
    }
    let range = max as f64 - min as f64;
    let mut scale = f32_at_most(range / max_code as f64);
    if scale == 0.0 {
        scale = f32::from_bits(1);
    }
    if !scale.is_finite() {
        return Err(Error::Domain(format!("{name}: value range {range} overflows the scale")));
    }
    let spec = QuantSpec { bitwidth, min, scale };
    let s = scale as f64;
    let codes = values
        .iter()
        .map(|&v| {
            let v = v as f64;
            let rounded = ((v - min as f64) / s).round().clamp(0.0, max_code as f64) as u32;
            let err = |c: u32| (spec.value(c as u16) - v).abs();
            let mut best = rounded;
            for c in [rounded.saturating_sub(1), (rounded + 1).min(max_code)] {
                if err(c) < err(best) {
                    best = c;
                }
            }
            best as u16
        })
        .collect();
    Ok(QuantizedTensor { name: name.into(), shape: shape.to_vec(), spec, codes })
}
