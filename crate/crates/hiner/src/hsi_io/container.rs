//! Portable container: `<name>.hsrb` holds C*H*W little-endian f32 values in
//! band-major order; `<name>.json` carries the dimensions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HsiCube;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSidecar {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub source_bitdepth: u32,
    /// Physical band centers, if known. Purely informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelengths_nm: Option<Vec<f64>>,
}

fn paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("hsrb"), path.with_extension("json"))
}

pub fn read_container(path: &Path) -> Result<(HsiCube, ContainerSidecar)> {
    let (data_path, meta_path) = paths(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ContainerSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::MalformedHeader(format!("{}: {e}", meta_path.display())))?;
    if let Some(w) = &meta.wavelengths_nm {
        if w.len() != meta.bands {
            return Err(Error::MalformedHeader(format!(
                "sidecar lists {} wavelengths for {} bands",
                w.len(),
                meta.bands
            )));
        }
    }
    let payload = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let expected = meta.height * meta.width * meta.bands * 4;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "sidecar describes {expected} bytes but payload has {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let cube = HsiCube::new(data, meta.bands, meta.height, meta.width, meta.source_bitdepth)?;
    Ok((cube, meta))
}

pub fn write_container(cube: &HsiCube, wavelengths_nm: Option<Vec<f64>>, path: &Path) -> Result<()> {
    let meta = ContainerSidecar {
        height: cube.height(),
        width: cube.width(),
        bands: cube.bands(),
        source_bitdepth: cube.source_bitdepth(),
        wavelengths_nm,
    };
    let (data_path, meta_path) = paths(path);
    let payload: Vec<u8> = cube.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&data_path, payload).map_err(|e| Error::io(&data_path, e))?;
    let text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}
