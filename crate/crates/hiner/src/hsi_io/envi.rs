//! ENVI-style `.raw` + `.hdr` pairs. Only band-sequential 16-bit unsigned
//! little-endian payloads are supported.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::HsiCube;
use crate::error::{Error, Result};

const DATA_TYPE_U16: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub data_type: u32,
    pub byte_order: u32,
    pub interleave: String,
}

impl EnviHeader {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("ENVI") => {}
            other => {
                return Err(Error::MalformedHeader(format!(
                    "first line must be 'ENVI', found {other:?}"
                )))
            }
        }
        let mut fields = BTreeMap::new();
        let mut pending: Option<(String, String)> = None;
        for line in lines {
            // Brace-delimited values may span several lines.
            if let Some((key, mut acc)) = pending.take() {
                acc.push_str(line);
                if line.contains('}') {
                    fields.insert(key, acc);
                } else {
                    pending = Some((key, acc));
                }
                continue;
            }
            let line = line.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::MalformedHeader(format!("expected 'key = value', found {line:?}"))
            })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if value.starts_with('{') && !value.contains('}') {
                pending = Some((key, value));
            } else {
                fields.insert(key, value);
            }
        }
        if pending.is_some() {
            return Err(Error::MalformedHeader("unterminated '{' value".into()));
        }

        let int = |key: &str| -> Result<usize> {
            fields
                .get(key)
                .ok_or_else(|| Error::MalformedHeader(format!("missing '{key}'")))?
                .parse::<usize>()
                .map_err(|e| Error::MalformedHeader(format!("'{key}': {e}")))
        };
        let header = EnviHeader {
            samples: int("samples")?,
            lines: int("lines")?,
            bands: int("bands")?,
            data_type: int("data type")? as u32,
            byte_order: fields.get("byte order").map_or(Ok(0), |_| int("byte order"))? as u32,
            interleave: fields
                .get("interleave")
                .map(|s| s.to_ascii_lowercase())
                .ok_or_else(|| Error::MalformedHeader("missing 'interleave'".into()))?,
        };
        if header.interleave != "bsq" {
            return Err(Error::MalformedHeader(format!(
                "unsupported interleave '{}', only bsq",
                header.interleave
            )));
        }
        if header.data_type != DATA_TYPE_U16 {
            return Err(Error::MalformedHeader(format!(
                "unsupported data type {}, only 12 (uint16)",
                header.data_type
            )));
        }
        if header.byte_order != 0 {
            return Err(Error::MalformedHeader("only little-endian (byte order = 0) payloads".into()));
        }
        if header.samples == 0 || header.lines == 0 || header.bands == 0 {
            return Err(Error::MalformedHeader("samples, lines and bands must be positive".into()));
        }
        Ok(header)
    }

    pub fn render(&self) -> String {
        format!(
            "ENVI\nsamples = {}\nlines = {}\nbands = {}\nheader offset = 0\nfile type = ENVI Standard\n\
             data type = {}\ninterleave = {}\nbyte order = {}\n",
            self.samples, self.lines, self.bands, self.data_type, self.interleave, self.byte_order
        )
    }
}

fn paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("raw"), path.with_extension("hdr"))
}

pub fn read_envi(path: &Path) -> Result<HsiCube> {
    let (raw_path, hdr_path) = paths(path);
    let text = fs::read_to_string(&hdr_path).map_err(|e| Error::io(&hdr_path, e))?;
    let header = EnviHeader::parse(&text)?;
    let payload = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let count = header.samples * header.lines * header.bands;
    let expected = count * 2;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "header describes {expected} bytes but payload has {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]) as f32)
        .collect();
    HsiCube::new(data, header.bands, header.lines, header.samples, 16)
}

/// Writes an integer-valued cube as 16-bit BSQ. Values must be integers in `0..=65535`.
pub fn write_envi(cube: &HsiCube, path: &Path) -> Result<()> {
    let mut payload = Vec::with_capacity(cube.data().len() * 2);
    for (i, &v) in cube.data().iter().enumerate() {
        if v < 0.0 || v > u16::MAX as f32 || v.fract() != 0.0 {
            return Err(Error::InvalidInput(format!(
                "value {v} at index {i} is not representable as uint16"
            )));
        }
        payload.extend_from_slice(&(v as u16).to_le_bytes());
    }
    let header = EnviHeader {
        samples: cube.width(),
        lines: cube.height(),
        bands: cube.bands(),
        data_type: DATA_TYPE_U16,
        byte_order: 0,
        interleave: "bsq".into(),
    };
    let (raw_path, hdr_path) = paths(path);
    fs::write(&hdr_path, header.render()).map_err(|e| Error::io(&hdr_path, e))?;
    fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))?;
    Ok(())
}
