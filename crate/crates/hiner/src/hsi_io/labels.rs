//! Ground-truth label maps. On disk: `<name>.lbl` (H*W little-endian u16 class
//! ids, 0 = unlabeled) and `<name>.lbl.json` describing the train/test split.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u16>,
    class_count: usize,
    train_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

impl LabelMap {
    pub fn new(
        height: usize,
        width: usize,
        labels: Vec<u16>,
        class_count: usize,
        train_mask: Vec<bool>,
        test_mask: Vec<bool>,
    ) -> Result<Self> {
        let n = height * width;
        if n == 0 || class_count == 0 {
            return Err(Error::DimensionMismatch("label map needs positive size and class count".into()));
        }
        if labels.len() != n || train_mask.len() != n || test_mask.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "label map {height}x{width} needs {n} entries per array"
            )));
        }
        for i in 0..n {
            if train_mask[i] && test_mask[i] {
                return Err(Error::InvalidInput(format!("pixel {i} is in both train and test masks")));
            }
            if labels[i] as usize > class_count {
                return Err(Error::InvalidInput(format!(
                    "pixel {i} has class {} but only {class_count} classes exist",
                    labels[i]
                )));
            }
            if (train_mask[i] || test_mask[i]) && labels[i] == 0 {
                return Err(Error::InvalidInput(format!("unlabeled pixel {i} is in a split mask")));
            }
        }
        Ok(Self { height, width, labels, class_count, train_mask, test_mask })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Class ids, 1-based; 0 marks unlabeled pixels.
    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test_mask
    }

    pub fn train_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.train_mask[i]).collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.test_mask[i]).collect()
    }

    /// Relabels classes through `map` (indexed by 0-based class), keeping masks.
    pub fn relabel(&self, map: &[u16]) -> Result<Self> {
        if map.len() != self.class_count {
            return Err(Error::ShapeMismatch("relabel map must cover every class".into()));
        }
        let labels = self
            .labels
            .iter()
            .map(|&l| if l == 0 { 0 } else { map[l as usize - 1] })
            .collect();
        Self::new(self.height, self.width, labels, self.class_count, self.train_mask.clone(), self.test_mask.clone())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskDescriptor {
    height: usize,
    width: usize,
    class_count: usize,
    train: Vec<usize>,
    test: Vec<usize>,
}

fn paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("lbl"), path.with_extension("lbl.json"))
}

pub fn write_labels(map: &LabelMap, path: &Path) -> Result<()> {
    let (grid_path, meta_path) = paths(path);
    let bytes: Vec<u8> = map.labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(&grid_path, bytes).map_err(|e| Error::io(&grid_path, e))?;
    let desc = MaskDescriptor {
        height: map.height,
        width: map.width,
        class_count: map.class_count,
        train: map.train_indices(),
        test: map.test_indices(),
    };
    fs::write(&meta_path, serde_json::to_string(&desc).expect("descriptor serializes"))
        .map_err(|e| Error::io(&meta_path, e))
}

pub fn read_labels(path: &Path) -> Result<LabelMap> {
    let (grid_path, meta_path) = paths(path);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let desc: MaskDescriptor = serde_json::from_str(&text)
        .map_err(|e| Error::MalformedHeader(format!("{}: {e}", meta_path.display())))?;
    let bytes = fs::read(&grid_path).map_err(|e| Error::io(&grid_path, e))?;
    let n = desc.height * desc.width;
    if bytes.len() < n * 2 {
        return Err(Error::TruncatedPayload { expected: n * 2, found: bytes.len() });
    }
    if bytes.len() != n * 2 {
        return Err(Error::DimensionMismatch(format!("label grid has {} bytes, expected {}", bytes.len(), n * 2)));
    }
    let labels = bytes.chunks_exact(2).map(|b| u16::from_le_bytes([b[0], b[1]])).collect();
    let mut train = vec![false; n];
    let mut test = vec![false; n];
    for (mask, idx) in [(&mut train, &desc.train), (&mut test, &desc.test)] {
        for &i in idx {
            if i >= n {
                return Err(Error::DimensionMismatch(format!("mask index {i} outside {n} pixels")));
            }
            mask[i] = true;
        }
    }
    LabelMap::new(desc.height, desc.width, labels, desc.class_count, train, test)
}
