//! Accuracy metrics over the test split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsi_io::LabelMap;

/// `counts[truth][prediction]`, classes 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn overall_accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Recall per class; `None` for classes absent from the evaluated truth.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let support: u64 = row.iter().sum();
                (support > 0).then(|| row[k] as f64 / support as f64)
            })
            .collect()
    }

    /// Mean recall over classes that occur in the evaluated truth.
    pub fn average_accuracy(&self) -> f64 {
        let recalls: Vec<f64> = self.per_class_accuracy().into_iter().flatten().collect();
        recalls.iter().sum::<f64>() / recalls.len() as f64
    }

    /// Cohen's kappa, `(p_o - p_e) / (1 - p_e)`.
    pub fn kappa(&self) -> f64 {
        let n = self.total() as f64;
        let po = self.overall_accuracy();
        let pe = (0..self.classes())
            .map(|k| {
                let row: u64 = self.counts[k].iter().sum();
                let col: u64 = self.counts.iter().map(|r| r[k]).sum();
                row as f64 * col as f64
            })
            .sum::<f64>()
            / (n * n);
        if pe == 1.0 {
            // single class in both truth and prediction
            return 1.0;
        }
        (po - pe) / (1.0 - pe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub confusion: ConfusionMatrix,
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub kappa: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
}

impl ClassificationMetrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        Self {
            overall_accuracy: confusion.overall_accuracy(),
            average_accuracy: confusion.average_accuracy(),
            kappa: confusion.kappa(),
            per_class_accuracy: confusion.per_class_accuracy(),
            confusion,
        }
    }
}

/// Scores predicted class ids (1-based, one per pixel) on the test mask.
pub fn evaluate_classification(pred: &[u16], truth: &LabelMap) -> Result<ClassificationMetrics> {
    let n = truth.height() * truth.width();
    if pred.len() != n {
        return Err(Error::ShapeMismatch(format!("{} predictions for {n} pixels", pred.len())));
    }
    let test = truth.test_indices();
    if test.is_empty() {
        return Err(Error::InvalidInput("test mask is empty".into()));
    }
    let k = truth.class_count();
    let mut cm = ConfusionMatrix::new(k);
    for i in test {
        let p = pred[i] as usize;
        if p == 0 || p > k {
            return Err(Error::InvalidInput(format!("prediction {p} at pixel {i} is not a class")));
        }
        cm.counts[truth.labels()[i] as usize - 1][p - 1] += 1;
    }
    Ok(ClassificationMetrics::from_confusion(cm))
}
