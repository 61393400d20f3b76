//! In-memory dataset of feature rows and integer labels.
//!
//! Features are stored as `f32` (matching the on-disk container); all
//! arithmetic widens to `f64`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>, // n x d, row-major
    labels: Vec<u32>,
    num_classes: u32,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f32>, labels: Vec<u32>, dim: usize, num_classes: u32) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("dataset must contain at least one row"));
        }
        if dim == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(
                "feature dimension and class count must be positive".into(),
            ));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                context: "dataset feature buffer",
                expected: labels.len() * dim,
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        for (row, &label) in labels.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    num_classes,
                });
            }
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty datasets
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    /// Dataset with row `i` removed; remaining rows keep their order.
    pub fn remove_row(&self, i: usize) -> Dataset {
        assert!(i < self.len(), "row index out of range");
        let mut features = Vec::with_capacity((self.len() - 1) * self.dim);
        features.extend_from_slice(&self.features[..i * self.dim]);
        features.extend_from_slice(&self.features[(i + 1) * self.dim..]);
        let mut labels = Vec::with_capacity(self.len() - 1);
        labels.extend_from_slice(&self.labels[..i]);
        labels.extend_from_slice(&self.labels[i + 1..]);
        Dataset {
            features,
            labels,
            num_classes: self.num_classes,
            dim: self.dim,
        }
    }

    /// Dataset restricted to the given rows (in the order given).
    pub fn select(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("row selection"));
        }
        let mut features = Vec::with_capacity(rows.len() * self.dim);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.len() {
                return Err(Error::InvalidArgument(format!(
                    "row {r} out of range (n = {})",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Ok(Dataset {
            features,
            labels,
            num_classes: self.num_classes,
            dim: self.dim,
        })
    }

    /// Row indices belonging to `class`.
    pub fn class_rows(&self, class: u32) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Most frequent label; ties go to the lowest class index.
    pub fn majority_class(&self) -> u32 {
        let mut counts = vec![0usize; self.num_classes as usize];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        let mut best = 0;
        for (c, &cnt) in counts.iter().enumerate() {
            if cnt > counts[best] {
                best = c;
            }
        }
        best as u32
    }

    /// Fraction of rows carrying the majority label.
    pub fn majority_fraction(&self) -> f64 {
        let m = self.majority_class();
        let cnt = self.labels.iter().filter(|&&l| l == m).count();
        cnt as f64 / self.len() as f64
    }

    /// FNV-1a hash over shape, features, and labels. Stable across platforms;
    /// used to stamp run manifests and posteriors.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        };
        eat(&(self.len() as u64).to_le_bytes());
        eat(&(self.dim as u64).to_le_bytes());
        eat(&self.num_classes.to_le_bytes());
        for v in &self.features {
            eat(&v.to_le_bytes());
        }
        for l in &self.labels {
            eat(&l.to_le_bytes());
        }
        h
    }
}
