use serde::{Deserialize, Serialize};

use super::HilbertError;

/// Ordered list of subsystem dimensions defining a composite basis.
///
/// Basis ordering is big-endian over the layout: the leftmost subsystem is
/// the slowest-varying index of a flattened amplitude vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SubsystemLayout {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self, HilbertError> {
        if dims.is_empty() {
            return Err(HilbertError::InvalidLayout("layout has no subsystems".into()));
        }
        if dims.len() != labels.len() {
            return Err(HilbertError::InvalidLayout(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(HilbertError::InvalidLayout(format!("subsystem dimension {d} < 2")));
        }
        Ok(Self { dims, labels })
    }

    /// Layout with generated labels `prefix0, prefix1, ...`.
    pub fn uniform(n: usize, dim: usize, prefix: &str) -> Result<Self, HilbertError> {
        Self::new(vec![dim; n], (0..n).map(|i| format!("{prefix}{i}")).collect())
    }

    pub fn qubits(n: usize) -> Self {
        Self::uniform(n, 2, "q").expect("n >= 1 qubits")
    }

    pub fn single(dim: usize, label: &str) -> Result<Self, HilbertError> {
        Self::new(vec![dim], vec![label.to_string()])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Index stride of every subsystem in the flattened basis.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self { dims, labels }
    }

    /// Layout restricted to the given subsystems, in the order given.
    pub fn select(&self, subsystems: &[usize]) -> Result<Self, HilbertError> {
        for &s in subsystems {
            if s >= self.len() {
                return Err(HilbertError::IndexOutOfRange { index: s, len: self.len() });
            }
        }
        Self::new(
            subsystems.iter().map(|&s| self.dims[s]).collect(),
            subsystems.iter().map(|&s| self.labels[s].clone()).collect(),
        )
    }

    /// Digits of a flat basis index, one per subsystem.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }

    /// Same dimensions in the same order; labels are not compared.
    pub fn compatible(&self, other: &Self) -> bool {
        self.dims == other.dims
    }
}
