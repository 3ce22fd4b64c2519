//! Named parameter collections and their checkpoint format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{AutodiffError, Tensor};

/// Version written into every checkpoint; readers reject anything else.
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    tensor: Tensor,
}

/// An ordered list of named weight matrices and bias vectors.
///
/// Shapes are fixed once a tensor is added; values change only through
/// [`ParamSet::set`] (shape-checked) or an optimizer step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    params: ParamSet,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.entries.push(NamedTensor {
            name: name.into(),
            tensor,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|e| &e.tensor)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.tensor))
    }

    pub(crate) fn tensor_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].tensor
    }

    /// Replaces a tensor's values; the shape must match.
    pub fn set(&mut self, id: ParamId, tensor: Tensor) -> Result<(), AutodiffError> {
        let current = &mut self.entries[id.0].tensor;
        if current.shape() != tensor.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "ParamSet::set",
                left: current.shape(),
                right: tensor.shape(),
            });
        }
        *current = tensor;
        Ok(())
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.tensor.is_finite())
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| e.tensor.data().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<(), AutodiffError> {
        if values.len() != self.num_scalars() {
            return Err(AutodiffError::ShapeMismatch {
                op: "ParamSet::set_flat",
                left: (self.num_scalars(), 1),
                right: (values.len(), 1),
            });
        }
        let mut offset = 0;
        for e in &mut self.entries {
            let n = e.tensor.len();
            e.tensor.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// SHA-256 over names, shapes and exact bit patterns.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.entries {
            hasher.update(e.name.as_bytes());
            hasher.update((e.tensor.rows() as u64).to_le_bytes());
            hasher.update((e.tensor.cols() as u64).to_le_bytes());
            for v in e.tensor.data() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_checkpoint_json(&self) -> Result<String, AutodiffError> {
        Ok(serde_json::to_string(&Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            params: self.clone(),
        })?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, AutodiffError> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(AutodiffError::UnsupportedVersion(ckpt.format_version));
        }
        for e in &ckpt.params.entries {
            if e.tensor.len() != e.tensor.rows() * e.tensor.cols() {
                return Err(AutodiffError::Checkpoint(format!(
                    "tensor `{}` has {} values for shape {:?}",
                    e.name,
                    e.tensor.len(),
                    e.tensor.shape()
                )));
            }
            if !e.tensor.is_finite() {
                return Err(AutodiffError::Checkpoint(format!(
                    "tensor `{}` contains non-finite values",
                    e.name
                )));
            }
        }
        Ok(ckpt.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AutodiffError> {
        fs::write(path, self.to_checkpoint_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AutodiffError> {
        Self::from_checkpoint_json(&fs::read_to_string(path)?)
    }
}
