use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A named trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Option<Tensor>,
}

/// Checkpoint record: the flat `(name, shape, values)` triple. Values are
/// written as shortest round-trip decimals, so encode/decode is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter and returns its index.
    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.params.push(Param {
            name: name.into(),
            value,
            grad: None,
        });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Param {
        &self.params[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Places every parameter on the tape as a trainable leaf, returning
    /// handles in parameter order.
    pub fn register<'g>(&self, tape: &mut Tape<'g>) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.param(p.value.clone()))
            .collect()
    }

    /// Accumulates tape gradients into each parameter's `grad`.
    pub fn collect_grads(&mut self, handles: &[Var], grads: &mut Gradients) {
        for (p, &h) in self.params.iter_mut().zip(handles) {
            if let Some(g) = grads.take(h) {
                match &mut p.grad {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.grad = None);
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.params
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                shape: [p.value.rows(), p.value.cols()],
                values: p.value.data().to_vec(),
            })
            .collect()
    }

    /// Loads values from records, which must match this store's names and
    /// shapes exactly and in order.
    pub fn load_records(&mut self, records: &[ParamRecord]) -> Result<()> {
        if records.len() != self.params.len() {
            return Err(Error::format(
                "checkpoint",
                format!(
                    "{} parameter records, model expects {}",
                    records.len(),
                    self.params.len()
                ),
            ));
        }
        for (p, r) in self.params.iter().zip(records) {
            let shape = [p.value.rows(), p.value.cols()];
            if r.name != p.name || r.shape != shape {
                return Err(Error::format(
                    "checkpoint",
                    format!(
                        "record `{}` {:?} does not match parameter `{}` {:?}",
                        r.name, r.shape, p.name, shape
                    ),
                ));
            }
            if r.values.len() != p.value.len() || r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(
                    "checkpoint",
                    format!("bad values for `{}`", r.name),
                ));
            }
        }
        for (p, r) in self.params.iter_mut().zip(records) {
            p.value.data_mut().copy_from_slice(&r.values);
            p.grad = None;
        }
        Ok(())
    }
}
