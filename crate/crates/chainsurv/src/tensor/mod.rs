//! Minimal dense-tensor kernel with tape-based reverse-mode differentiation.
//!
//! Everything is 64-bit floating point and row-major. The tape is rebuilt on
//! every forward pass; parameters live outside the tape in a [`ParamSet`] and
//! are bound onto a fresh tape per pass, with gradients copied back after
//! `backward`.

mod gradcheck;
mod optim;
mod tape;

pub use gradcheck::grad_check;
pub use optim::{adamw_step, AdamW};
pub use tape::{Tape, TensorId};

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    pub requires_grad: bool,
    /// Gradient accumulator, same length as `data`. Allocated on first
    /// backward pass and kept until explicitly zeroed.
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::contract(format!(
                "tensor extents must be positive, got {shape:?}"
            )));
        }
        if data.len() != numel {
            return Err(Error::contract(format!(
                "data length {} does not match shape {:?} (numel {})",
                data.len(),
                shape,
                numel
            )));
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    /// 2-D tensor from rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::contract("from_rows: no rows"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::contract("from_rows: ragged rows"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            data.extend_from_slice(r);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Rows of a 1-D or 2-D tensor (a vector is a single row).
    pub fn n_rows(&self) -> usize {
        if self.shape.len() <= 1 {
            1
        } else {
            self.shape[0]
        }
    }

    /// Length of the last axis.
    pub fn last_axis(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    /// Accumulate into the gradient buffer, allocating it if absent.
    pub fn accumulate_grad(&mut self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.data.len());
        let grad = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// A named, trainable tensor plus its optimizer state.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    /// First-moment accumulator (same shape as the tensor).
    pub m: Vec<f64>,
    /// Second-moment accumulator.
    pub v: Vec<f64>,
    /// Number of optimizer steps taken.
    pub step: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, tensor: Tensor) -> Self {
        let n = tensor.numel();
        Parameter {
            name: name.into(),
            tensor: tensor.with_grad(),
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// Ordered collection of parameters addressed by name path
/// (e.g. `"autoreg.layer0.attn.head2.wq"`).
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, param: Parameter) -> Result<()> {
        if self.by_name.contains_key(&param.name) {
            return Err(Error::contract(format!(
                "duplicate parameter name `{}`",
                param.name
            )));
        }
        self.by_name.insert(param.name.clone(), self.params.len());
        self.params.push(param);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.by_name.get(name).map(|&i| &self.params[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.by_name.get(name).copied().map(|i| &mut self.params[i])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.zero_grad();
        }
    }

    /// Bind every parameter onto `tape` as a gradient-tracked leaf.
    /// Returns the name → tape id map for this pass.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let mut ids = BTreeMap::new();
        for p in &self.params {
            let mut leaf = Tensor {
                shape: p.tensor.shape.clone(),
                data: p.tensor.data.clone(),
                requires_grad: true,
                grad: None,
            };
            leaf.requires_grad = true;
            ids.insert(p.name.clone(), tape.leaf(leaf));
        }
        BoundParams { ids }
    }

    /// Copy the tape gradients of a bound pass back into the parameters,
    /// accumulating additively.
    pub fn absorb_grads(&mut self, tape: &Tape, bound: &BoundParams) {
        for p in &mut self.params {
            let id = bound.ids[&p.name];
            if let Some(g) = tape.grad(id) {
                p.tensor.accumulate_grad(g);
            }
        }
    }

    /// Concatenation of all parameter values in insertion order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.params {
            out.extend_from_slice(p.tensor.data());
        }
        out
    }

    /// Inverse of [`flatten`]: overwrite all parameter values from a flat
    /// vector. Optimizer state is untouched.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.params.iter().map(|p| p.tensor.numel()).sum();
        if flat.len() != total {
            return Err(Error::contract(format!(
                "flat vector length {} does not match parameter count {}",
                flat.len(),
                total
            )));
        }
        let mut offset = 0;
        for p in &mut self.params {
            let n = p.tensor.numel();
            p.tensor.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Concatenation of all parameter gradients in insertion order.
    /// Errors if any parameter has no gradient.
    pub fn flat_grads(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for p in &self.params {
            match &p.tensor.grad {
                Some(g) => out.extend_from_slice(g),
                None => {
                    return Err(Error::contract(format!(
                        "parameter `{}` has no gradient",
                        p.name
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// Name → tape id map for one bound forward pass.
#[derive(Debug, Clone)]
pub struct BoundParams {
    ids: BTreeMap<String, TensorId>,
}

impl BoundParams {
    pub fn id(&self, name: &str) -> TensorId {
        *self
            .ids
            .get(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not bound on this tape"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_mismatch_rejected() {
        assert!(Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn paramset_rejects_duplicate_names() {
        let mut ps = ParamSet::new();
        ps.insert(Parameter::new("w", Tensor::zeros(vec![2]))).unwrap();
        assert!(ps.insert(Parameter::new("w", Tensor::zeros(vec![2]))).is_err());
    }

    #[test]
    fn flatten_load_flat_round_trip() {
        let mut ps = ParamSet::new();
        ps.insert(Parameter::new(
            "a",
            Tensor::new(vec![2], vec![1.0, 2.0]).unwrap(),
        ))
        .unwrap();
        ps.insert(Parameter::new(
            "b",
            Tensor::new(vec![1], vec![3.0]).unwrap(),
        ))
        .unwrap();
        let flat = ps.flatten();
        assert_eq!(flat, vec![1.0, 2.0, 3.0]);
        ps.load_flat(&[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(ps.get("a").unwrap().tensor.data(), &[4.0, 5.0]);
        assert_eq!(ps.get("b").unwrap().tensor.data(), &[6.0]);
        assert!(ps.load_flat(&[1.0]).is_err());
    }
}
