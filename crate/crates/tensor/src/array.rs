//! Dense row-major 2-D arrays of `f64`.
//!
//! Every array is a matrix; scalars are `1×1` and row vectors are `1×n`.
//! Values are always finite: constructors reject NaN and infinities.

use serde::{Deserialize, Serialize};

use crate::TensorError;

/// A dense matrix with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Array {
    shape: [usize; 2],
    data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grad: Option<Vec<f64>>,
}

impl Array {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::EmptyShape { op: "new", shape: [rows, cols] });
        }
        if rows * cols != data.len() {
            return Err(TensorError::DataLength { shape: [rows, cols], len: data.len() });
        }
        check_finite("new", &data)?;
        Ok(Self { shape: [rows, cols], data, grad: None })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized array {rows}x{cols}");
        Self { shape: [rows, cols], data: vec![0.0; rows * cols], grad: None }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(value.is_finite(), "non-finite fill value");
        let mut out = Self::zeros(rows, cols);
        out.data.iter_mut().for_each(|x| *x = value);
        out
    }

    pub fn scalar(value: f64) -> Result<Self, TensorError> {
        Self::new(1, 1, vec![value])
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    /// Builds an array from nested rows. All rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, TensorError> {
        let n = rows.len();
        let m = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            let r = r.as_ref();
            if r.len() != m {
                return Err(TensorError::DataLength { shape: [n, m], len: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(n, m, data)
    }

    /// Marks the array as trainable, allocating a zeroed gradient buffer.
    pub fn requires_grad(mut self) -> Self {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        if on {
            if self.grad.is_none() {
                self.grad = Some(vec![0.0; self.data.len()]);
            }
        } else {
            self.grad = None;
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.grad.is_some()
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape[1] + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[row * c..(row + 1) * c]
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Replaces the values in place, keeping shape and gradient buffer.
    pub fn assign(&mut self, data: &[f64]) -> Result<(), TensorError> {
        if data.len() != self.data.len() {
            return Err(TensorError::DataLength { shape: self.shape, len: data.len() });
        }
        check_finite("assign", data)?;
        self.data.copy_from_slice(data);
        Ok(())
    }

    /// Adds `delta` into the gradient buffer.
    pub fn accumulate_grad(&mut self, delta: &[f64]) -> Result<(), TensorError> {
        let shape = self.shape;
        let g = self.grad.as_mut().ok_or(TensorError::MissingGrad)?;
        if g.len() != delta.len() {
            return Err(TensorError::DataLength { shape, len: delta.len() });
        }
        for (a, b) in g.iter_mut().zip(delta) {
            *a += b;
        }
        Ok(())
    }

    /// Mutable access to the values for optimizers and finite-difference probes.
    /// Callers must keep the values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn from_parts(shape: [usize; 2], data: Vec<f64>) -> Self {
        Self { shape, data, grad: None }
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|r| self.row(r).to_vec()).collect()
    }
}

pub(crate) fn check_finite(op: &'static str, data: &[f64]) -> Result<(), TensorError> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(TensorError::NonFinite { op, index }),
        None => Ok(()),
    }
}
