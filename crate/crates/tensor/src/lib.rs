//! Minimal dense-array engine: 2-D `f64` arrays, a recording tape with
//! reverse-mode gradients, and an Adam optimizer.
//!
//! ```
//! use stancemt_tensor::{Array, Tape};
//!
//! let w = Array::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap().requires_grad();
//! let mut tape = Tape::new();
//! let x = tape.leaf(&w);
//! let sq = tape.hadamard(x, x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0, 6.0, 8.0]);
//! ```

mod adam;
mod array;
mod tape;

pub use adam::Adam;
pub use array::Array;
pub use tape::{Axis, Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape { op: &'static str, left: [usize; 2], right: [usize; 2] },
    #[error("{op}: empty shape {shape:?}")]
    EmptyShape { op: &'static str, shape: [usize; 2] },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: [usize; 2], len: usize },
    #[error("{op}: non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },
    #[error("target class {target} out of range for {classes} classes")]
    Target { target: usize, classes: usize },
    #[error("backward needs a 1x1 loss, got {shape:?}")]
    NonScalarLoss { shape: [usize; 2] },
    #[error("parameter has no gradient buffer")]
    MissingGrad,
    #[error("optimizer state does not match the parameter list")]
    OptimizerLayout,
}
