//! Dense matrices, a differentiation tape, Adam and spectral norms.

mod adam;
mod matrix;
mod sparse;
mod spectral;
mod tape;

pub use adam::{adam_step, AdamState};
pub use matrix::{dot, l2_distance, l2_norm, Matrix};
pub use sparse::{CsrMatrix, SparseOperator};
pub use spectral::{spectral_norm, DEFAULT_ITERS, DEFAULT_TOL};
pub use tape::{sigmoid, Gradients, Primitive, Tape, Var, LOG_FLOOR};
