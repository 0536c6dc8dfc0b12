//! Dense tensors, a reverse-mode autodiff tape and the Adam optimizer.

mod adam;
mod graph;
mod params;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, Var, LN_EPS};
pub use params::{ParamSet, CHECKPOINT_HEADER};
pub use tensor::Tensor;
