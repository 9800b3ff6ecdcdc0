//! Dense tensors, a reverse-mode gradient tape and the Adam optimizer.

pub mod adam;
pub mod gradcheck;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
