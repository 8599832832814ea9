//! Reverse-mode automatic differentiation, gradient reversal and Adam.

mod adam;
mod init;
mod params;
mod tape;

pub use adam::AdamState;
pub use init::glorot_uniform;
pub use params::{Gradients, ParamId, ParamKind, ParamStore, ParamTensor};
pub use tape::{elu, sigmoid, Matrix, NodeId, Tape};
