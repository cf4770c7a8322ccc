//! Minimal reverse-mode automatic differentiation: exactly the layers the
//! positioning network uses, generic over `f32` (training) and `f64`
//! (gradient checking).

mod checkpoint;
mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{checkpoint_id, decode_checkpoint, encode_checkpoint, DecodedCheckpoint};
pub use gradcheck::{grad_check, relative_error, GRAD_CHECK_FLOOR};
pub use optim::{Optimizer, OptimizerKind, Parameter};
pub use tape::{ConvGeom, Gradients, Padding, Tape, Var};
pub use tensor::{Scalar, Tensor};
