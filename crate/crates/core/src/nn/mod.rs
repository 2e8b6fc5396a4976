//! Reverse-mode differentiation, parameters, loss and optimizer.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod loss;
mod matrix;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, Objective};
pub use loss::{bce_loss, BceOutput, LossReport, CLAMP};
pub use matrix::Matrix;
pub use params::{Gradients, ParamId, Parameter, ParameterStore};
pub use tape::{Tape, Var};

pub(crate) use tape::sigmoid;
