//! Path-based knowledge-graph reasoning with priority-pruned Bellman-Ford propagation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the precision used by the command-line tool and the tests.

pub mod algebra;
pub mod batching;
pub mod error;
pub mod explain;
pub mod kg;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod priority;
pub mod propagation;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type MinPlus64 = algebra::MinPlus<f64>;
pub type Counting64 = algebra::Counting<u64>;
pub type NeuralAlgebra64 = algebra::NeuralAlgebra<f64>;
pub type NeuralAlgebra32 = algebra::NeuralAlgebra<f32>;
pub type Matrix64 = nn::Matrix<f64>;
pub type Matrix32 = nn::Matrix<f32>;
pub type Tape64<'s> = nn::Tape<'s, f64>;
pub type Tape32<'s> = nn::Tape<'s, f32>;
pub type ParameterStore64 = nn::ParameterStore<f64>;
pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
