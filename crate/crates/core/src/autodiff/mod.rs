//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is a tape: every primitive appends a node holding its value and
//! operand handles, so node order is already a topological order and
//! [`Graph::backward`] is a single reverse sweep.

mod adam;
mod gradcheck;
mod graph;
mod matrix;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{row_softmax, Graph, NodeGrads, Primitive, Var};
pub use matrix::Matrix;
pub use params::{GradStore, ParamId, ParameterStore};
