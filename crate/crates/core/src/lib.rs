//! SHA-KG: a knowledge-graph agent for text games with stacked hierarchical
//! attention, a template/object action decoder, and A2C training, together
//! with the small autodiff engine and toy game it runs on.

pub mod agent;
pub mod autodiff;
pub mod decoder;
pub mod encoders;
pub mod env;
pub mod error;
pub mod kg;
pub mod model;
pub mod sha;
pub mod trace;
pub mod trainer;

pub use error::{Error, Result};
