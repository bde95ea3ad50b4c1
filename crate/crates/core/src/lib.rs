//! A variational recurrent auto-encoder for binary sequence data, built from
//! scratch on f64 arithmetic: recurrent encoder to a diagonal-Gaussian
//! latent, recurrent decoder with Bernoulli outputs, hand-derived
//! backpropagation through time, Adam training, and a MIDI piano-roll data
//! pipeline with latent-space tooling.

pub mod data;
pub mod error;
pub mod latentops;
pub mod model;
pub mod numerics;
pub mod optimizer;
pub mod trainer;

pub use error::{Error, Result};
