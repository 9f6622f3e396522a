//! Multimode-fibre mode decomposition: LP mode bases, field synthesis,
//! label encoding, holographic and intensity-only decomposition, dataset
//! containers and transmission-matrix simulation.
//!
//! Everything above the mode solver is generic over the sample type
//! ([`Real`], `f32` or `f64`); the aliases below fix the common choices.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fiber;
pub mod harness;
pub mod holography;
pub mod intensity_md;
pub mod field;
pub mod labels;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModeBasis64 = fiber::ModeBasis<f64>;
pub type ModeBasis32 = fiber::ModeBasis<f32>;
pub type ComplexField64 = field::ComplexField<f64>;
pub type ComplexField32 = field::ComplexField<f32>;
pub type IntensityImage64 = field::IntensityImage<f64>;
pub type IntensityImage32 = field::IntensityImage<f32>;
pub type ModeWeights64 = labels::ModeWeights<f64>;
pub type ModeWeights32 = labels::ModeWeights<f32>;
