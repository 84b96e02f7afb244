//! Object-adaptive scan-angle selection for sparse-angle 2D parallel-beam CT.
//!
//! The library simulates a tomographic measurement process over synthetic
//! binary phantoms, reconstructs with box-constrained SIRT, and trains an
//! actor-critic policy that picks the next scan angle from the current
//! reconstruction. Evaluation compares the learned policy against an
//! equidistant baseline on held-out rotations.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod env;
pub mod error;
pub mod eval;
pub mod image;
pub mod nn;
pub mod phantoms;
pub mod plot;
pub mod projector;
pub mod recon;
pub mod rngutil;
pub mod trainer;

pub use error::Error;
pub use image::Image;
