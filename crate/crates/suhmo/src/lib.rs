//! Unconditional head motion generation over 2-D facial landmarks.
//!
//! A paired autoregressive velocity GAN: the generator emits per-step
//! landmark displacements for two samples at once, discriminators score
//! randomly sampled temporal windows at several scales, and evaluation uses
//! Fréchet distances over frozen random features plus motion-map renderings.

pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Result, SuhmoError};
