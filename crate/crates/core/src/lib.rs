//! Learned receive-antenna placement for MIMO radar imaging.
//!
//! The pipeline is `cube -> subsample -> beamform -> task model`, and every
//! stage is differentiable with respect to the antenna design so the design
//! and the reconstruction network can be trained jointly.

pub mod autodiff;
pub mod beamform;
mod codec;
pub mod config;
pub mod error;
pub mod fsio;
pub mod pipeline;
pub mod radar;
pub mod rng;
pub mod subsample;
pub mod taskmodel;
pub mod train;

pub use error::{Error, Result};
