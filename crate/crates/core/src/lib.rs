//! Simulation and decoding toolkit for 2D and 3D toric codes.
//!
//! The crate builds toric codes from repetition codes, samples depolarizing
//! noise, and decodes syndromes either with exact maximum-likelihood oracles
//! or with a periodic 3D convolutional network whose pooling head respects
//! the way logical classes move under lattice translations.

pub mod code;
pub mod container;
pub mod decoders;
pub mod equivariance;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod nn;
pub mod noise;

pub use error::{Error, Result};
