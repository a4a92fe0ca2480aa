//! Synthetic per-airport hourly delay time series.
//!
//! The pipeline turns historical flight records into per-airport matrices of
//! hourly average delays (`ingest`), generates synthetic daily delay vectors
//! by decile-conditioned sequential sampling (`sampler`), assembles and
//! iteratively refines whole synthetic data sets against a from-scratch 1D
//! residual convolutional classifier (`discriminator`, `refinery`), and
//! validates the result with discriminative scoring, correlation scoring,
//! PCA projection (`evaluation`) and Granger-causality propagation tests
//! (`propagation`). The `synthdelay` binary ties the stages together and
//! writes the published tensor format (`commands`).
//!
//! Everything is deterministic: all randomness flows from explicitly seeded
//! ChaCha streams (`rng`), and sub-streams are derived, never shared.

pub mod commands;
pub mod config;
pub mod discriminator;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod linalg;
pub mod matrix;
pub mod npy;
pub mod propagation;
pub mod refinery;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod toy;

pub use error::{Error, Result};
pub use matrix::{DelayMatrix, Kind, Region, RegionName, Unit, HOURS};
