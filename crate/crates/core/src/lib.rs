//! Desk-scale laboratory for CSI-fingerprint indoor positioning with
//! Massive-MIMO OFDM channels.
//!
//! The crate is organized bottom-up:
//!
//! * [`sim`] synthesizes channel snapshots from a geometric LoS + single-bounce
//!   scatterer model, with noise, pedestrian blockage and day-to-day drift.
//! * [`dataset`] holds labeled snapshots, the `CSID` binary format and the
//!   dataset transformations (guard bands, grid thinning, subcarrier masks).
//! * [`autodiff`] is a small reverse-mode engine with exactly the layers the
//!   positioning network needs.
//! * [`model`] assembles the dual-branch (convolutional + phase) network.
//! * [`train`] runs the batch-size/learning-rate staircase with early stopping,
//!   finetuning and the pre-training protocols.
//! * [`eval`] computes MDE / MDA / DE CDFs and runs the experiment sweeps.
//! * [`experiment`] binds everything to config files and run directories.

pub mod autodiff;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
