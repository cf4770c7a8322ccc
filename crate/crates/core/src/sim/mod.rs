//! Geometric multipath channel simulator: LoS plus single-bounce scatterers,
//! exact per-antenna delays, free-space leg amplitudes.

pub mod array;
pub mod channel;
pub mod drift;
pub mod environment;
pub mod geometry;
pub mod grid;
pub mod noise;
pub mod preset;

pub use array::{ArrayGeometry, OfdmConfig, SPEED_OF_LIGHT};
pub use channel::{apply_disturbance, select_antennas, synth_csi, ChannelSnapshot, SnapshotMeta};
pub use drift::{apply_day_drift, DriftParams, DriftStrength};
pub use environment::{Environment, Pedestrian, Scatterer};
pub use geometry::{Rect, Vec3};
pub use grid::{grid_sample, grid_sample_xy, GridPoint};
pub use noise::add_awgn;
pub use preset::{DisturbanceModel, GridSpec, Preset};
