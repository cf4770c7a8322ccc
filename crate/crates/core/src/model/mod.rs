//! The dual-branch positioning network.

mod config;
mod net;

pub use config::{NetConfig, OUTPUT_WIDTH};
pub use net::{assemble_batch, forward, layers, phase_features, InitMethod, Layer, LayerKind, PositioningNet};
