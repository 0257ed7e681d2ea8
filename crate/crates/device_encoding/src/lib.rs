//! Unified graph encoding of meshed planar devices.
//!
//! Node features concatenate material-level embedding (one-hot + property
//! vector), device-level embedding (region one-hot + position/doping/bias
//! attributes), and task-specific self-consistent quantities (charge
//! density; for terminal-current prediction also potential). Edge features
//! carry relative node positions.

mod encode;
mod generator;
mod io;
mod mesh;
mod normalize;

pub use encode::{
    mesh_to_graph, DeviceGraph, DeviceTarget, FeatureLayout, SelfConsistent, Task,
};
pub use generator::{random_device, DeviceSpec, RandomDevice};
pub use io::{read_jsonl_dataset, write_jsonl_dataset};
pub use mesh::{Material, MaterialTable, Mesh, Region, REGION_COUNT};
pub use normalize::{denormalize_value, normalize_dataset, normalize_graph, ChannelStat, NormStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EncodingError>;
