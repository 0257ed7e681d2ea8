//! Device surrogates: a Poisson emulator (node regression of potential)
//! and an IV predictor (graph regression of signed-log drain current),
//! trained against the reference solver.

mod builders;
mod bundle;
mod speedup;
mod training;

pub use builders::{
    build_iv_predictor, build_poisson_emulator, EmulatorWidths, PredictorWidths,
};
pub use bundle::{EvalReport, SplitTag, SurrogateBundle};
pub use speedup::{surrogate_speedup_report, SpeedupReport};
pub use training::{evaluate_unseen, graph_to_nn, train_surrogate, SplitRatios, SurrogateTrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("contamination: {0}")]
    Contamination(String),

    #[error(transparent)]
    Gnn(#[from] gnn_core::GnnError),

    #[error(transparent)]
    Tcad(#[from] tcad_reference::TcadError),

    #[error(transparent)]
    Encoding(#[from] device_encoding::EncodingError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SurrogateError>;
