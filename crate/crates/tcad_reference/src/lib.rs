//! Reference device solver: nonlinear Poisson on triangulated meshes with
//! Boltzmann carrier statistics, plus a quasi-static terminal-current
//! generator. Stands in for commercial TCAD as the ground-truth source
//! for surrogate training.

mod assemble;
mod banded;
mod dataset;
pub mod fixtures;
mod ivgen;
mod poisson;

pub use dataset::{generate_tcad_dataset, DatasetConfig, TcadDataset, TcadManifest};
pub use ivgen::{reference_iv, terminal_current_from_solution, IvGenConfig};
pub use poisson::{
    charge_density, gauss_law_residual, solve_poisson, PoissonSolution, SolverConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TcadError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("newton did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("solver failed at bias (v_gs={v_gs}, v_ds={v_ds}): {source}")]
    BiasPoint {
        v_gs: f64,
        v_ds: f64,
        #[source]
        source: Box<TcadError>,
    },

    #[error("dataset quality: {0}")]
    DatasetQuality(String),

    #[error("encoding error: {0}")]
    Encoding(#[from] device_encoding::EncodingError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TcadError>;
