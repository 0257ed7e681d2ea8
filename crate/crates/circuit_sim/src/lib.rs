//! Transistor-level circuit simulator: netlist parsing, modified nodal
//! analysis, DC operating point with gmin stepping, and fixed-step
//! backward-Euler transient analysis with the unified TFT compact model.

mod dc;
mod dense;
mod flatten;
mod netlist;
mod parser;
mod transient;
mod waveform;

pub use dc::{dc_operating_point, DcSolution};
pub use flatten::{flatten, FlatCircuit, FlatDevice};
pub use netlist::{print_netlist, Element, ModelCard, Netlist, SourceKind, Subckt};
pub use parser::parse_netlist;
pub use transient::{transient, TransientConfig};
pub use waveform::{measure_cross, CrossDirection, Waveform};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("netlist error: {0}")]
    Netlist(String),

    #[error("floating node `{0}` has no DC path to ground")]
    FloatingNode(String),

    #[error("dc did not converge (residual {residual:.3e} A after {iterations} iterations)")]
    DcConvergence { residual: f64, iterations: usize },

    #[error("transient newton failure at t={time:.3e}s: {message}")]
    Transient { time: f64, message: String },

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Model(#[from] compact_model::CompactModelError),
}

pub type Result<T> = std::result::Result<T, SimError>;
