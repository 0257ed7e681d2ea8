//! Unified compact model for thin-film transistors (CNT / IGZO / LTPS).
//!
//! The model combines a power-law mobility enhancement with charge-drift
//! integration of the gate-induced sheet charge, giving a closed-form drain
//! current that is smooth across subthreshold and saturation. Parameter
//! extraction fits (mu0, gamma, v_th) to measured or synthesized I-V data
//! in log-current space.

mod error;
mod extract;
mod io;
mod model;
mod params;

pub use error::CompactModelError;
pub use extract::{extract_parameters, ExtractOptions, FitReport};
pub use io::{read_iv_csv, write_iv_csv, ExtractionReport};
pub use model::{
    drain_current, drain_current_with_derivatives, effective_overdrive, effective_vds,
    iv_surface, mobility, overdrive_for_effective,
};
pub use params::{BiasPoint, CompactModelParams, DeviceGeometry, IVDataset, Polarity, Technology};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CompactModelError>;
