//! Dataset generation: random devices, reference solves, encoded graphs
//! with attached targets, and a reproducible manifest.

use compact_model::DeviceGeometry;
use device_encoding::{
    mesh_to_graph, random_device, DeviceGraph, DeviceSpec, DeviceTarget, FeatureLayout,
    MaterialTable, SelfConsistent, Task,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stco_common::{content_hash, signed_log10_scaled};

use crate::ivgen::terminal_current_from_solution;
use crate::poisson::{solve_poisson, SolverConfig};
use crate::{Result, TcadError};

/// Reference current unit for signed-log current targets (1 pA).
pub const CURRENT_LOG_UNIT_A: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub solver: SolverConfig,
    /// Drift mobility for terminal currents (cm^2/V/s).
    pub mu_ref: f64,
    /// W/L aspect applied to terminal currents.
    pub width_um: f64,
    pub length_um: f64,
    /// Abort if more than this fraction of solves fails.
    pub max_skip_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            mu_ref: 50.0,
            width_um: 10.0,
            length_um: 2.0,
            max_skip_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TcadManifest {
    pub format: String,
    pub seed: u64,
    pub n_requested: usize,
    pub n_generated: usize,
    pub task: Task,
    pub device_spec: DeviceSpec,
    pub config: DatasetConfig,
    pub skipped: Vec<SkipRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipRecord {
    pub device_seed: u64,
    pub reason: String,
}

impl TcadManifest {
    pub fn hash(&self) -> String {
        content_hash(self)
    }

    /// Seed range used by the generator, for contamination checks.
    pub fn seed_range(&self) -> (u64, u64) {
        (self.seed, self.seed + self.n_requested as u64)
    }
}

#[derive(Debug, Clone)]
pub struct TcadDataset {
    pub layout: FeatureLayout,
    pub graphs: Vec<DeviceGraph>,
    pub manifest: TcadManifest,
}

/// Generate `n_devices` solved and encoded devices.
///
/// Device k draws from seed `seed + k`; failed solves are skipped and
/// recorded. Poisson-task graphs carry charge density as a feature and
/// per-node potential as the target; IV-task graphs carry charge and
/// potential as features and the signed-log drain current as the target.
pub fn generate_tcad_dataset(
    n_devices: usize,
    spec: &DeviceSpec,
    task: Task,
    seed: u64,
    config: &DatasetConfig,
) -> Result<TcadDataset> {
    if n_devices == 0 {
        return Err(TcadError::InvalidArgument("n_devices must be >= 1".into()));
    }
    let materials = MaterialTable::tft_defaults();
    let geometry = DeviceGeometry::new(config.width_um, config.length_um, 1.0e-8)
        .map_err(|e| TcadError::InvalidArgument(e.to_string()))?;

    let results: Vec<std::result::Result<DeviceGraph, SkipRecord>> = (0..n_devices)
        .into_par_iter()
        .map(|k| {
            let device_seed = seed + k as u64;
            let build = || -> Result<DeviceGraph> {
                let device = random_device(spec, device_seed)?;
                let solution = solve_poisson(
                    &device.mesh,
                    &materials,
                    &device.doping_cm3,
                    &device.contacts,
                    &config.solver,
                )?;
                let self_consistent = SelfConsistent {
                    charge_cm3: Some(solution.net_charge_cm3()),
                    potential_v: if task == Task::Iv {
                        Some(solution.potential.clone())
                    } else {
                        None
                    },
                };
                let mut graph = mesh_to_graph(
                    &device.mesh,
                    &materials,
                    &device.contacts,
                    &device.doping_cm3,
                    task,
                    &self_consistent,
                )?;
                graph.target = Some(match task {
                    Task::Poisson => DeviceTarget::NodePotential(solution.potential.clone()),
                    Task::Iv => {
                        let i_d = terminal_current_from_solution(
                            &device,
                            &solution,
                            &device.contacts,
                            &geometry,
                            config.mu_ref,
                        );
                        DeviceTarget::TerminalCurrent(signed_log10_scaled(
                            i_d,
                            CURRENT_LOG_UNIT_A,
                        ))
                    }
                });
                Ok(graph)
            };
            build().map_err(|e| SkipRecord {
                device_seed,
                reason: e.to_string(),
            })
        })
        .collect();

    let mut graphs = Vec::with_capacity(n_devices);
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(g) => graphs.push(g),
            Err(s) => skipped.push(s),
        }
    }
    let skip_fraction = skipped.len() as f64 / n_devices as f64;
    if skip_fraction > config.max_skip_fraction {
        return Err(TcadError::DatasetQuality(format!(
            "{} of {} solves failed ({:.1}%), first: {}",
            skipped.len(),
            n_devices,
            100.0 * skip_fraction,
            skipped
                .first()
                .map(|s| s.reason.as_str())
                .unwrap_or("unknown")
        )));
    }

    let manifest = TcadManifest {
        format: "stcoforge-tcad-dataset-v1".to_string(),
        seed,
        n_requested: n_devices,
        n_generated: graphs.len(),
        task,
        device_spec: spec.clone(),
        config: config.clone(),
        skipped,
    };
    Ok(TcadDataset {
        layout: FeatureLayout::new(task, materials.len()),
        graphs,
        manifest,
    })
}
