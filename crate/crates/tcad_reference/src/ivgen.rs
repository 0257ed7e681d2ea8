//! Quasi-static terminal current from Poisson solutions: vertical
//! integration of the channel electron sheet charge, drifted across the
//! channel potential drop (gradual-channel approximation).

use std::collections::BTreeMap;

use compact_model::{BiasPoint, DeviceGeometry, IVDataset, Technology};
use device_encoding::{MaterialTable, RandomDevice, Region};
use serde::{Deserialize, Serialize};
use stco_common::{Q_ELEMENTARY, UM_TO_CM};

use crate::poisson::{quasi_fermi_field, solve_poisson, PoissonSolution, SolverConfig};
use crate::{Result, TcadError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IvGenConfig {
    /// Drift mobility used to scale the sheet-charge integral (cm^2/V/s).
    pub mu_ref: f64,
    pub solver: SolverConfig,
}

impl Default for IvGenConfig {
    fn default() -> Self {
        Self {
            mu_ref: 50.0,
            solver: SolverConfig::default(),
        }
    }
}

/// Drain current for one solved bias point.
///
/// I_D = (W/L) * mu_ref * integral Q_ch dV, with Q_ch the electron sheet
/// charge per channel column and V the quasi-Fermi ramp across the channel.
pub fn terminal_current_from_solution(
    device: &RandomDevice,
    solution: &PoissonSolution,
    contacts: &BTreeMap<Region, f64>,
    geometry: &DeviceGeometry,
    mu_ref: f64,
) -> f64 {
    let mesh = &device.mesh;
    let phi = quasi_fermi_field(mesh, contacts);

    // group channel nodes by x column (structured grids give exact matches)
    let mut columns: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, region) in mesh.region_of_node.iter().enumerate() {
        if *region == Region::Channel {
            columns.entry(mesh.nodes[i].0.to_bits()).or_default().push(i);
        }
    }
    if columns.len() < 2 {
        return 0.0;
    }

    let mut profile: Vec<(f64, f64)> = Vec::with_capacity(columns.len()); // (V, Q)
    for nodes in columns.values() {
        let mut ys: Vec<(f64, usize)> = nodes.iter().map(|&i| (mesh.nodes[i].1, i)).collect();
        ys.sort_by(|a, b| a.0.total_cmp(&b.0));
        // trapezoid weights over the vertical extent (um -> cm)
        let mut sheet = 0.0;
        for (k, &(y, i)) in ys.iter().enumerate() {
            let lo = if k == 0 { y } else { ys[k - 1].0 };
            let hi = if k + 1 == ys.len() { y } else { ys[k + 1].0 };
            let w = 0.5 * (hi - lo) * UM_TO_CM;
            sheet += solution.electron_density[i] * w;
        }
        let v = phi[ys[0].1];
        profile.push((v, Q_ELEMENTARY * sheet));
    }

    let mut integral = 0.0;
    for pair in profile.windows(2) {
        let (v0, q0) = pair[0];
        let (v1, q1) = pair[1];
        integral += 0.5 * (q0 + q1) * (v1 - v0);
    }
    geometry.aspect() * mu_ref * integral
}

/// Sweep a bias grid: one Poisson solve per point, drifted into a current.
/// Solver failures carry the offending bias.
pub fn reference_iv(
    device: &RandomDevice,
    materials: &MaterialTable,
    v_gs_grid: &[f64],
    v_ds_grid: &[f64],
    geometry: &DeviceGeometry,
    config: &IvGenConfig,
) -> Result<IVDataset> {
    if v_gs_grid.is_empty() || v_ds_grid.is_empty() {
        return Err(TcadError::InvalidArgument("bias grids must be nonempty".into()));
    }
    let mut points = Vec::with_capacity(v_gs_grid.len() * v_ds_grid.len());
    for &v_gs in v_gs_grid {
        for &v_ds in v_ds_grid {
            let contacts: BTreeMap<Region, f64> = [
                (Region::Source, 0.0),
                (Region::Drain, v_ds),
                (Region::GateContact, v_gs),
            ]
            .into_iter()
            .collect();
            let solution = solve_poisson(
                &device.mesh,
                materials,
                &device.doping_cm3,
                &contacts,
                &config.solver,
            )
            .map_err(|e| TcadError::BiasPoint {
                v_gs,
                v_ds,
                source: Box::new(e),
            })?;
            let i_d =
                terminal_current_from_solution(device, &solution, &contacts, geometry, config.mu_ref);
            points.push((BiasPoint::new(v_gs, v_ds), i_d));
        }
    }
    Ok(IVDataset {
        geometry: *geometry,
        technology: Technology::Other,
        points,
    })
}
