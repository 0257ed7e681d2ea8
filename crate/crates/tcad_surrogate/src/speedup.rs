//! Wall-clock comparison of reference solves against surrogate inference.

use std::time::Instant;

use device_encoding::{
    mesh_to_graph, normalize_graph, random_device, DeviceSpec, MaterialTable, SelfConsistent,
};
use gnn_core::PreparedGraph;
use serde::{Deserialize, Serialize};
use tcad_reference::{solve_poisson, SolverConfig};

use crate::bundle::SurrogateBundle;
use crate::{Result, SurrogateError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub n_devices: usize,
    pub mean_solve_s: f64,
    pub mean_inference_s: f64,
    pub speedup: f64,
    /// (solve seconds, inference seconds) per device.
    pub per_device_s: Vec<(f64, f64)>,
    pub machine: String,
}

/// Solve each device with the reference solver and run the surrogate on
/// the same encoded graphs, timing both. Graph encoding is shared by both
/// pipelines and stays outside the timed regions.
pub fn surrogate_speedup_report(
    bundle: &SurrogateBundle,
    device_spec: &DeviceSpec,
    n_devices: usize,
    seed: u64,
    solver: &SolverConfig,
) -> Result<SpeedupReport> {
    if n_devices < 20 {
        return Err(SurrogateError::InvalidArgument(format!(
            "need at least 20 devices for a timing comparison, got {n_devices}"
        )));
    }
    let materials = MaterialTable::tft_defaults();
    let mut per_device = Vec::with_capacity(n_devices);
    for k in 0..n_devices {
        let device = random_device(device_spec, seed + k as u64)?;

        let t0 = Instant::now();
        let solution = solve_poisson(
            &device.mesh,
            &materials,
            &device.doping_cm3,
            &device.contacts,
            solver,
        )?;
        let solve_s = t0.elapsed().as_secs_f64();

        let self_consistent = SelfConsistent {
            charge_cm3: Some(solution.net_charge_cm3()),
            potential_v: Some(solution.potential.clone()),
        };
        let mut graph = mesh_to_graph(
            &device.mesh,
            &materials,
            &device.contacts,
            &device.doping_cm3,
            bundle.task,
            &self_consistent,
        )?;
        graph.target = None;
        let normalized = normalize_graph(&bundle.norm_stats, &graph);
        let nn = graph_to_nn_untargeted(&normalized)?;

        let t1 = Instant::now();
        let _ = bundle.checkpoint.model.predict(&nn)?;
        let infer_s = t1.elapsed().as_secs_f64();
        per_device.push((solve_s, infer_s));
    }
    let mean_solve = per_device.iter().map(|p| p.0).sum::<f64>() / n_devices as f64;
    let mean_infer = per_device.iter().map(|p| p.1).sum::<f64>() / n_devices as f64;
    Ok(SpeedupReport {
        n_devices,
        mean_solve_s: mean_solve,
        mean_inference_s: mean_infer,
        speedup: mean_solve / mean_infer,
        per_device_s: per_device,
        machine: format!(
            "{} cpus, {}",
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            std::env::consts::OS
        ),
    })
}

fn graph_to_nn_untargeted(g: &device_encoding::DeviceGraph) -> Result<PreparedGraph> {
    use gnn_core::{GraphData, Matrix, Target};
    let node_features = Matrix::from_vec(g.num_nodes, g.feature_width, g.node_features.clone())?;
    let edge_features = Matrix::from_vec(g.edges.len(), 3, g.edge_features.clone())?;
    let data = GraphData {
        node_features,
        edges: g.edges.clone(),
        edge_features,
        target: Target::Graph(0.0),
    };
    Ok(PreparedGraph::new(&data)?)
}
