//! Mesh-to-graph encoding with a fixed, documented feature layout.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use stco_common::signed_log10;

use crate::mesh::{Mesh, MaterialTable, Region, REGION_COUNT};
use crate::{EncodingError, Result};

/// Prediction task the encoding is built for. Both tasks carry charge
/// density as a self-consistent feature; terminal-current graphs also
/// carry the solved potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Poisson,
    Iv,
}

/// Per-node self-consistent quantities from a reference solve.
#[derive(Debug, Clone, Default)]
pub struct SelfConsistent {
    /// Net charge number density per node, cm^-3 (signed).
    pub charge_cm3: Option<Vec<f64>>,
    /// Electrostatic potential per node, V.
    pub potential_v: Option<Vec<f64>>,
}

/// Regression target attached to an encoded graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DeviceTarget {
    /// Per-node potential (V).
    NodePotential(Vec<f64>),
    /// Terminal drain current, signed-log scaled.
    TerminalCurrent(f64),
}

/// Column-by-column description of the node feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub task: Task,
    pub num_materials: usize,
    pub column_names: Vec<String>,
    /// One-hot columns are excluded from normalization.
    pub one_hot: Vec<bool>,
}

impl FeatureLayout {
    pub fn new(task: Task, num_materials: usize) -> Self {
        let mut names = Vec::new();
        let mut one_hot = Vec::new();
        for m in 0..num_materials {
            names.push(format!("material_onehot_{m}"));
            one_hot.push(true);
        }
        for prop in [
            "mat_rel_permittivity",
            "mat_band_gap_ev",
            "mat_dos_log10",
            "mat_srh_log10",
            "mat_tunneling_mass",
        ] {
            names.push(prop.to_string());
            one_hot.push(false);
        }
        for r in Region::all() {
            names.push(format!("region_onehot_{}", r.index()));
            one_hot.push(true);
        }
        for attr in ["x_um", "y_um", "doping_slog10", "contact_bias_v"] {
            names.push(attr.to_string());
            one_hot.push(false);
        }
        names.push("charge_slog10".to_string());
        one_hot.push(false);
        if task == Task::Iv {
            names.push("potential_v".to_string());
            one_hot.push(false);
        }
        Self {
            task,
            num_materials,
            column_names: names,
            one_hot,
        }
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Encoded device graph. Node features are row-major `num_nodes x width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceGraph {
    pub task: Task,
    pub num_nodes: usize,
    pub feature_width: usize,
    pub node_features: Vec<f64>,
    /// Directed edges (src, dst); both directions of every adjacency.
    pub edges: Vec<(u32, u32)>,
    /// Per edge: (dx, dy, distance) in um.
    pub edge_features: Vec<f64>,
    pub target: Option<DeviceTarget>,
}

impl DeviceGraph {
    pub fn feature(&self, node: usize, col: usize) -> f64 {
        self.node_features[node * self.feature_width + col]
    }
}

/// Encode a mesh into the unified device graph.
///
/// One graph node per mesh node; one directed edge per ordered pair of
/// distinct nodes sharing an element. `contacts` maps contact regions to
/// their applied bias; nodes outside contact regions carry bias 0.
pub fn mesh_to_graph(
    mesh: &Mesh,
    materials: &MaterialTable,
    contacts: &BTreeMap<Region, f64>,
    doping_cm3: &[f64],
    task: Task,
    self_consistent: &SelfConsistent,
) -> Result<DeviceGraph> {
    mesh.validate()?;
    materials.validate()?;
    let n = mesh.num_nodes();
    if doping_cm3.len() != n {
        return Err(EncodingError::Encoding(format!(
            "doping has {} entries for {n} nodes",
            doping_cm3.len()
        )));
    }
    for region in contacts.keys() {
        if !mesh.material_of_region.contains_key(region) {
            return Err(EncodingError::Encoding(format!(
                "contact region {region:?} not present in mesh"
            )));
        }
    }
    let charge = match task {
        Task::Poisson | Task::Iv => {
            self_consistent.charge_cm3.as_ref().ok_or_else(|| {
                EncodingError::Encoding("task requires charge density feature".into())
            })?
        }
    };
    if charge.len() != n {
        return Err(EncodingError::Encoding("charge length mismatch".into()));
    }
    let potential = if task == Task::Iv {
        let p = self_consistent.potential_v.as_ref().ok_or_else(|| {
            EncodingError::Encoding("IV task requires potential feature".into())
        })?;
        if p.len() != n {
            return Err(EncodingError::Encoding("potential length mismatch".into()));
        }
        Some(p)
    } else {
        None
    };

    let layout = FeatureLayout::new(task, materials.len());
    let width = layout.width();
    let mut features = vec![0.0; n * width];
    for i in 0..n {
        let region = mesh.region_of_node[i];
        let mat_id = mesh.material_of_node(i);
        let material = materials.get(mat_id)?;
        let row = &mut features[i * width..(i + 1) * width];
        row[mat_id] = 1.0;
        let props = material.property_vector();
        row[materials.len()..materials.len() + 5].copy_from_slice(&props);
        let region_base = materials.len() + 5;
        row[region_base + region.index()] = 1.0;
        let attr_base = region_base + REGION_COUNT;
        let (x, y) = mesh.nodes[i];
        row[attr_base] = x;
        row[attr_base + 1] = y;
        row[attr_base + 2] = signed_log10(doping_cm3[i]);
        row[attr_base + 3] = contacts.get(&region).copied().unwrap_or(0.0);
        row[attr_base + 4] = signed_log10(charge[i]);
        if let Some(p) = potential {
            row[attr_base + 5] = p[i];
        }
    }

    // directed edges from intra-element adjacency, deduped across shared
    // element edges; BTreeSet fixes the ordering
    let mut pairs: BTreeSet<(u32, u32)> = BTreeSet::new();
    for el in &mesh.elements {
        for &a in el {
            for &b in el {
                if a != b {
                    pairs.insert((a, b));
                }
            }
        }
    }
    let mut edges = Vec::with_capacity(pairs.len());
    let mut edge_features = Vec::with_capacity(pairs.len() * 3);
    for (src, dst) in pairs {
        let (xs, ys) = mesh.nodes[src as usize];
        let (xd, yd) = mesh.nodes[dst as usize];
        let dx = xd - xs;
        let dy = yd - ys;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist <= 0.0 {
            return Err(EncodingError::Encoding(format!(
                "coincident nodes {src} and {dst}"
            )));
        }
        edges.push((src, dst));
        edge_features.extend_from_slice(&[dx, dy, dist]);
    }

    Ok(DeviceGraph {
        task,
        num_nodes: n,
        feature_width: width,
        node_features: features,
        edges,
        edge_features,
        target: None,
    })
}
