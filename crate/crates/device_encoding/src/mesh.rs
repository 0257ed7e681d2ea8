//! Triangulated 2D device meshes and the material vocabulary.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::{EncodingError, Result};

/// Fixed region vocabulary of the planar MOS-like cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Source,
    Drain,
    Channel,
    GateOxide,
    GateContact,
}

pub const REGION_COUNT: usize = 5;

impl Region {
    pub fn index(&self) -> usize {
        match self {
            Region::Source => 0,
            Region::Drain => 1,
            Region::Channel => 2,
            Region::GateOxide => 3,
            Region::GateContact => 4,
        }
    }

    pub fn all() -> [Region; REGION_COUNT] {
        [
            Region::Source,
            Region::Drain,
            Region::Channel,
            Region::GateOxide,
            Region::GateContact,
        ]
    }
}

/// Material property vector: the fields that parameterize the physical
/// models carried as features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub rel_permittivity: f64,
    pub band_gap_ev: f64,
    /// Effective density of states, log10(cm^-3).
    pub dos_log10_cm3: f64,
    /// Shockley-Read-Hall lifetime, log10(s). Carried as a feature only.
    pub srh_lifetime_log10_s: f64,
    pub tunneling_mass_factor: f64,
}

impl Material {
    pub fn property_vector(&self) -> [f64; 5] {
        [
            self.rel_permittivity,
            self.band_gap_ev,
            self.dos_log10_cm3,
            self.srh_lifetime_log10_s,
            self.tunneling_mass_factor,
        ]
    }

    /// Intrinsic carrier density n_i = N_dos * exp(-Eg / 2Vt), cm^-3.
    /// Wide-gap insulators come out effectively carrier-free.
    pub fn intrinsic_density(&self, thermal_voltage: f64) -> f64 {
        10f64.powf(self.dos_log10_cm3) * (-self.band_gap_ev / (2.0 * thermal_voltage)).exp()
    }
}

/// Material vocabulary; the one-hot index of a material is its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialTable {
    pub materials: Vec<Material>,
}

impl MaterialTable {
    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn get(&self, id: usize) -> Result<&Material> {
        self.materials
            .get(id)
            .ok_or_else(|| EncodingError::Encoding(format!("unknown material id {id}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.materials.is_empty() {
            return Err(EncodingError::InvalidArgument(
                "material table is empty".into(),
            ));
        }
        for m in &self.materials {
            for v in m.property_vector() {
                if !v.is_finite() {
                    return Err(EncodingError::InvalidArgument(format!(
                        "material `{}` has a non-finite property",
                        m.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Semiconductor / oxide / gate-metal defaults for TFT-style devices.
    pub fn tft_defaults() -> Self {
        Self {
            materials: vec![
                Material {
                    name: "tft-semiconductor".into(),
                    rel_permittivity: 8.0,
                    band_gap_ev: 1.0,
                    dos_log10_cm3: 19.0,
                    srh_lifetime_log10_s: -7.0,
                    tunneling_mass_factor: 1.0,
                },
                Material {
                    name: "gate-oxide".into(),
                    rel_permittivity: 3.9,
                    band_gap_ev: 9.0,
                    dos_log10_cm3: 19.0,
                    srh_lifetime_log10_s: -9.0,
                    tunneling_mass_factor: 0.5,
                },
                Material {
                    name: "gate-metal".into(),
                    rel_permittivity: 3.9,
                    band_gap_ev: 9.0,
                    dos_log10_cm3: 19.0,
                    srh_lifetime_log10_s: -9.0,
                    tunneling_mass_factor: 0.5,
                },
            ],
        }
    }
}

/// Triangulated planar mesh with per-node regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    /// Node positions (um).
    pub nodes: Vec<(f64, f64)>,
    /// Triangles as node-index triples.
    pub elements: Vec<[u32; 3]>,
    pub region_of_node: Vec<Region>,
    pub material_of_region: BTreeMap<Region, usize>,
}

impl Mesh {
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 || self.elements.is_empty() {
            return Err(EncodingError::InvalidMesh("empty mesh".into()));
        }
        if self.region_of_node.len() != n {
            return Err(EncodingError::InvalidMesh(format!(
                "region_of_node has {} entries for {n} nodes",
                self.region_of_node.len()
            )));
        }
        for &(x, y) in &self.nodes {
            if !(x.is_finite() && y.is_finite()) {
                return Err(EncodingError::InvalidMesh("non-finite node position".into()));
            }
        }
        let mut used = vec![false; n];
        for el in &self.elements {
            for &i in el {
                let i = i as usize;
                if i >= n {
                    return Err(EncodingError::InvalidMesh(format!(
                        "element references node {i} of {n}"
                    )));
                }
                used[i] = true;
            }
        }
        if let Some(orphan) = used.iter().position(|u| !u) {
            return Err(EncodingError::InvalidMesh(format!(
                "node {orphan} belongs to no element"
            )));
        }
        for region in self.region_of_node.iter() {
            if !self.material_of_region.contains_key(region) {
                return Err(EncodingError::InvalidMesh(format!(
                    "region {region:?} has no material assignment"
                )));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn material_of_node(&self, node: usize) -> usize {
        self.material_of_region[&self.region_of_node[node]]
    }

    /// Triangle area (um^2).
    pub fn element_area(&self, el: &[u32; 3]) -> f64 {
        let (x0, y0) = self.nodes[el[0] as usize];
        let (x1, y1) = self.nodes[el[1] as usize];
        let (x2, y2) = self.nodes[el[2] as usize];
        0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)).abs()
    }
}
