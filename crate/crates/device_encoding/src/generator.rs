//! Seeded random device generator: planar MOS-like cross-sections on a
//! structured triangulated grid.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::mesh::{Mesh, Region};
use crate::{EncodingError, Result};

/// Ranges the generator draws from. All ranges are inclusive-exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    /// Nodes per side of the structured grid.
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Rows forming the gate stack: 1 gate-contact row + this many oxide rows.
    pub oxide_rows: usize,
    /// Columns on each side forming source/drain.
    pub sd_cols: usize,
    pub width_um: (f64, f64),
    pub height_um: (f64, f64),
    /// Channel acceptor doping, log10(cm^-3).
    pub channel_acceptor_log10: (f64, f64),
    /// Source/drain donor doping, log10(cm^-3).
    pub sd_donor_log10: (f64, f64),
    pub gate_bias_v: (f64, f64),
    pub drain_bias_v: (f64, f64),
}

impl Default for DeviceSpec {
    fn default() -> Self {
        Self {
            grid_nx: 12,
            grid_ny: 12,
            oxide_rows: 2,
            sd_cols: 2,
            width_um: (2.0, 4.0),
            height_um: (0.4, 0.8),
            channel_acceptor_log10: (16.0, 17.0),
            sd_donor_log10: (18.0, 18.7),
            gate_bias_v: (0.0, 3.0),
            drain_bias_v: (0.0, 3.0),
        }
    }
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_nx < 4 || self.grid_ny < 4 {
            return Err(EncodingError::InvalidArgument(
                "grid must be at least 4x4".into(),
            ));
        }
        if self.oxide_rows + 2 >= self.grid_ny {
            return Err(EncodingError::InvalidArgument(
                "gate stack leaves no semiconductor rows".into(),
            ));
        }
        if 2 * self.sd_cols + 1 >= self.grid_nx {
            return Err(EncodingError::InvalidArgument(
                "source/drain columns leave no channel".into(),
            ));
        }
        for (name, (lo, hi)) in [
            ("width_um", self.width_um),
            ("height_um", self.height_um),
            ("channel_acceptor_log10", self.channel_acceptor_log10),
            ("sd_donor_log10", self.sd_donor_log10),
            ("gate_bias_v", self.gate_bias_v),
            ("drain_bias_v", self.drain_bias_v),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(EncodingError::InvalidArgument(format!(
                    "infeasible range for {name}: ({lo}, {hi})"
                )));
            }
        }
        if self.width_um.0 <= 0.0 || self.height_um.0 <= 0.0 {
            return Err(EncodingError::InvalidArgument(
                "geometry ranges must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One generated device: mesh, contact biases, and per-node doping.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomDevice {
    pub mesh: Mesh,
    pub contacts: BTreeMap<Region, f64>,
    /// Signed net doping per node, cm^-3 (+donor, -acceptor).
    pub doping_cm3: Vec<f64>,
    pub width_um: f64,
    pub height_um: f64,
}

fn draw(rng: &mut ChaCha12Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Deterministic device draw: same spec and seed give the identical device.
pub fn random_device(spec: &DeviceSpec, seed: u64) -> Result<RandomDevice> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let width = draw(&mut rng, spec.width_um);
    let height = draw(&mut rng, spec.height_um);
    let n_a = 10f64.powf(draw(&mut rng, spec.channel_acceptor_log10));
    let n_d = 10f64.powf(draw(&mut rng, spec.sd_donor_log10));
    let v_g = draw(&mut rng, spec.gate_bias_v);
    let v_d = draw(&mut rng, spec.drain_bias_v);

    let (nx, ny) = (spec.grid_nx, spec.grid_ny);
    let mut nodes = Vec::with_capacity(nx * ny);
    let mut regions = Vec::with_capacity(nx * ny);
    let mut doping = Vec::with_capacity(nx * ny);
    let gate_row = ny - 1;
    let first_oxide_row = ny - 1 - spec.oxide_rows;
    for j in 0..ny {
        for i in 0..nx {
            let x = width * i as f64 / (nx - 1) as f64;
            let y = height * j as f64 / (ny - 1) as f64;
            nodes.push((x, y));
            let region = if j == gate_row {
                Region::GateContact
            } else if j >= first_oxide_row {
                Region::GateOxide
            } else if i < spec.sd_cols {
                Region::Source
            } else if i >= nx - spec.sd_cols {
                Region::Drain
            } else {
                Region::Channel
            };
            regions.push(region);
            doping.push(match region {
                Region::Source | Region::Drain => n_d,
                Region::Channel => -n_a,
                Region::GateOxide | Region::GateContact => 0.0,
            });
        }
    }
    let mut elements = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = (j * nx + i) as u32;
            let b = (j * nx + i + 1) as u32;
            let c = ((j + 1) * nx + i) as u32;
            let d = ((j + 1) * nx + i + 1) as u32;
            elements.push([a, b, d]);
            elements.push([a, d, c]);
        }
    }
    let material_of_region: BTreeMap<Region, usize> = [
        (Region::Source, 0),
        (Region::Drain, 0),
        (Region::Channel, 0),
        (Region::GateOxide, 1),
        (Region::GateContact, 2),
    ]
    .into_iter()
    .collect();
    let mesh = Mesh {
        nodes,
        elements,
        region_of_node: regions,
        material_of_region,
    };
    let contacts: BTreeMap<Region, f64> = [
        (Region::Source, 0.0),
        (Region::Drain, v_d),
        (Region::GateContact, v_g),
    ]
    .into_iter()
    .collect();
    Ok(RandomDevice {
        mesh,
        contacts,
        doping_cm3: doping,
        width_um: width,
        height_um: height,
    })
}
