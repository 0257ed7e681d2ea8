//! Canonical meshes for solver verification.

use device_encoding::{Material, MaterialTable, Mesh, Region};

/// Rectangular strip: left column Source, right column Drain, interior
/// Channel; single material (index 0) everywhere.
pub fn strip_mesh(nx: usize, ny: usize, width_um: f64, height_um: f64) -> Mesh {
    let mut nodes = Vec::new();
    let mut regions = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            nodes.push((
                width_um * i as f64 / (nx - 1) as f64,
                height_um * j as f64 / (ny - 1) as f64,
            ));
            regions.push(if i == 0 {
                Region::Source
            } else if i == nx - 1 {
                Region::Drain
            } else {
                Region::Channel
            });
        }
    }
    let mut elements = Vec::new();
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
    Mesh {
        nodes,
        elements,
        region_of_node: regions,
        material_of_region: [
            (Region::Source, 0),
            (Region::Drain, 0),
            (Region::Channel, 0),
        ]
        .into_iter()
        .collect(),
    }
}

/// A single wide-gap material: no carrier response, doping acts as fixed
/// charge.
pub fn insulator_table() -> MaterialTable {
    MaterialTable {
        materials: vec![Material {
            name: "insulator".into(),
            rel_permittivity: 3.9,
            band_gap_ev: 9.0,
            dos_log10_cm3: 19.0,
            srh_lifetime_log10_s: -9.0,
            tunneling_mass_factor: 0.5,
        }],
    }
}
