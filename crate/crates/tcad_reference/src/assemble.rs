//! P1 finite-element assembly of the Poisson operator on triangles.
//!
//! Element permittivity is the mean of its three nodes' material values;
//! charge enters through lumped (one-third) control areas, which makes the
//! discrete operator equivalent to a box scheme on structured grids.

use device_encoding::{MaterialTable, Mesh};
use stco_common::{EPS0_F_PER_CM, UM_TO_CM};

use crate::{Result, TcadError};

/// Sparse symmetric stiffness in per-row form plus the lumped control
/// areas (cm^2).
pub struct Assembled {
    /// Per row: (column, value), column-sorted, including the diagonal.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Lumped control area per node (cm^2).
    pub control_area: Vec<f64>,
}

impl Assembled {
    /// y = K x
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }
}

/// Assemble the stiffness matrix of -div(eps grad psi) and the lumped
/// control areas. Positions are um; output is in F/cm per unit depth.
pub fn assemble(mesh: &Mesh, materials: &MaterialTable) -> Result<Assembled> {
    let n = mesh.num_nodes();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut control_area = vec![0.0; n];

    let add = |rows: &mut Vec<Vec<(usize, f64)>>, i: usize, j: usize, v: f64| {
        match rows[i].binary_search_by(|&(c, _)| c.cmp(&j)) {
            Ok(pos) => rows[i][pos].1 += v,
            Err(pos) => rows[i].insert(pos, (j, v)),
        }
    };

    for el in &mesh.elements {
        let idx = [el[0] as usize, el[1] as usize, el[2] as usize];
        let p: Vec<(f64, f64)> = idx
            .iter()
            .map(|&i| {
                let (x, y) = mesh.nodes[i];
                (x * UM_TO_CM, y * UM_TO_CM)
            })
            .collect();
        let area2 = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
        let area = 0.5 * area2.abs();
        if area <= 0.0 {
            return Err(TcadError::InvalidArgument(
                "degenerate (zero-area) element".into(),
            ));
        }
        let eps = idx
            .iter()
            .map(|&i| materials.get(mesh.material_of_node(i)).map(|m| m.rel_permittivity))
            .sum::<std::result::Result<f64, _>>()?
            / 3.0
            * EPS0_F_PER_CM;

        // gradient coefficients: b_k = y_{k+1} - y_{k+2}, c_k = x_{k+2} - x_{k+1}
        let mut b = [0.0; 3];
        let mut c = [0.0; 3];
        for k in 0..3 {
            let k1 = (k + 1) % 3;
            let k2 = (k + 2) % 3;
            b[k] = p[k1].1 - p[k2].1;
            c[k] = p[k2].0 - p[k1].0;
        }
        for a_loc in 0..3 {
            control_area[idx[a_loc]] += area / 3.0;
            for b_loc in 0..3 {
                let k = eps * (b[a_loc] * b[b_loc] + c[a_loc] * c[b_loc]) / (4.0 * area);
                add(&mut rows, idx[a_loc], idx[b_loc], k);
            }
        }
    }
    Ok(Assembled { rows, control_area })
}
