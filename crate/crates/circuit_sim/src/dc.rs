//! MNA assembly and damped Newton, shared by DC and transient analyses.

use std::collections::BTreeMap;

use compact_model::{drain_current_with_derivatives, BiasPoint};
use stco_common::UM_TO_CM;

use crate::dense::DenseSolver;
use crate::flatten::{flatten, FlatCircuit, FlatDevice};
use crate::netlist::{Netlist, SourceKind};
use crate::{Result, SimError};

/// Permanent leak from every node to ground; guarantees DC solvability of
/// off-state stacks.
pub const GMIN: f64 = 1e-12;
const V_TOL: f64 = 1e-9;
const I_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 100;
/// Per-iteration node voltage update clamp (V).
const DV_CLAMP: f64 = 1.0;

/// Transient context for companion models.
pub(crate) struct TransientStep<'a> {
    pub prev_node_voltages: &'a [f64],
    pub dt: f64,
}

pub(crate) struct Mna<'a> {
    pub flat: &'a FlatCircuit,
    solver: DenseSolver,
    residual: Vec<f64>,
    /// Nodes that touch a MOS terminal; only these carry the gmin leak,
    /// so purely linear circuits solve exactly.
    leaked: Vec<bool>,
}

impl<'a> Mna<'a> {
    pub fn new(flat: &'a FlatCircuit) -> Self {
        let dim = flat.num_nodes() + flat.source_branches.len();
        let mut solver = DenseSolver::default();
        solver.resize(dim);
        let mut leaked = vec![false; flat.num_nodes()];
        for device in &flat.devices {
            if let FlatDevice::Mos {
                drain,
                gate,
                source,
                ..
            } = device
            {
                for node in [drain, gate, source].into_iter().flatten() {
                    leaked[*node] = true;
                }
            }
        }
        Self {
            flat,
            solver,
            residual: vec![0.0; dim],
            leaked,
        }
    }

    pub fn dim(&self) -> usize {
        self.flat.num_nodes() + self.flat.source_branches.len()
    }

    fn v(x: &[f64], node: Option<usize>) -> f64 {
        node.map(|i| x[i]).unwrap_or(0.0)
    }

    /// Assemble Jacobian and residual at `x` for time `t`. Returns the
    /// infinity norm of the KCL (node) residual rows.
    fn assemble(
        &mut self,
        x: &[f64],
        t: f64,
        step: Option<&TransientStep>,
        gmin: f64,
    ) -> Result<f64> {
        let n = self.flat.num_nodes();
        self.solver.clear();
        self.residual.fill(0.0);

        for i in 0..n {
            if self.leaked[i] {
                self.residual[i] += gmin * x[i];
                self.solver.add(i, i, gmin);
            }
        }

        let mut stamp_conductance = |solver: &mut DenseSolver,
                                     residual: &mut [f64],
                                     a: Option<usize>,
                                     b: Option<usize>,
                                     g: f64,
                                     i_extra: f64| {
            // current a -> b: g*(va - vb) + i_extra
            let current = g * (Self::v(x, a) - Self::v(x, b)) + i_extra;
            if let Some(ai) = a {
                residual[ai] += current;
                solver.add(ai, ai, g);
                if let Some(bi) = b {
                    solver.add(ai, bi, -g);
                }
            }
            if let Some(bi) = b {
                residual[bi] -= current;
                solver.add(bi, bi, g);
                if let Some(ai) = a {
                    solver.add(bi, ai, -g);
                }
            }
        };

        for device in &self.flat.devices {
            match device {
                FlatDevice::Resistor { a, b, ohms, .. } => {
                    stamp_conductance(&mut self.solver, &mut self.residual, *a, *b, 1.0 / ohms, 0.0);
                }
                FlatDevice::Capacitor { a, b, farads, .. } => {
                    if let Some(ts) = step {
                        let g = farads / ts.dt;
                        let prev = Self::v(ts.prev_node_voltages, *a)
                            - Self::v(ts.prev_node_voltages, *b);
                        stamp_conductance(
                            &mut self.solver,
                            &mut self.residual,
                            *a,
                            *b,
                            g,
                            -g * prev,
                        );
                    }
                }
                FlatDevice::Mos {
                    drain,
                    gate,
                    source,
                    card,
                    geometry,
                    ..
                } => {
                    let params = card.params()?;
                    let v_gs = Self::v(x, *gate) - Self::v(x, *source);
                    let v_ds = Self::v(x, *drain) - Self::v(x, *source);
                    let (i_d, gm, gds) = drain_current_with_derivatives(
                        &params,
                        geometry,
                        &BiasPoint::new(v_gs, v_ds),
                    )?;
                    if let Some(di) = drain {
                        self.residual[*di] += i_d;
                        self.solver.add(*di, *di, gds);
                        if let Some(si) = source {
                            self.solver.add(*di, *si, -(gm + gds));
                        }
                        if let Some(gi) = gate {
                            self.solver.add(*di, *gi, gm);
                        }
                    }
                    if let Some(si) = source {
                        self.residual[*si] -= i_d;
                        self.solver.add(*si, *si, gm + gds);
                        if let Some(di) = drain {
                            self.solver.add(*si, *di, -gds);
                        }
                        if let Some(gi) = gate {
                            self.solver.add(*si, *gi, -gm);
                        }
                    }
                    // constant gate-source / gate-drain caps in transient
                    if let Some(ts) = step {
                        let c_half = 0.5
                            * card.cox
                            * (geometry.width_um * UM_TO_CM)
                            * (geometry.length_um * UM_TO_CM);
                        let g = c_half / ts.dt;
                        for other in [*drain, *source] {
                            let prev = Self::v(ts.prev_node_voltages, *gate)
                                - Self::v(ts.prev_node_voltages, other);
                            stamp_conductance(
                                &mut self.solver,
                                &mut self.residual,
                                *gate,
                                other,
                                g,
                                -g * prev,
                            );
                        }
                    }
                }
                FlatDevice::VSource { .. } => {}
            }
        }

        // voltage sources: branch currents and voltage constraints
        for (k, &dev_idx) in self.flat.source_branches.iter().enumerate() {
            let FlatDevice::VSource { pos, neg, kind, .. } = &self.flat.devices[dev_idx] else {
                unreachable!()
            };
            let row = n + k;
            let i_branch = x[row];
            if let Some(pi) = pos {
                self.residual[*pi] += i_branch;
                self.solver.add(*pi, row, 1.0);
                self.solver.add(row, *pi, 1.0);
            }
            if let Some(ni) = neg {
                self.residual[*ni] -= i_branch;
                self.solver.add(*ni, row, -1.0);
                self.solver.add(row, *ni, -1.0);
            }
            self.residual[row] = Self::v(x, *pos) - Self::v(x, *neg) - kind.value_at(t);
        }

        let mut kcl = 0.0f64;
        for i in 0..n {
            kcl = kcl.max(self.residual[i].abs());
        }
        Ok(kcl)
    }

    /// Damped Newton from `x0`. On success the KCL residual infinity norm
    /// is below the current tolerance and the last update below V_TOL.
    pub fn newton(
        &mut self,
        x0: &[f64],
        t: f64,
        step: Option<&TransientStep>,
        gmin: f64,
    ) -> Result<(Vec<f64>, f64)> {
        let n = self.flat.num_nodes();
        let dim = self.dim();
        let mut x = x0.to_vec();
        let mut last_dv = f64::INFINITY;
        let mut kcl = f64::INFINITY;
        for iteration in 0..MAX_NEWTON {
            kcl = self.assemble(&x, t, step, gmin)?;
            let branch_ok = self.residual[n..].iter().all(|r| r.abs() < V_TOL);
            if kcl < I_TOL && last_dv < V_TOL && branch_ok {
                return Ok((x, kcl));
            }
            let mut delta: Vec<f64> = self.residual.iter().map(|r| -r).collect();
            self.solver.solve(&mut delta)?;
            last_dv = 0.0;
            for i in 0..dim {
                let d = if i < n {
                    delta[i].clamp(-DV_CLAMP, DV_CLAMP)
                } else {
                    delta[i]
                };
                if i < n {
                    last_dv = last_dv.max(d.abs());
                }
                x[i] += d;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(SimError::DcConvergence {
                    residual: f64::INFINITY,
                    iterations: iteration + 1,
                });
            }
        }
        Err(SimError::DcConvergence {
            residual: kcl,
            iterations: MAX_NEWTON,
        })
    }
}

/// Node voltages and per-source delivered currents at the DC operating
/// point.
#[derive(Debug, Clone)]
pub struct DcSolution {
    pub node_names: Vec<String>,
    pub node_voltages: Vec<f64>,
    pub source_names: Vec<String>,
    /// Current driven out of each source's positive terminal (A).
    pub supply_currents: Vec<f64>,
    /// KCL residual infinity norm at the accepted solution (A).
    pub kcl_residual: f64,
}

impl DcSolution {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        if node == "0" {
            return Some(0.0);
        }
        let lower = node.to_ascii_lowercase();
        self.node_names
            .iter()
            .position(|n| *n == lower)
            .map(|i| self.node_voltages[i])
    }

    pub fn supply_current(&self, source: &str) -> Option<f64> {
        let lower = source.to_ascii_lowercase();
        self.source_names
            .iter()
            .position(|n| *n == lower)
            .map(|i| self.supply_currents[i])
    }
}

pub(crate) fn solve_dc(flat: &FlatCircuit, t: f64) -> Result<(Vec<f64>, f64)> {
    let mut mna = Mna::new(flat);
    let x0 = vec![0.0; mna.dim()];
    match mna.newton(&x0, t, None, GMIN) {
        Ok(solution) => Ok(solution),
        Err(_) => {
            // gmin continuation from a heavily leaked circuit down to GMIN
            let mut x = vec![0.0; mna.dim()];
            let mut result = None;
            for &g in &[1e-3, 1e-5, 1e-7, 1e-9, GMIN] {
                let (xs, res) = mna.newton(&x, t, None, g)?;
                x = xs;
                result = Some(res);
            }
            Ok((x, result.unwrap()))
        }
    }
}

/// DC operating point: damped Newton with gmin-stepping fallback.
///
/// `overrides` replaces the DC value of named sources before solving.
pub fn dc_operating_point(
    netlist: &Netlist,
    overrides: &BTreeMap<String, f64>,
) -> Result<DcSolution> {
    let mut flat = flatten(netlist)?;
    apply_overrides(&mut flat, overrides)?;
    let (x, kcl) = solve_dc(&flat, 0.0)?;
    Ok(package_solution(&flat, &x, kcl))
}

pub(crate) fn apply_overrides(
    flat: &mut FlatCircuit,
    overrides: &BTreeMap<String, f64>,
) -> Result<()> {
    for (name, value) in overrides {
        let lower = name.to_ascii_lowercase();
        let mut found = false;
        for device in &mut flat.devices {
            if let FlatDevice::VSource { name: n, kind, .. } = device {
                if *n == lower {
                    *kind = SourceKind::Dc(*value);
                    found = true;
                }
            }
        }
        if !found {
            return Err(SimError::InvalidArgument(format!(
                "override names unknown source `{name}`"
            )));
        }
    }
    Ok(())
}

pub(crate) fn package_solution(flat: &FlatCircuit, x: &[f64], kcl: f64) -> DcSolution {
    let n = flat.num_nodes();
    let source_names: Vec<String> = flat
        .source_branches
        .iter()
        .map(|&d| match &flat.devices[d] {
            FlatDevice::VSource { name, .. } => name.clone(),
            _ => unreachable!(),
        })
        .collect();
    // branch variable = current leaving the + node into the source, so the
    // delivered current is its negation
    let supply_currents: Vec<f64> = (0..source_names.len()).map(|k| -x[n + k]).collect();
    DcSolution {
        node_names: flat.node_names.clone(),
        node_voltages: x[..n].to_vec(),
        source_names,
        supply_currents,
        kcl_residual: kcl,
    }
}
