//! Damped-Newton solution of the nonlinear Poisson equation
//! div(eps grad psi) = -rho(psi) with Boltzmann carrier statistics
//! n = n_i exp((psi - phi)/Vt), p = n_i exp((phi - psi)/Vt) at a frozen
//! quasi-Fermi level per contact (linearly bridged across the channel).

use std::collections::BTreeMap;

use device_encoding::{MaterialTable, Mesh, Region};
use serde::{Deserialize, Serialize};
use stco_common::{Q_ELEMENTARY, THERMAL_VOLTAGE};

use crate::assemble::{assemble, Assembled};
use crate::banded::BandedSpd;
use crate::{Result, TcadError};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on ||F|| / ||F0||.
    pub newton_tol_rel: f64,
    pub max_iterations: usize,
    /// Per-node potential update clamp, in units of the thermal voltage.
    pub clamp_vt_units: f64,
    pub thermal_voltage: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol_rel: 1e-10,
            max_iterations: 50,
            clamp_vt_units: 2.0,
            thermal_voltage: THERMAL_VOLTAGE,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol_rel > 0.0) {
            return Err(TcadError::InvalidArgument("tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(TcadError::InvalidArgument(
                "max iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonSolution {
    /// Electrostatic potential per node (V).
    pub potential: Vec<f64>,
    /// Electron density per node (cm^-3).
    pub electron_density: Vec<f64>,
    /// Hole density per node (cm^-3).
    pub hole_density: Vec<f64>,
    /// Net charge per node (C/cm^3).
    pub net_charge_c_cm3: Vec<f64>,
    /// Final relative residual norm.
    pub residual_norm: f64,
    pub newton_iterations: usize,
}

impl PoissonSolution {
    /// Net charge as a number density (cm^-3), the form carried as a
    /// graph feature.
    pub fn net_charge_cm3(&self) -> Vec<f64> {
        self.net_charge_c_cm3
            .iter()
            .map(|&c| c / Q_ELEMENTARY)
            .collect()
    }
}

/// Per-node quasi-Fermi level: contact regions pin their applied bias,
/// the channel ramps linearly between the source and drain levels, and
/// carrier-free regions sit at zero.
pub(crate) fn quasi_fermi_field(mesh: &Mesh, contacts: &BTreeMap<Region, f64>) -> Vec<f64> {
    let v_source = contacts.get(&Region::Source).copied().unwrap_or(0.0);
    let v_drain = contacts.get(&Region::Drain).copied().unwrap_or(v_source);
    let channel_x: Vec<f64> = mesh
        .region_of_node
        .iter()
        .zip(&mesh.nodes)
        .filter(|(r, _)| **r == Region::Channel)
        .map(|(_, &(x, _))| x)
        .collect();
    let (x_lo, x_hi) = channel_x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    mesh.region_of_node
        .iter()
        .zip(&mesh.nodes)
        .map(|(region, &(x, _))| match region {
            Region::Source => v_source,
            Region::Drain => v_drain,
            Region::Channel => {
                if x_hi > x_lo {
                    v_source + (v_drain - v_source) * (x - x_lo) / (x_hi - x_lo)
                } else {
                    v_source
                }
            }
            Region::GateOxide | Region::GateContact => 0.0,
        })
        .collect()
}

/// Built-in potential of a charge-neutral ohmic contact.
fn built_in_potential(net_doping: f64, n_i: f64, vt: f64) -> f64 {
    if net_doping == 0.0 {
        0.0
    } else {
        vt * (net_doping / (2.0 * n_i)).asinh()
    }
}

struct Problem<'a> {
    assembled: &'a Assembled,
    n_i: Vec<f64>,
    doping: &'a [f64],
    phi: Vec<f64>,
    dirichlet: Vec<Option<f64>>,
    free: Vec<usize>,
    index_of: Vec<Option<usize>>,
    vt: f64,
}

impl Problem<'_> {
    fn carriers(&self, psi: f64, node: usize) -> (f64, f64) {
        let ni = self.n_i[node];
        if ni == 0.0 {
            return (0.0, 0.0);
        }
        // clamp the Boltzmann argument; transient Newton iterates can
        // otherwise overflow the exponential
        let arg = ((psi - self.phi[node]) / self.vt).clamp(-120.0, 120.0);
        (ni * arg.exp(), ni * (-arg).exp())
    }

    /// rho (C/cm^3) and d rho / d psi at one node.
    fn charge(&self, psi: f64, node: usize) -> (f64, f64) {
        let (n, p) = self.carriers(psi, node);
        let rho = Q_ELEMENTARY * (p - n + self.doping[node]);
        let drho = -Q_ELEMENTARY * (n + p) / self.vt;
        (rho, drho)
    }

    /// Residual F = K psi - Q(psi) restricted to free nodes.
    fn residual(&self, psi: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.assembled.apply(psi, scratch);
        for (k, &i) in self.free.iter().enumerate() {
            let (rho, _) = self.charge(psi[i], i);
            out[k] = scratch[i] - rho * self.assembled.control_area[i];
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve the nonlinear Poisson problem.
///
/// Contact regions are Dirichlet at applied bias plus the local built-in
/// potential; Newton steps are clamped per node and damped by residual
/// backtracking, so the residual strictly decreases across accepted steps.
pub fn solve_poisson(
    mesh: &Mesh,
    materials: &MaterialTable,
    doping_cm3: &[f64],
    contacts: &BTreeMap<Region, f64>,
    config: &SolverConfig,
) -> Result<PoissonSolution> {
    config.validate()?;
    mesh.validate().map_err(TcadError::Encoding)?;
    let n = mesh.num_nodes();
    if doping_cm3.len() != n {
        return Err(TcadError::InvalidArgument(format!(
            "doping has {} entries for {n} nodes",
            doping_cm3.len()
        )));
    }
    if contacts.is_empty() {
        return Err(TcadError::InvalidArgument(
            "at least one contact region is required".into(),
        ));
    }
    let assembled = assemble(mesh, materials)?;
    let vt = config.thermal_voltage;
    let n_i: Vec<f64> = (0..n)
        .map(|i| {
            materials
                .get(mesh.material_of_node(i))
                .map(|m| m.intrinsic_density(vt))
        })
        .collect::<std::result::Result<_, _>>()?;
    let phi = quasi_fermi_field(mesh, contacts);

    let mut dirichlet: Vec<Option<f64>> = vec![None; n];
    let mut has_contact = false;
    for (i, region) in mesh.region_of_node.iter().enumerate() {
        if let Some(&bias) = contacts.get(region) {
            let bi = built_in_potential(doping_cm3[i], n_i[i].max(f64::MIN_POSITIVE), vt);
            dirichlet[i] = Some(bias + bi);
            has_contact = true;
        }
    }
    if !has_contact {
        return Err(TcadError::InvalidArgument(
            "contact regions not present in mesh".into(),
        ));
    }

    let mut index_of = vec![None; n];
    let mut free = Vec::new();
    for i in 0..n {
        if dirichlet[i].is_none() {
            index_of[i] = Some(free.len());
            free.push(i);
        }
    }

    let problem = Problem {
        assembled: &assembled,
        n_i,
        doping: doping_cm3,
        phi,
        dirichlet: dirichlet.clone(),
        free: free.clone(),
        index_of,
        vt,
    };

    // initial guess: neutral built-in potential offset by the local
    // quasi-Fermi level; Dirichlet nodes exact
    let mut psi: Vec<f64> = (0..n)
        .map(|i| match problem.dirichlet[i] {
            Some(v) => v,
            None if problem.n_i[i] >= 1.0 => {
                built_in_potential(doping_cm3[i], problem.n_i[i], vt) + problem.phi[i]
            }
            None => problem.phi[i],
        })
        .collect();
    // carrier-free stack nodes: warm-start from a plain Laplace solve so
    // the clamped Newton does not have to walk the whole gate bias
    laplace_warm_start(&assembled, &problem, &mut psi)?;

    let nf = free.len();
    if nf == 0 {
        let solution = build_solution(&problem, &psi, 0.0, 0);
        return Ok(solution);
    }
    let mut f = vec![0.0; nf];
    let mut scratch = vec![0.0; n];
    problem.residual(&psi, &mut f, &mut scratch);
    // magnitude scale: |K||psi| + |Q| at the initial guess, so warm starts
    // that land on the solution register as converged rather than dividing
    // a roundoff residual by itself
    let denom = {
        let mut acc = 0.0f64;
        for (k, &i) in free.iter().enumerate() {
            let mut row = 0.0;
            for &(j, v) in &assembled.rows[i] {
                row += v.abs() * psi[j].abs();
            }
            let (rho, _) = problem.charge(psi[i], i);
            row += (rho * assembled.control_area[i]).abs();
            acc += row * row;
            let _ = k;
        }
        acc.sqrt().max(f64::MIN_POSITIVE)
    };
    let f0 = norm2(&f);
    let reference = f0.max(denom);
    let mut fnorm = f0;
    let clamp = config.clamp_vt_units * vt;
    let mut iterations = 0;

    while fnorm / reference > config.newton_tol_rel && fnorm > 1e-300 {
        if iterations >= config.max_iterations {
            return Err(TcadError::Convergence {
                iterations,
                residual: fnorm / reference,
            });
        }
        // Jacobian: stiffness restricted to free nodes + carrier diagonal
        let mut jac = BandedSpd::new(nf, band_of(&assembled, &problem));
        for (k, &i) in free.iter().enumerate() {
            for &(j, v) in &assembled.rows[i] {
                if let Some(jj) = problem.index_of[j] {
                    if jj <= k {
                        jac.add(k, jj, v);
                    }
                } // Dirichlet columns contribute to the residual only
            }
            let (_, drho) = problem.charge(psi[i], i);
            jac.add(k, k, -drho * assembled.control_area[i]);
        }
        jac.factor()?;
        let mut step = jac.solve(&f);
        for s in &mut step {
            *s = -*s;
        }
        // direction-preserving step limit: scale the whole Newton step so
        // no carrier-bearing node moves more than the clamp. Carrier-free
        // nodes have no exponential response and take full steps, which
        // keeps charge-dominated linear problems one-shot solvable.
        let mut t_max = 1.0f64;
        for (k, &i) in free.iter().enumerate() {
            if problem.n_i[i] >= 1.0 {
                let a = step[k].abs();
                if a > clamp {
                    t_max = t_max.min(clamp / a);
                }
            }
        }

        // backtracking: accept only strict residual decrease
        let mut t = t_max;
        let mut accepted = false;
        let mut trial = psi.clone();
        let mut ftrial = vec![0.0; nf];
        for _ in 0..40 {
            for (k, &i) in free.iter().enumerate() {
                trial[i] = psi[i] + t * step[k];
            }
            problem.residual(&trial, &mut ftrial, &mut scratch);
            let fnew = norm2(&ftrial);
            if fnew < fnorm {
                psi.copy_from_slice(&trial);
                f.copy_from_slice(&ftrial);
                fnorm = fnew;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            return Err(TcadError::Convergence {
                iterations,
                residual: fnorm / reference,
            });
        }
    }

    Ok(build_solution(&problem, &psi, fnorm / reference, iterations))
}

fn band_of(assembled: &Assembled, problem: &Problem) -> usize {
    let mut bw = 0;
    for (k, &i) in problem.free.iter().enumerate() {
        for &(j, _) in &assembled.rows[i] {
            if let Some(jj) = problem.index_of[j] {
                bw = bw.max(k.abs_diff(jj));
            }
        }
    }
    bw
}

/// One linear solve with carriers and doping ignored, used to initialize
/// nodes that carry no charge (gate stack) near their harmonic values.
fn laplace_warm_start(assembled: &Assembled, problem: &Problem, psi: &mut [f64]) -> Result<()> {
    let nf = problem.free.len();
    if nf == 0 {
        return Ok(());
    }
    let mut jac = BandedSpd::new(nf, band_of(assembled, problem));
    let mut rhs = vec![0.0; nf];
    for (k, &i) in problem.free.iter().enumerate() {
        for &(j, v) in &assembled.rows[i] {
            match problem.index_of[j] {
                Some(jj) => {
                    if jj <= k {
                        jac.add(k, jj, v);
                    }
                }
                None => rhs[k] -= v * problem.dirichlet[j].unwrap(),
            }
        }
    }
    jac.factor()?;
    let x = jac.solve(&rhs);
    for (k, &i) in problem.free.iter().enumerate() {
        // carrier-free nodes take the warm start; semiconductor nodes keep
        // their neutral estimate
        if problem.n_i[i] < 1.0 {
            psi[i] = x[k];
        }
    }
    Ok(())
}

fn build_solution(
    problem: &Problem,
    psi: &[f64],
    residual_norm: f64,
    iterations: usize,
) -> PoissonSolution {
    let n = psi.len();
    let mut electron = vec![0.0; n];
    let mut hole = vec![0.0; n];
    let mut charge = vec![0.0; n];
    for i in 0..n {
        let (ne, ph) = problem.carriers(psi[i], i);
        electron[i] = ne;
        hole[i] = ph;
        charge[i] = Q_ELEMENTARY * (ph - ne + problem.doping[i]);
    }
    PoissonSolution {
        potential: psi.to_vec(),
        electron_density: electron,
        hole_density: hole,
        net_charge_c_cm3: charge,
        residual_norm,
        newton_iterations: iterations,
    }
}

/// Net charge density rho = q (p - n + N_D - N_A) per node (C/cm^3).
pub fn charge_density(solution: &PoissonSolution, doping_cm3: &[f64]) -> Vec<f64> {
    solution
        .electron_density
        .iter()
        .zip(&solution.hole_density)
        .zip(doping_cm3)
        .map(|((&n, &p), &dop)| Q_ELEMENTARY * (p - n + dop))
        .collect()
}

/// Discrete Gauss law: inward flux through contact nodes minus total free
/// charge. Returns (flux, charge); they agree to roundoff on converged
/// solutions.
pub fn gauss_law_residual(
    mesh: &Mesh,
    materials: &MaterialTable,
    contacts: &BTreeMap<Region, f64>,
    solution: &PoissonSolution,
) -> Result<(f64, f64)> {
    let assembled = assemble(mesh, materials)?;
    let n = mesh.num_nodes();
    let mut kpsi = vec![0.0; n];
    assembled.apply(&solution.potential, &mut kpsi);
    let mut flux = 0.0;
    let mut charge = 0.0;
    for i in 0..n {
        let is_contact = contacts.contains_key(&mesh.region_of_node[i]);
        if is_contact {
            flux -= kpsi[i];
        } else {
            charge += solution.net_charge_c_cm3[i] * assembled.control_area[i];
        }
    }
    // stiffness rows sum to zero, so minus the contact-row sum of K psi
    // equals the free-node charge
    Ok((flux, charge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{insulator_table as insulator, strip_mesh};

    #[test]
    fn laplace_is_linear_between_contacts() {
        let mesh = strip_mesh(17, 5, 2.0, 0.5);
        let materials = insulator();
        let doping = vec![0.0; mesh.num_nodes()];
        let contacts: BTreeMap<Region, f64> =
            [(Region::Source, 0.0), (Region::Drain, 1.0)].into_iter().collect();
        let sol = solve_poisson(&mesh, &materials, &doping, &contacts, &SolverConfig::default())
            .unwrap();
        for (i, &(x, _)) in mesh.nodes.iter().enumerate() {
            let expect = x / 2.0;
            assert!(
                (sol.potential[i] - expect).abs() < 1e-10,
                "node {i}: {} vs {expect}",
                sol.potential[i]
            );
        }
    }

    #[test]
    fn equal_bias_neutral_doping_gives_constant_potential() {
        let mesh = strip_mesh(9, 4, 1.0, 0.4);
        let materials = MaterialTable::tft_defaults();
        let doping = vec![0.0; mesh.num_nodes()];
        let contacts: BTreeMap<Region, f64> =
            [(Region::Source, 0.7), (Region::Drain, 0.7)].into_iter().collect();
        let sol = solve_poisson(&mesh, &materials, &doping, &contacts, &SolverConfig::default())
            .unwrap();
        for &v in &sol.potential {
            assert!((v - 0.7).abs() < 1e-9, "potential {v} != 0.7");
        }
    }

    #[test]
    fn uniform_charge_parabola() {
        // fixed charge q*N_D between grounded plates: mid potential
        // rho d^2 / (8 eps)
        let nx = 65;
        let mesh = strip_mesh(nx, 3, 1.0, 0.2);
        let materials = insulator(); // no carriers: doping acts as fixed charge
        let n_d = 1e16;
        let doping: Vec<f64> = mesh
            .region_of_node
            .iter()
            .map(|r| if *r == Region::Channel { n_d } else { 0.0 })
            .collect();
        let contacts: BTreeMap<Region, f64> =
            [(Region::Source, 0.0), (Region::Drain, 0.0)].into_iter().collect();
        let sol = solve_poisson(&mesh, &materials, &doping, &contacts, &SolverConfig::default())
            .unwrap();
        let rho = Q_ELEMENTARY * n_d;
        let eps = 3.9 * stco_common::EPS0_F_PER_CM;
        let d_cm = 1.0 * stco_common::UM_TO_CM;
        let expect = rho * d_cm * d_cm / (8.0 * eps);
        let mid = sol.potential[nx / 2];
        assert!(
            (mid - expect).abs() < 0.01 * expect,
            "midpoint {mid} vs analytic {expect}"
        );
    }

    #[test]
    fn charge_density_hand_values() {
        let sol = PoissonSolution {
            potential: vec![0.0],
            electron_density: vec![0.0],
            hole_density: vec![0.0],
            net_charge_c_cm3: vec![0.0],
            residual_norm: 0.0,
            newton_iterations: 0,
        };
        let rho = charge_density(&sol, &[1e17]);
        assert_eq!(rho[0], Q_ELEMENTARY * 1e17);
        assert!((rho[0] - 1.602e-2).abs() < 1e-3 * 1.602e-2, "rho = {}", rho[0]);

        // n = p with balanced doping cancels exactly
        let sol = PoissonSolution {
            potential: vec![0.0],
            electron_density: vec![4e10],
            hole_density: vec![4e10],
            net_charge_c_cm3: vec![0.0],
            residual_norm: 0.0,
            newton_iterations: 0,
        };
        assert_eq!(charge_density(&sol, &[0.0])[0], 0.0);
    }

    #[test]
    fn non_convergence_is_reported() {
        let mesh = strip_mesh(9, 3, 1.0, 0.2);
        let materials = MaterialTable::tft_defaults();
        let doping: Vec<f64> = (0..mesh.num_nodes())
            .map(|i| if i % 2 == 0 { 1e18 } else { -1e18 })
            .collect();
        let contacts: BTreeMap<Region, f64> =
            [(Region::Source, 0.0), (Region::Drain, 2.0)].into_iter().collect();
        let config = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        match solve_poisson(&mesh, &materials, &doping, &contacts, &config) {
            Err(TcadError::Convergence { .. }) => {}
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
