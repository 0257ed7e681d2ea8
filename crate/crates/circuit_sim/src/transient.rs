//! Fixed-step backward-Euler transient analysis.

use serde::{Deserialize, Serialize};

use crate::dc::{apply_overrides, package_solution, solve_dc, Mna, TransientStep, GMIN};
use crate::flatten::flatten;
use crate::netlist::Netlist;
use crate::waveform::Waveform;
use crate::{Result, SimError};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransientConfig {
    /// Fixed step (s).
    pub dt: f64,
    pub stop: f64,
}

impl TransientConfig {
    pub fn new(dt: f64, stop: f64) -> Result<Self> {
        if !(dt > 0.0) || !(stop >= dt) {
            return Err(SimError::InvalidArgument(format!(
                "need dt > 0 and stop >= dt, got dt={dt}, stop={stop}"
            )));
        }
        Ok(Self { dt, stop })
    }
}

/// Backward-Euler transient: DC operating point at t = 0, then fixed
/// steps with capacitor companion models and constant MOS gate caps.
pub fn transient(netlist: &Netlist, config: &TransientConfig) -> Result<Waveform> {
    transient_with_overrides(netlist, config, &BTreeMap::new())
}

/// Like [`transient`] with DC source-value overrides applied first.
pub fn transient_with_overrides(
    netlist: &Netlist,
    config: &TransientConfig,
    overrides: &BTreeMap<String, f64>,
) -> Result<Waveform> {
    TransientConfig::new(config.dt, config.stop)?;
    let mut flat = flatten(netlist)?;
    apply_overrides(&mut flat, overrides)?;
    let n = flat.num_nodes();

    let (mut x, kcl0) = solve_dc(&flat, 0.0)?;
    let dc = package_solution(&flat, &x, kcl0);

    let steps = (config.stop / config.dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut node_values = Vec::with_capacity(steps + 1);
    let mut source_currents = Vec::with_capacity(steps + 1);
    times.push(0.0);
    node_values.push(x[..n].to_vec());
    source_currents.push((0..dc.source_names.len()).map(|k| -x[n + k]).collect());

    let mut mna = Mna::new(&flat);
    for k in 1..=steps {
        let t = k as f64 * config.dt;
        let prev: Vec<f64> = x[..n].to_vec();
        let step = TransientStep {
            prev_node_voltages: &prev,
            dt: config.dt,
        };
        let (next, _kcl) = mna.newton(&x, t, Some(&step), GMIN).map_err(|e| {
            SimError::Transient {
                time: t,
                message: e.to_string(),
            }
        })?;
        x = next;
        times.push(t);
        node_values.push(x[..n].to_vec());
        source_currents.push((0..dc.source_names.len()).map(|k| -x[n + k]).collect());
    }

    Ok(Waveform {
        times,
        node_names: flat.node_names.clone(),
        node_values,
        source_names: dc.source_names,
        source_currents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_netlist;
    use crate::waveform::{measure_cross, CrossDirection};

    #[test]
    fn rc_discharge_matches_exponential() {
        // C charged to 1 V discharges through R: tau = 1 us
        let text = "\
V1 in 0 PWL(0 1 1e-9 0)
R1 in out 1k
C1 out 0 1n
";
        // charge phase handled by initial DC (source at 1 V at t=0)
        let tau = 1e3 * 1e-9;
        let config = TransientConfig::new(tau / 1000.0, 2.0 * tau).unwrap();
        let w = transient(&parse_netlist(text).unwrap(), &config).unwrap();
        let series = w.node_series("out").unwrap();
        // v(t) = exp(-(t - 1ns)/tau) after the source steps to 0
        let idx = w
            .times
            .iter()
            .position(|&t| (t - (1e-9 + tau)).abs() < 1e-12)
            .unwrap();
        let expect = (-1.0f64).exp();
        let got = series[idx];
        assert!(
            (got - expect).abs() < 0.005 * expect,
            "v(tau) = {got}, expect {expect}"
        );
    }

    #[test]
    fn source_only_circuit_tracks_pwl_breakpoints() {
        let text = "\
V1 a 0 PWL(0 0 1e-9 1 2e-9 0.25)
R1 a 0 1k
";
        let config = TransientConfig::new(1e-10, 2e-9).unwrap();
        let w = transient(&parse_netlist(text).unwrap(), &config).unwrap();
        let series = w.node_series("a").unwrap();
        let at = |t: f64| {
            let i = w.times.iter().position(|&x| (x - t).abs() < 1e-15).unwrap();
            series[i]
        };
        assert_eq!(at(0.0), 0.0);
        assert!((at(1e-9) - 1.0).abs() < 1e-12);
        assert!((at(2e-9) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn inverter_crossing_stable_under_dt_refinement() {
        let text = "\
.model nfet N mu0=20 gamma=0.3 vth=0.6 cox=1e-8 ifloor=1p
.model pfet P mu0=10 gamma=0.3 vth=-0.6 cox=1e-8 ifloor=1p
Mn out in 0 nfet W=8 L=1
Mp out in vdd pfet W=16 L=1
Cl out 0 4f
Vin in 0 PWL(0 0 2e-9 0 3e-9 2)
Vdd vdd 0 DC 2
";
        let netlist = parse_netlist(text).unwrap();
        let cross = |dt: f64| {
            let config = TransientConfig::new(dt, 30e-9).unwrap();
            let w = transient(&netlist, &config).unwrap();
            measure_cross(&w, "out", 1.0, CrossDirection::Falling, 0.0).unwrap()
        };
        let coarse = cross(4e-12);
        let fine = cross(2e-12);
        let shift = (coarse - fine).abs() / fine;
        assert!(shift < 0.002, "50% crossing moved {shift:.4} under refinement");
    }

    #[test]
    fn energy_balance_in_rc_charge() {
        // source energy = dissipated + stored within 1% at dt = tau/1000
        let text = "\
V1 in 0 PWL(0 0 1e-12 1)
R1 in out 1k
C1 out 0 1n
";
        let tau = 1e-6;
        let config = TransientConfig::new(tau / 1000.0, 8.0 * tau).unwrap();
        let w = transient(&parse_netlist(text).unwrap(), &config).unwrap();
        let vin = w.node_series("in").unwrap();
        let vout = w.node_series("out").unwrap();
        let isrc = w.source_series("v1").unwrap();
        let mut e_src = 0.0;
        let mut e_diss = 0.0;
        for k in 1..w.times.len() {
            let dt = w.times[k] - w.times[k - 1];
            let p_src = vin[k] * isrc[k];
            let p_r = (vin[k] - vout[k]) * (vin[k] - vout[k]) / 1e3;
            e_src += p_src * dt;
            e_diss += p_r * dt;
        }
        let e_stored = 0.5 * 1e-9 * vout.last().unwrap().powi(2);
        let balance = (e_src - e_diss - e_stored).abs() / e_src;
        assert!(balance < 0.01, "energy mismatch {balance:.4}");
    }
}
