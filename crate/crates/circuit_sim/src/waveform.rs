//! Time-series results and crossing measurements.

use std::fmt::Write as _;

use crate::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossDirection {
    Rising,
    Falling,
    Any,
}

/// Node voltages and delivered source currents over strictly increasing
/// time points.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub times: Vec<f64>,
    pub node_names: Vec<String>,
    /// Row-major: one row of node voltages per time point.
    pub node_values: Vec<Vec<f64>>,
    pub source_names: Vec<String>,
    /// Delivered current per source per time point.
    pub source_currents: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn node_series(&self, node: &str) -> Result<Vec<f64>> {
        if node == "0" {
            return Ok(vec![0.0; self.times.len()]);
        }
        let lower = node.to_ascii_lowercase();
        let idx = self
            .node_names
            .iter()
            .position(|n| *n == lower)
            .ok_or_else(|| SimError::Measurement(format!("unknown node `{node}`")))?;
        Ok(self.node_values.iter().map(|row| row[idx]).collect())
    }

    pub fn source_series(&self, source: &str) -> Result<Vec<f64>> {
        let lower = source.to_ascii_lowercase();
        let idx = self
            .source_names
            .iter()
            .position(|n| *n == lower)
            .ok_or_else(|| SimError::Measurement(format!("unknown source `{source}`")))?;
        Ok(self.source_currents.iter().map(|row| row[idx]).collect())
    }

    pub fn final_voltage(&self, node: &str) -> Result<f64> {
        Ok(*self.node_series(node)?.last().unwrap())
    }

    /// CSV dump: `time,node1,node2,...,i(v1),...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for n in &self.node_names {
            write!(out, ",{n}").unwrap();
        }
        for s in &self.source_names {
            write!(out, ",i({s})").unwrap();
        }
        out.push('\n');
        for (k, &t) in self.times.iter().enumerate() {
            write!(out, "{t}").unwrap();
            for v in &self.node_values[k] {
                write!(out, ",{v}").unwrap();
            }
            for i in &self.source_currents[k] {
                write!(out, ",{i}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// First crossing of `level` on `node` after time `after`, linearly
/// interpolated between bracketing samples.
pub fn measure_cross(
    waveform: &Waveform,
    node: &str,
    level: f64,
    direction: CrossDirection,
    after: f64,
) -> Result<f64> {
    let series = waveform.node_series(node)?;
    for k in 1..waveform.times.len() {
        let (t0, t1) = (waveform.times[k - 1], waveform.times[k]);
        if t1 < after {
            continue;
        }
        let (v0, v1) = (series[k - 1], series[k]);
        let crosses = match direction {
            CrossDirection::Rising => v0 < level && v1 >= level,
            CrossDirection::Falling => v0 > level && v1 <= level,
            CrossDirection::Any => (v0 < level && v1 >= level) || (v0 > level && v1 <= level),
        };
        if crosses {
            let t = if v1 == v0 {
                t1
            } else {
                t0 + (t1 - t0) * (level - v0) / (v1 - v0)
            };
            if t >= after {
                return Ok(t);
            }
        }
    }
    Err(SimError::Measurement(format!(
        "no {direction:?} crossing of {level} V on `{node}` after {after:e}s"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_waveform() -> Waveform {
        // 0 -> 1 V over 1 ns in 10 steps
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 1e-10).collect();
        let node_values: Vec<Vec<f64>> = (0..=10).map(|k| vec![k as f64 / 10.0]).collect();
        Waveform {
            times,
            node_names: vec!["out".into()],
            node_values,
            source_names: vec![],
            source_currents: vec![],
        }
    }

    #[test]
    fn ramp_crossing_is_linearly_interpolated() {
        let w = ramp_waveform();
        let t = measure_cross(&w, "out", 0.5, CrossDirection::Rising, 0.0).unwrap();
        assert!((t - 0.5e-9).abs() < 1e-18, "t = {t}");
    }

    #[test]
    fn constant_waveform_has_no_crossing() {
        let w = Waveform {
            times: vec![0.0, 1e-9],
            node_names: vec!["x".into()],
            node_values: vec![vec![1.0], vec![1.0]],
            source_names: vec![],
            source_currents: vec![],
        };
        assert!(measure_cross(&w, "x", 0.5, CrossDirection::Any, 0.0).is_err());
    }

    #[test]
    fn sine_falling_crossing_after_first_rise() {
        let n = 20000usize;
        let period = 2e-9;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * period / n as f64 * 2.0).collect();
        let node_values: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| vec![(2.0 * std::f64::consts::PI * t / period).sin()])
            .collect();
        let dt = times[1] - times[0];
        let w = Waveform {
            times,
            node_names: vec!["s".into()],
            node_values,
            source_names: vec![],
            source_currents: vec![],
        };
        let t_rise = measure_cross(&w, "s", 0.5, CrossDirection::Rising, 0.0).unwrap();
        let t_fall = measure_cross(&w, "s", 0.0, CrossDirection::Falling, t_rise).unwrap();
        assert!(
            (t_fall - period / 2.0).abs() <= dt,
            "half period {t_fall} vs {}",
            period / 2.0
        );
    }
}
