//! Parameter extraction from I-V data.
//!
//! Fits (mu0, gamma, v_th) by damped Gauss-Newton on log10-current
//! residuals, which weights subthreshold and on-state decades comparably.
//! Eight multi-start points on a coarse (gamma, v_th) grid guard against
//! the local minima of the power-law exponent.

use crate::model::drain_current;
use crate::params::{CompactModelParams, IVDataset, Polarity};
use crate::{CompactModelError, Result};

/// Knobs held fixed during extraction.
#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    /// Smoothing voltage assumed by the fit model (V).
    pub v_ss_smooth: f64,
    /// Floor added inside the log to keep residuals finite (A).
    pub log_floor: f64,
    pub max_iterations: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            v_ss_smooth: 0.05,
            log_floor: 1e-13,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    /// RMSE of the log10-current residuals.
    pub rmse_log10: f64,
    /// RMSE of relative linear-current errors.
    pub rmse_relative: f64,
    /// Accepted Gauss-Newton iterations of the winning start.
    pub iterations: usize,
}

/// theta = (ln mu0, b, v_th), gamma = softplus(b) to keep gamma >= 0.
fn theta_to_params(theta: [f64; 3], polarity: Polarity, opts: &ExtractOptions) -> CompactModelParams {
    let gamma = softplus(theta[1]);
    CompactModelParams {
        mu0: theta[0].exp(),
        gamma,
        v_th: theta[2],
        polarity,
        v_ss_smooth: opts.v_ss_smooth,
        i_floor: 0.0,
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn inv_softplus(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        (y.exp() - 1.0).max(1e-300).ln()
    }
}

fn residuals(
    theta: [f64; 3],
    data: &IVDataset,
    polarity: Polarity,
    opts: &ExtractOptions,
    out: &mut [f64],
) {
    let params = theta_to_params(theta, polarity, opts);
    for (k, (bias, i_meas)) in data.points.iter().enumerate() {
        let i_model = drain_current(&params, &data.geometry, bias).unwrap_or(f64::NAN);
        out[k] = (i_model.abs() + opts.log_floor).log10() - (i_meas.abs() + opts.log_floor).log10();
    }
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Solve the 3x3 system (JtJ + lambda*diag(JtJ)) dx = -Jt r.
fn solve_damped_normal(jtj: [[f64; 3]; 3], jtr: [f64; 3], lambda: f64) -> Option<[f64; 3]> {
    let mut a = jtj;
    let mut b = [-jtr[0], -jtr[1], -jtr[2]];
    for i in 0..3 {
        a[i][i] += lambda * jtj[i][i].max(1e-12);
    }
    // Gaussian elimination with partial pivoting
    for col in 0..3 {
        let mut piv = col;
        for row in col + 1..3 {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for k in i + 1..3 {
            s -= a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

struct LmOutcome {
    theta: [f64; 3],
    sse: f64,
    iterations: usize,
}

fn levenberg_fit(
    start: [f64; 3],
    data: &IVDataset,
    polarity: Polarity,
    opts: &ExtractOptions,
) -> LmOutcome {
    let n = data.points.len();
    let mut theta = start;
    let mut r = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    residuals(theta, data, polarity, opts, &mut r);
    let mut cost = sse(&r);
    let mut lambda = 1e-3;
    let mut accepted = 0usize;

    let mut jac = vec![[0.0f64; 3]; n];
    for _ in 0..opts.max_iterations {
        // central-difference Jacobian
        for p in 0..3 {
            let h = 1e-6 * theta[p].abs().max(1.0);
            let mut tp = theta;
            tp[p] += h;
            let mut tm = theta;
            tm[p] -= h;
            residuals(tp, data, polarity, opts, &mut r_trial);
            let mut rp = vec![0.0; n];
            rp.copy_from_slice(&r_trial);
            residuals(tm, data, polarity, opts, &mut r_trial);
            for k in 0..n {
                jac[k][p] = (rp[k] - r_trial[k]) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for k in 0..n {
            for i in 0..3 {
                jtr[i] += jac[k][i] * r[k];
                for j in 0..3 {
                    jtj[i][j] += jac[k][i] * jac[k][j];
                }
            }
        }

        let mut improved = false;
        for _ in 0..12 {
            let Some(step) = solve_damped_normal(jtj, jtr, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            residuals(trial, data, polarity, opts, &mut r_trial);
            let trial_cost = sse(&r_trial);
            if trial_cost.is_finite() && trial_cost < cost {
                theta = trial;
                r.copy_from_slice(&r_trial);
                let rel_drop = (cost - trial_cost) / cost.max(1e-300);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted += 1;
                improved = true;
                if rel_drop < 1e-12 || step.iter().all(|s| s.abs() < 1e-11) {
                    return LmOutcome {
                        theta,
                        sse: cost,
                        iterations: accepted,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    LmOutcome {
        theta,
        sse: cost,
        iterations: accepted,
    }
}

/// Extract (mu0, gamma, v_th) from an I-V dataset.
///
/// Requires at least 10 points spanning at least 2 distinct gate voltages.
/// Deterministic: same data always yields the same fit.
pub fn extract_parameters(
    data: &IVDataset,
    polarity: Polarity,
    opts: &ExtractOptions,
) -> Result<(CompactModelParams, FitReport)> {
    data.validate()?;
    if data.points.len() < 10 {
        return Err(CompactModelError::UnfitData(format!(
            "need >= 10 I-V points, got {}",
            data.points.len()
        )));
    }
    let v_gs_values = data.distinct_v_gs();
    if v_gs_values.len() < 2 {
        return Err(CompactModelError::UnfitData(
            "need >= 2 distinct v_gs values".into(),
        ));
    }
    let max_abs_i = data
        .points
        .iter()
        .map(|(_, i)| i.abs())
        .fold(0.0f64, f64::max);
    if max_abs_i <= 0.0 {
        return Err(CompactModelError::UnfitData(
            "all currents are zero".into(),
        ));
    }

    let v_lo = *v_gs_values.first().unwrap();
    let v_hi = *v_gs_values.last().unwrap();
    let span = (v_hi - v_lo).max(1e-3);

    // 8 starts: coarse (gamma, v_th) grid; mu0 seeded from the peak current.
    let (peak_bias, peak_i) = data
        .points
        .iter()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(b, i)| (*b, *i))
        .unwrap();
    let mut best: Option<LmOutcome> = None;
    for &gamma0 in &[0.2, 1.0] {
        for frac in [0.15, 0.38, 0.62, 0.85] {
            let vth0 = match polarity {
                Polarity::N => v_lo + frac * span,
                Polarity::P => v_hi - frac * span,
            };
            let shape = {
                let params = CompactModelParams {
                    mu0: 1.0,
                    gamma: gamma0,
                    v_th: vth0,
                    polarity,
                    v_ss_smooth: opts.v_ss_smooth,
                    i_floor: 0.0,
                };
                drain_current(&params, &data.geometry, &peak_bias)
                    .unwrap_or(0.0)
                    .abs()
            };
            let mu0_init = if shape > 1e-300 {
                (peak_i.abs() / shape).clamp(1e-6, 1e6)
            } else {
                1.0
            };
            let start = [mu0_init.ln(), inv_softplus(gamma0), vth0];
            let outcome = levenberg_fit(start, data, polarity, opts);
            let better = match &best {
                None => true,
                Some(b) => outcome.sse < b.sse,
            };
            if better {
                best = Some(outcome);
            }
        }
    }
    let best = best.expect("at least one start ran");
    let params = theta_to_params(best.theta, polarity, opts);

    let n = data.points.len();
    let mut r = vec![0.0; n];
    residuals(best.theta, data, polarity, opts, &mut r);
    let rmse_log10 = (sse(&r) / n as f64).sqrt();
    let mut rel_sq = 0.0;
    for (bias, i_meas) in &data.points {
        let i_model = drain_current(&params, &data.geometry, bias)?;
        let rel = (i_model - i_meas) / (i_meas.abs() + opts.log_floor);
        rel_sq += rel * rel;
    }
    let report = FitReport {
        rmse_log10,
        rmse_relative: (rel_sq / n as f64).sqrt(),
        iterations: best.iterations,
    };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::iv_surface;
    use crate::params::{BiasPoint, DeviceGeometry, Technology};

    #[test]
    fn rejects_too_few_points() {
        let geometry = DeviceGeometry::new(10.0, 2.0, 1e-8).unwrap();
        let data = IVDataset {
            geometry,
            technology: Technology::Other,
            points: vec![(BiasPoint::new(1.0, 1.0), 1e-6); 5],
        };
        assert!(matches!(
            extract_parameters(&data, Polarity::N, &ExtractOptions::default()),
            Err(CompactModelError::UnfitData(_))
        ));
    }

    #[test]
    fn rejects_single_gate_voltage() {
        let geometry = DeviceGeometry::new(10.0, 2.0, 1e-8).unwrap();
        let points = (0..12)
            .map(|k| (BiasPoint::new(1.0, 0.1 * k as f64), 1e-6 * k as f64))
            .collect();
        let data = IVDataset {
            geometry,
            technology: Technology::Other,
            points,
        };
        assert!(matches!(
            extract_parameters(&data, Polarity::N, &ExtractOptions::default()),
            Err(CompactModelError::UnfitData(_))
        ));
    }

    #[test]
    fn rejects_all_zero_currents() {
        let geometry = DeviceGeometry::new(10.0, 2.0, 1e-8).unwrap();
        let points = (0..12)
            .map(|k| (BiasPoint::new(0.5 * k as f64, 1.0), 0.0))
            .collect();
        let data = IVDataset {
            geometry,
            technology: Technology::Other,
            points,
        };
        assert!(matches!(
            extract_parameters(&data, Polarity::N, &ExtractOptions::default()),
            Err(CompactModelError::UnfitData(_))
        ));
    }

    #[test]
    fn noiseless_round_trip_recovers_parameters() {
        let opts = ExtractOptions::default();
        let truth = CompactModelParams::new(1.5, 0.5, 0.8, Polarity::N)
            .unwrap()
            .with_smoothing(opts.v_ss_smooth);
        let geometry = DeviceGeometry::new(125.0, 25.0, 1.15e-8).unwrap();
        let v_gs: Vec<f64> = (0..9).map(|k| 0.0 + 0.5 * k as f64).collect();
        let v_ds: Vec<f64> = (1..7).map(|k| 0.5 * k as f64).collect();
        let data = iv_surface(&truth, &geometry, &v_gs, &v_ds, Technology::Cnt).unwrap();
        let (fit, report) = extract_parameters(&data, Polarity::N, &opts).unwrap();
        assert!(
            (fit.mu0 - truth.mu0).abs() / truth.mu0 < 0.02,
            "mu0 = {}",
            fit.mu0
        );
        assert!(
            (fit.gamma - truth.gamma).abs() / truth.gamma < 0.02,
            "gamma = {}",
            fit.gamma
        );
        assert!(
            (fit.v_th - truth.v_th).abs() / truth.v_th.abs() < 0.02,
            "v_th = {}",
            fit.v_th
        );
        assert!(report.rmse_log10 < 1e-4, "rmse {}", report.rmse_log10);
    }

    #[test]
    fn square_law_device_recovers_small_gamma() {
        let opts = ExtractOptions::default();
        let truth = CompactModelParams::new(2.0, 0.0, 0.5, Polarity::N)
            .unwrap()
            .with_smoothing(opts.v_ss_smooth);
        let geometry = DeviceGeometry::new(20.0, 4.0, 1e-8).unwrap();
        let v_gs: Vec<f64> = (0..10).map(|k| -0.5 + 0.4 * k as f64).collect();
        let v_ds: Vec<f64> = (1..6).map(|k| 0.4 * k as f64).collect();
        let data = iv_surface(&truth, &geometry, &v_gs, &v_ds, Technology::Other).unwrap();
        let (fit, _) = extract_parameters(&data, Polarity::N, &opts).unwrap();
        assert!(fit.gamma <= 0.05, "gamma = {}", fit.gamma);
    }
}
