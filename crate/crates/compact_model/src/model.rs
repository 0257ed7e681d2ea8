//! Mobility law and the closed-form intrinsic drain current.
//!
//! The drain current follows from drifting the gate-induced sheet charge
//! with the power-law mobility: integrating mu(V) * (V_GT - V) over the
//! channel potential drop gives a (gamma + 2)-power expression. Two
//! smoothings keep it defined and C1 for all biases: a softplus on the
//! overdrive (subthreshold) and a rational clamp of V_DS at the saturation
//! point V_DS -> V_GTe.

use crate::params::{BiasPoint, CompactModelParams, DeviceGeometry, IVDataset, Polarity, Technology};
use crate::{CompactModelError, Result};

/// Exponent of the saturation clamp V_DSe = V_DS / (1 + (V_DS/V_GTe)^m)^(1/m).
const SAT_CLAMP_M: f64 = 4.0;

/// Numerically stable softplus: ln(1 + exp(x)).
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Signed overdrive for the device polarity: V_GS - V_th for N, V_th - V_GS for P.
fn raw_overdrive(params: &CompactModelParams, v_gs: f64) -> f64 {
    match params.polarity {
        Polarity::N => v_gs - params.v_th,
        Polarity::P => params.v_th - v_gs,
    }
}

/// Smoothed effective overdrive V_GTe = v_ss * ln(1 + exp(od / v_ss)).
///
/// Strictly positive for any finite bias, and converging to the raw
/// overdrive a few v_ss above threshold.
pub fn effective_overdrive(params: &CompactModelParams, v_gs: f64) -> f64 {
    let od = raw_overdrive(params, v_gs);
    params.v_ss_smooth * softplus(od / params.v_ss_smooth)
}

/// Inverse of [`effective_overdrive`]: the raw overdrive that produces a
/// requested effective overdrive. Useful for pinning test points.
pub fn overdrive_for_effective(params: &CompactModelParams, eff: f64) -> f64 {
    let y = eff / params.v_ss_smooth;
    // inverse softplus, stable for large y: ln(exp(y) - 1) = y + ln(1 - exp(-y))
    let x = if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        (y.exp() - 1.0).ln()
    };
    params.v_ss_smooth * x
}

/// Drain-side smoothing: V_DSe = V_DS / (1 + (V_DS/V_GTe)^m)^(1/m) for
/// V_DS >= 0. Approaches V_DS in deep triode and V_GTe in saturation.
pub fn effective_vds(v_ds: f64, v_gte: f64) -> f64 {
    debug_assert!(v_ds >= 0.0);
    if v_ds == 0.0 {
        return 0.0;
    }
    let r = v_ds / v_gte.max(f64::MIN_POSITIVE);
    // r can overflow to inf deep in subthreshold; the quotient still
    // resolves to 0 <= V_DSe <= V_GTe.
    v_ds / (1.0 + r.powf(SAT_CLAMP_M)).powf(1.0 / SAT_CLAMP_M)
}

/// Mobility law: mu = mu0 * (effective overdrive)^gamma.
///
/// mu0 is recovered exactly when the effective overdrive equals 1, and
/// gamma = 0 degenerates to a constant mobility.
pub fn mobility(params: &CompactModelParams, v_gs: f64) -> Result<f64> {
    params.validate()?;
    if !v_gs.is_finite() {
        return Err(CompactModelError::InvalidArgument(format!(
            "v_gs must be finite, got {v_gs}"
        )));
    }
    let eff = effective_overdrive(params, v_gs);
    Ok(params.mu0 * eff.powf(params.gamma))
}

/// Channel current of the N-type normal form (v_ds >= 0), without the floor.
fn channel_current_n(params: &CompactModelParams, geom: &DeviceGeometry, v_gs: f64, v_ds: f64) -> f64 {
    let p = params.gamma + 2.0;
    let k = geom.aspect() * params.mu0 * geom.cox_f_per_cm2 / p;
    let v_gte = {
        let od = v_gs - params.v_th;
        params.v_ss_smooth * softplus(od / params.v_ss_smooth)
    };
    let v_dse = effective_vds(v_ds, v_gte);
    // rounding can push v_dse one ulp past v_gte; clamp the remainder
    let rem = (v_gte - v_dse).max(0.0);
    k * (v_gte.powf(p) - rem.powf(p))
}

/// Intrinsic drain current.
///
/// N-type normal form for v_ds >= 0:
///   I_D = (W/L) * mu0 * Cox / (gamma+2) * [V_GTe^(g+2) - (V_GTe - V_DSe)^(g+2)] + i_floor
/// Negative v_ds uses source/drain exchange on the channel term; P-type is
/// the full mirror I_P(vgs, vds) = -I_N(-vgs, -vds | v_th -> -v_th).
pub fn drain_current(
    params: &CompactModelParams,
    geom: &DeviceGeometry,
    bias: &BiasPoint,
) -> Result<f64> {
    params.validate()?;
    geom.validate()?;
    if !(bias.v_gs.is_finite() && bias.v_ds.is_finite()) {
        return Err(CompactModelError::InvalidArgument(format!(
            "bias must be finite, got v_gs={}, v_ds={}",
            bias.v_gs, bias.v_ds
        )));
    }
    Ok(drain_current_unchecked(params, geom, bias.v_gs, bias.v_ds))
}

fn drain_current_unchecked(
    params: &CompactModelParams,
    geom: &DeviceGeometry,
    v_gs: f64,
    v_ds: f64,
) -> f64 {
    match params.polarity {
        Polarity::N => {
            let ch = if v_ds >= 0.0 {
                channel_current_n(params, geom, v_gs, v_ds)
            } else {
                // source/drain exchange: gate references the low terminal
                -channel_current_n(params, geom, v_gs - v_ds, -v_ds)
            };
            ch + params.i_floor
        }
        Polarity::P => {
            let mirrored = CompactModelParams {
                polarity: Polarity::N,
                v_th: -params.v_th,
                ..*params
            };
            -drain_current_unchecked(&mirrored, geom, -v_gs, -v_ds)
        }
    }
}

/// Drain current together with analytic partial derivatives
/// (dI/dV_GS, dI/dV_DS), as needed by Newton-based circuit solvers.
pub fn drain_current_with_derivatives(
    params: &CompactModelParams,
    geom: &DeviceGeometry,
    bias: &BiasPoint,
) -> Result<(f64, f64, f64)> {
    params.validate()?;
    geom.validate()?;
    if !(bias.v_gs.is_finite() && bias.v_ds.is_finite()) {
        return Err(CompactModelError::InvalidArgument(format!(
            "bias must be finite, got v_gs={}, v_ds={}",
            bias.v_gs, bias.v_ds
        )));
    }
    Ok(derivatives_unchecked(params, geom, bias.v_gs, bias.v_ds))
}

fn derivatives_unchecked(
    params: &CompactModelParams,
    geom: &DeviceGeometry,
    v_gs: f64,
    v_ds: f64,
) -> (f64, f64, f64) {
    match params.polarity {
        Polarity::N => {
            if v_ds >= 0.0 {
                let (i, di_dgs, di_dds) = n_normal_derivatives(params, geom, v_gs, v_ds);
                (i + params.i_floor, di_dgs, di_dds)
            } else {
                // I(vgs, vds) = -I_n(vgs - vds, -vds)
                let (i, di_dgs, di_dds) = n_normal_derivatives(params, geom, v_gs - v_ds, -v_ds);
                (-i + params.i_floor, -di_dgs, di_dgs + di_dds)
            }
        }
        Polarity::P => {
            let mirrored = CompactModelParams {
                polarity: Polarity::N,
                v_th: -params.v_th,
                ..*params
            };
            let (i, di_dgs, di_dds) = derivatives_unchecked(&mirrored, geom, -v_gs, -v_ds);
            (-i, di_dgs, di_dds)
        }
    }
}

/// Current and derivatives of the N-type normal form (v_ds >= 0), floor excluded.
fn n_normal_derivatives(
    params: &CompactModelParams,
    geom: &DeviceGeometry,
    v_gs: f64,
    v_ds: f64,
) -> (f64, f64, f64) {
    let p = params.gamma + 2.0;
    let k = geom.aspect() * params.mu0 * geom.cox_f_per_cm2 / p;
    let vss = params.v_ss_smooth;
    let od = v_gs - params.v_th;
    let g = vss * softplus(od / vss);
    let dg_dvgs = sigmoid(od / vss);

    let m = SAT_CLAMP_M;
    let g_safe = g.max(f64::MIN_POSITIVE);
    let r = v_ds / g_safe;
    let rm = r.powf(m);
    let de = effective_vds(v_ds, g);
    // frac = r^m / (1 + r^m), stable when rm overflows to inf
    let frac = if rm.is_infinite() { 1.0 } else { rm / (1.0 + rm) };
    let cl = if v_ds > 0.0 { de / v_ds } else { 1.0 };
    // dDe/dVds at fixed G, dDe/dG at fixed Vds
    let dde_dvds = cl * (1.0 - frac);
    let dde_dg = de * frac / g_safe;

    let rem = (g - de).max(0.0);
    let i = k * (g.powf(p) - rem.powf(p));
    let di_dg = k * p * (g.powf(p - 1.0) - rem.powf(p - 1.0) * (1.0 - dde_dg));
    let di_dde = k * p * rem.powf(p - 1.0);
    let di_dvgs = di_dg * dg_dvgs;
    let di_dvds = di_dde * dde_dvds;
    (i, di_dvgs, di_dvds)
}

/// Batch evaluation over a bias grid, one point per (v_gs, v_ds) pair.
pub fn iv_surface(
    params: &CompactModelParams,
    geom: &DeviceGeometry,
    v_gs_list: &[f64],
    v_ds_list: &[f64],
    technology: Technology,
) -> Result<IVDataset> {
    if v_gs_list.is_empty() || v_ds_list.is_empty() {
        return Err(CompactModelError::InvalidArgument(
            "bias grids must be nonempty".into(),
        ));
    }
    let mut points = Vec::with_capacity(v_gs_list.len() * v_ds_list.len());
    for &v_gs in v_gs_list {
        for &v_ds in v_ds_list {
            let bias = BiasPoint::new(v_gs, v_ds);
            let i_d = drain_current(params, geom, &bias)?;
            points.push((bias, i_d));
        }
    }
    Ok(IVDataset {
        geometry: *geom,
        technology,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n_params() -> CompactModelParams {
        CompactModelParams::new(2.0, 0.3, 1.0, Polarity::N).unwrap()
    }

    fn geom() -> DeviceGeometry {
        DeviceGeometry::new(125.0, 25.0, 1.0e-8).unwrap()
    }

    #[test]
    fn mobility_is_mu0_at_unit_effective_overdrive() {
        let p = n_params();
        let od = overdrive_for_effective(&p, 1.0);
        let mu = mobility(&p, p.v_th + od).unwrap();
        assert!((mu - 2.0).abs() < 1e-12, "mu = {mu}");
    }

    #[test]
    fn mobility_gamma_zero_is_constant() {
        let p = CompactModelParams::new(3.5, 0.0, 0.2, Polarity::N).unwrap();
        for v_gs in [-2.0, 0.0, 0.2, 1.7, 5.0] {
            assert_eq!(mobility(&p, v_gs).unwrap(), 3.5);
        }
    }

    #[test]
    fn mobility_power_law() {
        // mu0=1, gamma=2, effective overdrive 3 -> mu = 9
        let p = CompactModelParams::new(1.0, 2.0, 0.0, Polarity::N).unwrap();
        let od = overdrive_for_effective(&p, 3.0);
        let mu = mobility(&p, od).unwrap();
        assert!((mu - 9.0).abs() < 1e-11, "mu = {mu}");
    }

    #[test]
    fn mobility_positive_below_threshold() {
        let p = n_params();
        let mu = mobility(&p, p.v_th - 3.0).unwrap();
        assert!(mu > 0.0);
    }

    #[test]
    fn mobility_rejects_non_finite() {
        let p = n_params();
        assert!(mobility(&p, f64::NAN).is_err());
        assert!(mobility(&p, f64::INFINITY).is_err());
    }

    #[test]
    fn current_at_zero_vds_is_floor() {
        let p = n_params().with_floor(1e-12);
        let i = drain_current(&p, &geom(), &BiasPoint::new(3.0, 0.0)).unwrap();
        assert_eq!(i, 1e-12);
    }

    #[test]
    fn gamma_zero_square_law() {
        // V_GTe = 2 exactly; compare against the textbook square law on the
        // smoothed biases.
        let p = CompactModelParams::new(1.0, 0.0, 0.5, Polarity::N).unwrap();
        let g = DeviceGeometry::new(5.0, 1.0, 1.0e-8).unwrap();
        let v_gs = p.v_th + overdrive_for_effective(&p, 2.0);
        let v_gte = effective_overdrive(&p, v_gs);
        assert!((v_gte - 2.0).abs() < 1e-12);
        let v_ds = 0.5;
        let v_dse = effective_vds(v_ds, v_gte);
        let i = drain_current(&p, &g, &BiasPoint::new(v_gs, v_ds)).unwrap();
        let square = g.aspect() * p.mu0 * g.cox_f_per_cm2 * (v_gte * v_dse - v_dse * v_dse / 2.0);
        assert!(
            (i - square).abs() <= 1e-12 * square.abs(),
            "i = {i}, square = {square}"
        );
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let g = geom();
        for (pol, vth) in [(Polarity::N, 0.8), (Polarity::P, -0.8)] {
            let p = CompactModelParams::new(1.7, 0.6, vth, pol)
                .unwrap()
                .with_floor(1e-13);
            for (v_gs, v_ds) in [
                (2.0, 1.0),
                (2.0, -0.3),
                (0.5, 0.05),
                (-1.0, 2.0),
                (-2.0, -1.5),
            ] {
                let (_, di_dgs, di_dds) =
                    drain_current_with_derivatives(&p, &g, &BiasPoint::new(v_gs, v_ds)).unwrap();
                let h = 1e-6;
                let ip = drain_current(&p, &g, &BiasPoint::new(v_gs + h, v_ds)).unwrap();
                let im = drain_current(&p, &g, &BiasPoint::new(v_gs - h, v_ds)).unwrap();
                let fd_gs = (ip - im) / (2.0 * h);
                let ip = drain_current(&p, &g, &BiasPoint::new(v_gs, v_ds + h)).unwrap();
                let im = drain_current(&p, &g, &BiasPoint::new(v_gs, v_ds - h)).unwrap();
                let fd_ds = (ip - im) / (2.0 * h);
                let scale = fd_gs.abs().max(fd_ds.abs()).max(1e-15);
                assert!(
                    (di_dgs - fd_gs).abs() <= 1e-5 * scale,
                    "dI/dVgs mismatch at ({v_gs},{v_ds}) {pol:?}: {di_dgs} vs {fd_gs}"
                );
                assert!(
                    (di_dds - fd_ds).abs() <= 1e-5 * scale,
                    "dI/dVds mismatch at ({v_gs},{v_ds}) {pol:?}: {di_dds} vs {fd_ds}"
                );
            }
        }
    }

    #[test]
    fn iv_surface_single_point_at_zero_vds() {
        let p = n_params().with_floor(2e-12);
        let ds = iv_surface(&p, &geom(), &[1.5], &[0.0], Technology::Cnt).unwrap();
        assert_eq!(ds.points.len(), 1);
        assert_eq!(ds.points[0].1, 2e-12);
    }

    #[test]
    fn iv_surface_matches_pointwise_calls() {
        let p = n_params();
        let g = geom();
        let vgs = [0.0, 1.0, 2.0];
        let vds = [0.0, 0.5, 1.0, 3.0];
        let ds = iv_surface(&p, &g, &vgs, &vds, Technology::Cnt).unwrap();
        assert_eq!(ds.points.len(), 12);
        for (bias, i) in &ds.points {
            let direct = drain_current(&p, &g, bias).unwrap();
            assert_eq!(*i, direct);
        }
    }

    #[test]
    fn iv_surface_rejects_empty_grid() {
        let p = n_params();
        assert!(iv_surface(&p, &geom(), &[], &[0.0], Technology::Cnt).is_err());
    }

    #[test]
    fn vds_sweep_monotone_n_type() {
        let p = n_params();
        let g = geom();
        let mut last = f64::NEG_INFINITY;
        for k in 0..50 {
            let v_ds = 4.0 * k as f64 / 49.0;
            let i = drain_current(&p, &g, &BiasPoint::new(2.5, v_ds)).unwrap();
            assert!(i >= last - 1e-18, "non-monotone at v_ds={v_ds}");
            last = i;
        }
    }
}
