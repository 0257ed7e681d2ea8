use serde::{Deserialize, Serialize};

use crate::CompactModelError;

/// Channel polarity of a TFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    N,
    P,
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Polarity::N => write!(f, "N"),
            Polarity::P => write!(f, "P"),
        }
    }
}

/// Technology family an I-V dataset was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technology {
    Cnt,
    Igzo,
    Ltps,
    Other,
}

impl std::fmt::Display for Technology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Technology::Cnt => write!(f, "CNT"),
            Technology::Igzo => write!(f, "IGZO"),
            Technology::Ltps => write!(f, "LTPS"),
            Technology::Other => write!(f, "other"),
        }
    }
}

impl std::str::FromStr for Technology {
    type Err = CompactModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "CNT" => Ok(Technology::Cnt),
            "IGZO" => Ok(Technology::Igzo),
            "LTPS" => Ok(Technology::Ltps),
            "OTHER" => Ok(Technology::Other),
            other => Err(CompactModelError::InvalidArgument(format!(
                "unknown technology tag `{other}`"
            ))),
        }
    }
}

/// Parameters of the unified TFT model.
///
/// `mu0` is the effective mobility at unit overdrive, `gamma` the
/// field-enhancement exponent, and `v_th` the threshold voltage.
/// `v_ss_smooth` controls the softplus that keeps the overdrive positive
/// through subthreshold; `i_floor` is a bias-independent leakage floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactModelParams {
    /// Effective mobility at |V_G - V_th| = 1 (cm^2/V/s).
    pub mu0: f64,
    /// Field-enhancement exponent for mobility, >= 0.
    pub gamma: f64,
    /// Threshold voltage (V).
    pub v_th: f64,
    pub polarity: Polarity,
    /// Subthreshold smoothing voltage (V), > 0.
    pub v_ss_smooth: f64,
    /// Leakage floor current (A), >= 0.
    pub i_floor: f64,
}

impl CompactModelParams {
    pub fn new(
        mu0: f64,
        gamma: f64,
        v_th: f64,
        polarity: Polarity,
    ) -> Result<Self, CompactModelError> {
        let p = Self {
            mu0,
            gamma,
            v_th,
            polarity,
            v_ss_smooth: 0.05,
            i_floor: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_smoothing(mut self, v_ss_smooth: f64) -> Self {
        self.v_ss_smooth = v_ss_smooth;
        self
    }

    pub fn with_floor(mut self, i_floor: f64) -> Self {
        self.i_floor = i_floor;
        self
    }

    pub fn validate(&self) -> Result<(), CompactModelError> {
        let fields = [
            ("mu0", self.mu0),
            ("gamma", self.gamma),
            ("v_th", self.v_th),
            ("v_ss_smooth", self.v_ss_smooth),
            ("i_floor", self.i_floor),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(CompactModelError::InvalidArgument(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if self.mu0 <= 0.0 {
            return Err(CompactModelError::InvalidArgument(format!(
                "mu0 must be > 0, got {}",
                self.mu0
            )));
        }
        if self.gamma < 0.0 {
            return Err(CompactModelError::InvalidArgument(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if self.v_ss_smooth <= 0.0 {
            return Err(CompactModelError::InvalidArgument(format!(
                "v_ss_smooth must be > 0, got {}",
                self.v_ss_smooth
            )));
        }
        if self.i_floor < 0.0 {
            return Err(CompactModelError::InvalidArgument(format!(
                "i_floor must be >= 0, got {}",
                self.i_floor
            )));
        }
        Ok(())
    }
}

/// Planar device geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    /// Channel width (um).
    pub width_um: f64,
    /// Channel length (um).
    pub length_um: f64,
    /// Gate unit capacitance (F/cm^2).
    pub cox_f_per_cm2: f64,
}

impl DeviceGeometry {
    pub fn new(width_um: f64, length_um: f64, cox_f_per_cm2: f64) -> Result<Self, CompactModelError> {
        let g = Self {
            width_um,
            length_um,
            cox_f_per_cm2,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), CompactModelError> {
        for (name, v) in [
            ("width_um", self.width_um),
            ("length_um", self.length_um),
            ("cox_f_per_cm2", self.cox_f_per_cm2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CompactModelError::InvalidArgument(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// W/L aspect ratio (dimensionless).
    pub fn aspect(&self) -> f64 {
        self.width_um / self.length_um
    }
}

/// One bias point. Any finite values are legal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub v_gs: f64,
    pub v_ds: f64,
}

impl BiasPoint {
    pub fn new(v_gs: f64, v_ds: f64) -> Self {
        Self { v_gs, v_ds }
    }
}

/// A set of (bias, drain current) samples for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IVDataset {
    pub geometry: DeviceGeometry,
    pub technology: Technology,
    pub points: Vec<(BiasPoint, f64)>,
}

impl IVDataset {
    pub fn validate(&self) -> Result<(), CompactModelError> {
        self.geometry.validate()?;
        if self.points.is_empty() {
            return Err(CompactModelError::InvalidArgument(
                "I-V dataset must be nonempty".into(),
            ));
        }
        for (bias, i_d) in &self.points {
            if !(bias.v_gs.is_finite() && bias.v_ds.is_finite() && i_d.is_finite()) {
                return Err(CompactModelError::InvalidArgument(format!(
                    "non-finite I-V sample (v_gs={}, v_ds={}, i_d={})",
                    bias.v_gs, bias.v_ds, i_d
                )));
            }
        }
        Ok(())
    }

    /// Distinct gate voltages present in the data (sorted, deduped at 1 uV).
    pub fn distinct_v_gs(&self) -> Vec<f64> {
        let mut vs: Vec<f64> = self.points.iter().map(|(b, _)| b.v_gs).collect();
        vs.sort_by(f64::total_cmp);
        vs.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        vs
    }
}
