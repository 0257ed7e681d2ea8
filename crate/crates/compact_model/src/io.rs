//! I-V CSV files and extraction reports.
//!
//! Data files are plain CSV with a `v_gs,v_ds,i_d` header, preceded by a
//! sidecar block of `# key=value` lines carrying geometry and technology.

use std::fmt::Write as _;
use std::path::Path;

use crate::params::{BiasPoint, DeviceGeometry, IVDataset, Technology};
use crate::{CompactModelError, CompactModelParams, FitReport, Result};

/// Serialize a dataset to the CSV-with-sidecar format.
pub fn write_iv_csv(data: &IVDataset) -> String {
    let mut out = String::new();
    writeln!(out, "# width_um={}", data.geometry.width_um).unwrap();
    writeln!(out, "# length_um={}", data.geometry.length_um).unwrap();
    writeln!(out, "# cox_f_per_cm2={}", data.geometry.cox_f_per_cm2).unwrap();
    writeln!(out, "# tech={}", data.technology).unwrap();
    writeln!(out, "v_gs,v_ds,i_d").unwrap();
    for (bias, i_d) in &data.points {
        writeln!(out, "{},{},{}", bias.v_gs, bias.v_ds, i_d).unwrap();
    }
    out
}

/// Parse the CSV-with-sidecar format produced by [`write_iv_csv`].
pub fn read_iv_csv(text: &str) -> Result<IVDataset> {
    let mut width = None;
    let mut length = None;
    let mut cox = None;
    let mut tech = Technology::Other;
    let mut points = Vec::new();
    let mut saw_header = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once('=') {
                let key = key.trim();
                let value = value.trim();
                match key {
                    "width_um" => width = Some(parse_num(value, lineno)?),
                    "length_um" => length = Some(parse_num(value, lineno)?),
                    "cox_f_per_cm2" => cox = Some(parse_num(value, lineno)?),
                    "tech" => {
                        tech = value.parse().map_err(|_| CompactModelError::Parse {
                            line: lineno,
                            message: format!("unknown tech `{value}`"),
                        })?
                    }
                    _ => {} // unknown sidecar keys are ignored
                }
            }
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["v_gs", "v_ds", "i_d"] {
                return Err(CompactModelError::Parse {
                    line: lineno,
                    message: format!("expected header `v_gs,v_ds,i_d`, got `{line}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(CompactModelError::Parse {
                line: lineno,
                message: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        let v_gs = parse_num(cols[0], lineno)?;
        let v_ds = parse_num(cols[1], lineno)?;
        let i_d = parse_num(cols[2], lineno)?;
        points.push((BiasPoint::new(v_gs, v_ds), i_d));
    }

    let geometry = DeviceGeometry::new(
        width.ok_or_else(|| missing("width_um"))?,
        length.ok_or_else(|| missing("length_um"))?,
        cox.ok_or_else(|| missing("cox_f_per_cm2"))?,
    )?;
    let data = IVDataset {
        geometry,
        technology: tech,
        points,
    };
    data.validate()?;
    Ok(data)
}

fn missing(key: &str) -> CompactModelError {
    CompactModelError::Parse {
        line: 0,
        message: format!("missing sidecar key `{key}`"),
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.parse().map_err(|_| CompactModelError::Parse {
        line,
        message: format!("not a number: `{s}`"),
    })
}

/// Fitted parameters plus fit quality, as a key=value report.
#[derive(Debug, Clone)]
pub struct ExtractionReport {
    pub params: CompactModelParams,
    pub fit: FitReport,
}

impl ExtractionReport {
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        writeln!(out, "mu0={}", self.params.mu0).unwrap();
        writeln!(out, "gamma={}", self.params.gamma).unwrap();
        writeln!(out, "v_th={}", self.params.v_th).unwrap();
        writeln!(out, "polarity={}", self.params.polarity).unwrap();
        writeln!(out, "v_ss_smooth={}", self.params.v_ss_smooth).unwrap();
        writeln!(out, "i_floor={}", self.params.i_floor).unwrap();
        writeln!(out, "rmse_log10={}", self.fit.rmse_log10).unwrap();
        writeln!(out, "rmse_relative={}", self.fit.rmse_relative).unwrap();
        writeln!(out, "iterations={}", self.fit.iterations).unwrap();
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_key_value())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::iv_surface;
    use crate::params::Polarity;

    #[test]
    fn csv_round_trip() {
        let p = CompactModelParams::new(1.5, 0.4, 0.7, Polarity::N).unwrap();
        let g = DeviceGeometry::new(125.0, 25.0, 1.15e-8).unwrap();
        let ds = iv_surface(&p, &g, &[0.0, 1.0, 2.0], &[0.1, 1.0], Technology::Igzo).unwrap();
        let text = write_iv_csv(&ds);
        let back = read_iv_csv(&text).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn rejects_bad_header() {
        let text = "# width_um=1\n# length_um=1\n# cox_f_per_cm2=1e-8\nv_gs,v_ds\n";
        assert!(matches!(
            read_iv_csv(text),
            Err(CompactModelError::Parse { .. })
        ));
    }

    #[test]
    fn reports_line_numbers() {
        let text = "# width_um=1\n# length_um=1\n# cox_f_per_cm2=1e-8\nv_gs,v_ds,i_d\n1,2,notanumber\n";
        match read_iv_csv(text) {
            Err(CompactModelError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
