//! Netlist data model and canonical printing.
//!
//! Grammar (case-insensitive keywords, `*` comments, SI value suffixes):
//!   M<name> d g s <model> W=<um> L=<um>
//!   C<name> a b <farads>
//!   R<name> a b <ohms>
//!   V<name> a b DC <volts> | PWL(t1 v1 t2 v2 ...)
//!   X<name> node... <subckt>
//!   .model <name> <N|P> mu0= gamma= vth= cox= vss= ifloor=
//!   .subckt <name> pins... / .ends
//!
//! W and L are micrometers; cox is F/cm^2.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use compact_model::{CompactModelParams, Polarity};
use serde::{Deserialize, Serialize};

use crate::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub name: String,
    pub polarity: Polarity,
    pub mu0: f64,
    pub gamma: f64,
    pub vth: f64,
    /// Gate unit capacitance (F/cm^2).
    pub cox: f64,
    pub vss: f64,
    pub ifloor: f64,
}

impl ModelCard {
    pub fn params(&self) -> Result<CompactModelParams> {
        Ok(CompactModelParams::new(self.mu0, self.gamma, self.vth, self.polarity)?
            .with_smoothing(self.vss)
            .with_floor(self.ifloor))
    }

    /// Corner overrides: replace threshold voltage (sign follows polarity)
    /// and gate capacitance.
    pub fn with_corner(&self, vth_magnitude: f64, cox: f64) -> Self {
        let vth = match self.polarity {
            Polarity::N => vth_magnitude,
            Polarity::P => -vth_magnitude,
        };
        Self {
            vth,
            cox,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    Dc(f64),
    /// (time, value) breakpoints; value holds before the first and after
    /// the last breakpoint.
    Pwl(Vec<(f64, f64)>),
}

impl SourceKind {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            SourceKind::Dc(v) => *v,
            SourceKind::Pwl(points) => {
                if points.is_empty() {
                    return 0.0;
                }
                if t <= points[0].0 {
                    return points[0].1;
                }
                for pair in points.windows(2) {
                    let (t0, v0) = pair[0];
                    let (t1, v1) = pair[1];
                    if t <= t1 {
                        if t1 == t0 {
                            return v1;
                        }
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                points.last().unwrap().1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Element {
    Mos {
        name: String,
        drain: String,
        gate: String,
        source: String,
        model: String,
        width_um: f64,
        length_um: f64,
    },
    Capacitor {
        name: String,
        a: String,
        b: String,
        farads: f64,
    },
    Resistor {
        name: String,
        a: String,
        b: String,
        ohms: f64,
    },
    VSource {
        name: String,
        pos: String,
        neg: String,
        kind: SourceKind,
    },
    Instance {
        name: String,
        nodes: Vec<String>,
        subckt: String,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Mos { name, .. }
            | Element::Capacitor { name, .. }
            | Element::Resistor { name, .. }
            | Element::VSource { name, .. }
            | Element::Instance { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subckt {
    pub name: String,
    pub pins: Vec<String>,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Netlist {
    pub models: BTreeMap<String, ModelCard>,
    pub subckts: BTreeMap<String, Subckt>,
    pub elements: Vec<Element>,
}

impl Netlist {
    pub fn model(&self, name: &str) -> Result<&ModelCard> {
        self.models
            .get(name)
            .ok_or_else(|| SimError::Netlist(format!("undeclared model `{name}`")))
    }
}

fn write_element(out: &mut String, e: &Element) {
    match e {
        Element::Mos {
            name,
            drain,
            gate,
            source,
            model,
            width_um,
            length_um,
        } => {
            writeln!(out, "{name} {drain} {gate} {source} {model} W={width_um} L={length_um}")
                .unwrap();
        }
        Element::Capacitor { name, a, b, farads } => {
            writeln!(out, "{name} {a} {b} {farads}").unwrap();
        }
        Element::Resistor { name, a, b, ohms } => {
            writeln!(out, "{name} {a} {b} {ohms}").unwrap();
        }
        Element::VSource {
            name,
            pos,
            neg,
            kind,
        } => match kind {
            SourceKind::Dc(v) => writeln!(out, "{name} {pos} {neg} DC {v}").unwrap(),
            SourceKind::Pwl(points) => {
                write!(out, "{name} {pos} {neg} PWL(").unwrap();
                for (k, (t, v)) in points.iter().enumerate() {
                    if k > 0 {
                        out.push(' ');
                    }
                    write!(out, "{t} {v}").unwrap();
                }
                out.push_str(")\n");
            }
        },
        Element::Instance {
            name,
            nodes,
            subckt,
        } => {
            write!(out, "{name}").unwrap();
            for n in nodes {
                write!(out, " {n}").unwrap();
            }
            writeln!(out, " {subckt}").unwrap();
        }
    }
}

/// Canonical text form; `parse_netlist(print_netlist(n))` is structurally
/// identical to `n`.
pub fn print_netlist(netlist: &Netlist) -> String {
    let mut out = String::new();
    for model in netlist.models.values() {
        writeln!(
            out,
            ".model {} {} mu0={} gamma={} vth={} cox={} vss={} ifloor={}",
            model.name,
            model.polarity,
            model.mu0,
            model.gamma,
            model.vth,
            model.cox,
            model.vss,
            model.ifloor
        )
        .unwrap();
    }
    for sub in netlist.subckts.values() {
        write!(out, ".subckt {}", sub.name).unwrap();
        for p in &sub.pins {
            write!(out, " {p}").unwrap();
        }
        out.push('\n');
        for e in &sub.elements {
            write_element(&mut out, e);
        }
        out.push_str(".ends\n");
    }
    for e in &netlist.elements {
        write_element(&mut out, e);
    }
    out
}
