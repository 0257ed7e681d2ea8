//! Subcircuit expansion into a flat device list over indexed nodes, plus
//! the DC-path-to-ground validity check.

use std::collections::BTreeMap;

use compact_model::DeviceGeometry;

use crate::netlist::{Element, ModelCard, Netlist, SourceKind};
use crate::{Result, SimError};

const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone)]
pub enum FlatDevice {
    Mos {
        name: String,
        drain: Option<usize>,
        gate: Option<usize>,
        source: Option<usize>,
        card: ModelCard,
        geometry: DeviceGeometry,
    },
    Capacitor {
        name: String,
        a: Option<usize>,
        b: Option<usize>,
        farads: f64,
    },
    Resistor {
        name: String,
        a: Option<usize>,
        b: Option<usize>,
        ohms: f64,
    },
    VSource {
        name: String,
        pos: Option<usize>,
        neg: Option<usize>,
        kind: SourceKind,
    },
}

/// Flat circuit: node 0 ("0") is ground and is represented as `None`.
#[derive(Debug, Clone)]
pub struct FlatCircuit {
    pub node_names: Vec<String>,
    pub devices: Vec<FlatDevice>,
    /// Indices into `devices` of the voltage sources, in branch order.
    pub source_branches: Vec<usize>,
}

impl FlatCircuit {
    pub fn num_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        let lower = name.to_ascii_lowercase();
        self.node_names.iter().position(|n| *n == lower)
    }

    pub fn source_branch(&self, name: &str) -> Option<usize> {
        let lower = name.to_ascii_lowercase();
        self.source_branches
            .iter()
            .position(|&d| matches!(&self.devices[d], FlatDevice::VSource { name, .. } if *name == lower))
    }
}

struct Flattener<'a> {
    netlist: &'a Netlist,
    node_ids: BTreeMap<String, usize>,
    node_names: Vec<String>,
    devices: Vec<FlatDevice>,
}

impl Flattener<'_> {
    fn node(&mut self, name: &str) -> Option<usize> {
        if name == "0" {
            return None;
        }
        if let Some(&id) = self.node_ids.get(name) {
            return Some(id);
        }
        let id = self.node_names.len();
        self.node_ids.insert(name.to_string(), id);
        self.node_names.push(name.to_string());
        Some(id)
    }

    fn expand(
        &mut self,
        elements: &[Element],
        prefix: &str,
        pin_map: &BTreeMap<String, String>,
        depth: usize,
    ) -> Result<()> {
        if depth > MAX_DEPTH {
            return Err(SimError::Netlist(
                "subcircuit nesting too deep (cycle?)".into(),
            ));
        }
        for e in elements {
            let resolve = |local: &str| -> String {
                if local == "0" {
                    return "0".to_string();
                }
                if let Some(bound) = pin_map.get(local) {
                    return bound.clone();
                }
                if prefix.is_empty() {
                    local.to_string()
                } else {
                    format!("{prefix}.{local}")
                }
            };
            let full_name = |n: &str| {
                if prefix.is_empty() {
                    n.to_string()
                } else {
                    format!("{prefix}.{n}")
                }
            };
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
                    let card = self.netlist.model(model)?.clone();
                    let geometry = DeviceGeometry::new(*width_um, *length_um, card.cox)?;
                    let (d, g, s) = (resolve(drain), resolve(gate), resolve(source));
                    let device = FlatDevice::Mos {
                        name: full_name(name),
                        drain: self.node(&d),
                        gate: self.node(&g),
                        source: self.node(&s),
                        card,
                        geometry,
                    };
                    self.devices.push(device);
                }
                Element::Capacitor { name, a, b, farads } => {
                    let (ra, rb) = (resolve(a), resolve(b));
                    let device = FlatDevice::Capacitor {
                        name: full_name(name),
                        a: self.node(&ra),
                        b: self.node(&rb),
                        farads: *farads,
                    };
                    self.devices.push(device);
                }
                Element::Resistor { name, a, b, ohms } => {
                    let (ra, rb) = (resolve(a), resolve(b));
                    let device = FlatDevice::Resistor {
                        name: full_name(name),
                        a: self.node(&ra),
                        b: self.node(&rb),
                        ohms: *ohms,
                    };
                    self.devices.push(device);
                }
                Element::VSource {
                    name,
                    pos,
                    neg,
                    kind,
                } => {
                    let (rp, rn) = (resolve(pos), resolve(neg));
                    let device = FlatDevice::VSource {
                        name: full_name(name),
                        pos: self.node(&rp),
                        neg: self.node(&rn),
                        kind: kind.clone(),
                    };
                    self.devices.push(device);
                }
                Element::Instance {
                    name,
                    nodes,
                    subckt,
                } => {
                    let sub = self.netlist.subckts.get(subckt).ok_or_else(|| {
                        SimError::Netlist(format!("undeclared subckt `{subckt}`"))
                    })?;
                    if sub.pins.len() != nodes.len() {
                        return Err(SimError::Netlist(format!(
                            "instance `{name}` has {} nodes, subckt `{subckt}` has {} pins",
                            nodes.len(),
                            sub.pins.len()
                        )));
                    }
                    let mut inner_map = BTreeMap::new();
                    for (pin, outer) in sub.pins.iter().zip(nodes) {
                        inner_map.insert(pin.clone(), resolve(outer));
                    }
                    let inner_prefix = full_name(name);
                    self.expand(&sub.elements, &inner_prefix, &inner_map, depth + 1)?;
                }
            }
        }
        Ok(())
    }
}

/// Expand subcircuits and index nodes. Fails if any node lacks a DC path
/// to ground through resistors, sources, or MOS channels.
pub fn flatten(netlist: &Netlist) -> Result<FlatCircuit> {
    let mut f = Flattener {
        netlist,
        node_ids: BTreeMap::new(),
        node_names: Vec::new(),
        devices: Vec::new(),
    };
    f.expand(&netlist.elements, "", &BTreeMap::new(), 0)?;

    let n = f.node_names.len();
    // union-find over nodes + ground (index n)
    let mut parent: Vec<usize> = (0..=n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut union = |parent: &mut Vec<usize>, a: Option<usize>, b: Option<usize>| {
        let ai = a.unwrap_or(n);
        let bi = b.unwrap_or(n);
        let (ra, rb) = (find(parent, ai), find(parent, bi));
        if ra != rb {
            parent[ra] = rb;
        }
    };
    for device in &f.devices {
        match device {
            FlatDevice::Resistor { a, b, .. } => union(&mut parent, *a, *b),
            FlatDevice::VSource { pos, neg, .. } => union(&mut parent, *pos, *neg),
            FlatDevice::Mos { drain, source, .. } => union(&mut parent, *drain, *source),
            FlatDevice::Capacitor { .. } => {} // open at DC
        }
    }
    let ground_root = find(&mut parent, n);
    for i in 0..n {
        if find(&mut parent, i) != ground_root {
            return Err(SimError::FloatingNode(f.node_names[i].clone()));
        }
    }

    let source_branches: Vec<usize> = f
        .devices
        .iter()
        .enumerate()
        .filter(|(_, d)| matches!(d, FlatDevice::VSource { .. }))
        .map(|(i, _)| i)
        .collect();
    Ok(FlatCircuit {
        node_names: f.node_names,
        devices: f.devices,
        source_branches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_netlist;

    #[test]
    fn flattens_hierarchy_with_prefixes() {
        let text = "\
.model nfet N mu0=2 gamma=0.3 vth=0.6 cox=1e-8
.subckt follower in out
Mn mid in 0 nfet W=2 L=1
Rl out mid 1k
.ends
Xa a b follower
Va a 0 DC 1
Rb b 0 1k
";
        let flat = flatten(&parse_netlist(text).unwrap()).unwrap();
        assert!(flat.node_names.contains(&"xa.mid".to_string()));
        assert_eq!(flat.devices.len(), 4);
    }

    #[test]
    fn floating_node_is_named() {
        let text = "\
V1 a 0 DC 1
C1 a float 1p
";
        match flatten(&parse_netlist(text).unwrap()) {
            Err(SimError::FloatingNode(node)) => assert_eq!(node, "float"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gate_only_node_is_floating() {
        let text = "\
.model nfet N mu0=2 gamma=0.3 vth=0.6 cox=1e-8
Mn out gatenode 0 nfet W=2 L=1
V1 out 0 DC 1
";
        match flatten(&parse_netlist(text).unwrap()) {
            Err(SimError::FloatingNode(node)) => assert_eq!(node, "gatenode"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
