//! Line-oriented netlist parser with SI suffix expansion.

use compact_model::Polarity;

use crate::netlist::{Element, ModelCard, Netlist, SourceKind, Subckt};
use crate::{Result, SimError};

fn syntax(line: usize, message: impl Into<String>) -> SimError {
    SimError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parse a numeric literal with an optional SI suffix
/// (f, p, n, u, m, k, meg). Suffixes expand as decimal exponents, so
/// `10f` parses to exactly the f64 nearest 1e-14.
pub fn parse_value(token: &str, line: usize) -> Result<f64> {
    let lower = token.to_ascii_lowercase();
    let (body, exp) = if let Some(stripped) = lower.strip_suffix("meg") {
        (stripped, 6i32)
    } else if let Some(stripped) = lower.strip_suffix('f') {
        (stripped, -15)
    } else if let Some(stripped) = lower.strip_suffix('p') {
        (stripped, -12)
    } else if let Some(stripped) = lower.strip_suffix('n') {
        (stripped, -9)
    } else if let Some(stripped) = lower.strip_suffix('u') {
        (stripped, -6)
    } else if let Some(stripped) = lower.strip_suffix('m') {
        (stripped, -3)
    } else if let Some(stripped) = lower.strip_suffix('k') {
        (stripped, 3)
    } else {
        (lower.as_str(), 0)
    };
    if exp != 0 && !body.is_empty() && !body.contains('e') {
        if let Ok(v) = format!("{body}e{exp}").parse() {
            return Ok(v);
        }
    }
    if exp != 0 {
        if let Ok(v) = body.parse::<f64>() {
            return Ok(v * 10f64.powi(exp));
        }
    }
    // a bare exponent form like `1e3` keeps its `e3` out of suffixing
    lower
        .parse()
        .map_err(|_| syntax(line, format!("not a number: `{token}`")))
}

fn keyvalue(token: &str, line: usize) -> Result<(String, String)> {
    token
        .split_once('=')
        .map(|(k, v)| (k.to_ascii_lowercase(), v.to_string()))
        .ok_or_else(|| syntax(line, format!("expected key=value, got `{token}`")))
}

struct LineLexer<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineLexer<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('*'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied();
        self.pos += 1;
        item
    }
}

fn parse_element(lineno: usize, tokens: &[&str]) -> Result<Element> {
    let name = tokens[0].to_ascii_lowercase();
    let first = name.chars().next().unwrap();
    match first {
        'm' => {
            if tokens.len() != 7 {
                return Err(syntax(
                    lineno,
                    "MOS element needs: M<name> d g s <model> W=<v> L=<v>",
                ));
            }
            let mut width = None;
            let mut length = None;
            for token in &tokens[5..7] {
                let (k, v) = keyvalue(token, lineno)?;
                match k.as_str() {
                    "w" => width = Some(parse_value(&v, lineno)?),
                    "l" => length = Some(parse_value(&v, lineno)?),
                    other => return Err(syntax(lineno, format!("unknown MOS key `{other}`"))),
                }
            }
            Ok(Element::Mos {
                name,
                drain: tokens[1].to_ascii_lowercase(),
                gate: tokens[2].to_ascii_lowercase(),
                source: tokens[3].to_ascii_lowercase(),
                model: tokens[4].to_ascii_lowercase(),
                width_um: width.ok_or_else(|| syntax(lineno, "missing W="))?,
                length_um: length.ok_or_else(|| syntax(lineno, "missing L="))?,
            })
        }
        'c' => {
            if tokens.len() != 4 {
                return Err(syntax(lineno, "capacitor needs: C<name> a b <farads>"));
            }
            Ok(Element::Capacitor {
                name,
                a: tokens[1].to_ascii_lowercase(),
                b: tokens[2].to_ascii_lowercase(),
                farads: parse_value(tokens[3], lineno)?,
            })
        }
        'r' => {
            if tokens.len() != 4 {
                return Err(syntax(lineno, "resistor needs: R<name> a b <ohms>"));
            }
            Ok(Element::Resistor {
                name,
                a: tokens[1].to_ascii_lowercase(),
                b: tokens[2].to_ascii_lowercase(),
                ohms: parse_value(tokens[3], lineno)?,
            })
        }
        'v' => {
            if tokens.len() < 4 {
                return Err(syntax(lineno, "source needs: V<name> a b DC <v> | PWL(...)"));
            }
            let pos = tokens[1].to_ascii_lowercase();
            let neg = tokens[2].to_ascii_lowercase();
            let spec = tokens[3..].join(" ");
            let upper = spec.to_ascii_uppercase();
            let kind = if let Some(rest) = upper.strip_prefix("DC") {
                SourceKind::Dc(parse_value(rest.trim(), lineno)?)
            } else if upper.starts_with("PWL") {
                let open = spec.find('(').ok_or_else(|| syntax(lineno, "PWL needs ("))?;
                let close = spec.rfind(')').ok_or_else(|| syntax(lineno, "PWL needs )"))?;
                let inner = &spec[open + 1..close];
                let values: Vec<f64> = inner
                    .split_whitespace()
                    .map(|t| parse_value(t, lineno))
                    .collect::<Result<_>>()?;
                if values.len() % 2 != 0 || values.is_empty() {
                    return Err(syntax(lineno, "PWL needs time/value pairs"));
                }
                let mut points = Vec::with_capacity(values.len() / 2);
                for pair in values.chunks(2) {
                    points.push((pair[0], pair[1]));
                }
                for w in points.windows(2) {
                    if w[1].0 < w[0].0 {
                        return Err(syntax(lineno, "PWL times must be non-decreasing"));
                    }
                }
                SourceKind::Pwl(points)
            } else {
                return Err(syntax(lineno, format!("unknown source spec `{spec}`")));
            };
            Ok(Element::VSource {
                name,
                pos,
                neg,
                kind,
            })
        }
        'x' => {
            if tokens.len() < 3 {
                return Err(syntax(lineno, "instance needs: X<name> nodes... <subckt>"));
            }
            let nodes = tokens[1..tokens.len() - 1]
                .iter()
                .map(|t| t.to_ascii_lowercase())
                .collect();
            Ok(Element::Instance {
                name,
                nodes,
                subckt: tokens[tokens.len() - 1].to_ascii_lowercase(),
            })
        }
        other => Err(syntax(lineno, format!("unknown element letter `{other}`"))),
    }
}

fn parse_model(lineno: usize, tokens: &[&str]) -> Result<ModelCard> {
    if tokens.len() < 3 {
        return Err(syntax(lineno, ".model needs: .model <name> <N|P> key=value..."));
    }
    let name = tokens[1].to_ascii_lowercase();
    let polarity = match tokens[2].to_ascii_uppercase().as_str() {
        "N" => Polarity::N,
        "P" => Polarity::P,
        other => return Err(syntax(lineno, format!("polarity must be N or P, got `{other}`"))),
    };
    let mut mu0 = None;
    let mut gamma = None;
    let mut vth = None;
    let mut cox = None;
    let mut vss = 0.05;
    let mut ifloor = 0.0;
    for token in &tokens[3..] {
        let (k, v) = keyvalue(token, lineno)?;
        let value = parse_value(&v, lineno)?;
        match k.as_str() {
            "mu0" => mu0 = Some(value),
            "gamma" => gamma = Some(value),
            "vth" => vth = Some(value),
            "cox" => cox = Some(value),
            "vss" => vss = value,
            "ifloor" => ifloor = value,
            other => return Err(syntax(lineno, format!("unknown model key `{other}`"))),
        }
    }
    Ok(ModelCard {
        name,
        polarity,
        mu0: mu0.ok_or_else(|| syntax(lineno, "missing mu0="))?,
        gamma: gamma.ok_or_else(|| syntax(lineno, "missing gamma="))?,
        vth: vth.ok_or_else(|| syntax(lineno, "missing vth="))?,
        cox: cox.ok_or_else(|| syntax(lineno, "missing cox="))?,
        vss,
        ifloor,
    })
}

/// Parse netlist text. Keywords are case-insensitive; node, model and
/// element names are lowercased.
pub fn parse_netlist(text: &str) -> Result<Netlist> {
    let mut lexer = LineLexer::new(text);
    let mut netlist = Netlist::default();
    while let Some((lineno, line)) = lexer.next() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let head = tokens[0].to_ascii_lowercase();
        if head == ".model" {
            let model = parse_model(lineno, &tokens)?;
            netlist.models.insert(model.name.clone(), model);
        } else if head == ".subckt" {
            if tokens.len() < 2 {
                return Err(syntax(lineno, ".subckt needs a name"));
            }
            let name = tokens[1].to_ascii_lowercase();
            let pins: Vec<String> = tokens[2..].iter().map(|t| t.to_ascii_lowercase()).collect();
            let mut elements = Vec::new();
            let mut closed = false;
            while let Some((ln, inner)) = lexer.next() {
                let inner_tokens: Vec<&str> = inner.split_whitespace().collect();
                let inner_head = inner_tokens[0].to_ascii_lowercase();
                if inner_head == ".ends" {
                    closed = true;
                    break;
                }
                if inner_head.starts_with('.') {
                    return Err(syntax(ln, format!("`{inner_head}` not allowed inside .subckt")));
                }
                elements.push(parse_element(ln, &inner_tokens)?);
            }
            if !closed {
                return Err(syntax(lineno, format!("subckt `{name}` missing .ends")));
            }
            netlist.subckts.insert(
                name.clone(),
                Subckt {
                    name,
                    pins,
                    elements,
                },
            );
        } else if head == ".ends" {
            return Err(syntax(lineno, ".ends without .subckt"));
        } else if head.starts_with('.') {
            return Err(syntax(lineno, format!("unknown directive `{head}`")));
        } else {
            netlist.elements.push(parse_element(lineno, &tokens)?);
        }
    }
    Ok(netlist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::print_netlist;

    #[test]
    fn si_suffixes() {
        assert_eq!(parse_value("10f", 1).unwrap(), 10e-15);
        assert_eq!(parse_value("1k", 1).unwrap(), 1e3);
        assert_eq!(parse_value("2meg", 1).unwrap(), 2e6);
        assert_eq!(parse_value("1.5u", 1).unwrap(), 1.5e-6);
        assert_eq!(parse_value("3p", 1).unwrap(), 3e-12);
        assert_eq!(parse_value("1e3", 1).unwrap(), 1e3);
        assert_eq!(parse_value("-0.5m", 1).unwrap(), -0.5e-3);
        assert!(parse_value("zz", 1).is_err());
    }

    #[test]
    fn dc_source_line() {
        let n = parse_netlist("V1 a 0 DC 1.0\n").unwrap();
        assert_eq!(n.elements.len(), 1);
        match &n.elements[0] {
            Element::VSource { kind, .. } => assert_eq!(*kind, SourceKind::Dc(1.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn capacitor_suffix_expansion() {
        let n = parse_netlist("C1 x 0 10f\n").unwrap();
        match &n.elements[0] {
            Element::Capacitor { farads, .. } => assert_eq!(*farads, 1e-14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverter_fixture_counts() {
        let text = "\
.model nfet N mu0=2 gamma=0.3 vth=0.6 cox=1e-8
.model pfet P mu0=1 gamma=0.3 vth=-0.6 cox=1e-8
* inverter with load
Mn out in 0 nfet W=4 L=1
Mp out in vdd pfet W=8 L=1
Cl out 0 10f
Vin in 0 DC 0
Vdd vdd 0 DC 2
";
        let n = parse_netlist(text).unwrap();
        assert_eq!(n.elements.len(), 5);
        let mut nodes = std::collections::BTreeSet::new();
        for e in &n.elements {
            match e {
                Element::Mos {
                    drain,
                    gate,
                    source,
                    ..
                } => {
                    nodes.extend([drain.clone(), gate.clone(), source.clone()]);
                }
                Element::Capacitor { a, b, .. } => {
                    nodes.extend([a.clone(), b.clone()]);
                }
                Element::VSource { pos, neg, .. } => {
                    nodes.extend([pos.clone(), neg.clone()]);
                }
                _ => {}
            }
        }
        assert_eq!(nodes.len(), 4); // 0, in, out, vdd
    }

    #[test]
    fn pwl_and_round_trip() {
        let text = "\
.model nfet N mu0=2 gamma=0.3 vth=0.6 cox=1e-8 vss=0.06 ifloor=1p
.subckt inv in out vdd
Mn out in 0 nfet W=4 L=1
.ends
Xinv a b vdd inv
Va a 0 PWL(0 0 1n 2 2n 0)
Vdd vdd 0 DC 2
";
        let parsed = parse_netlist(text).unwrap();
        let printed = print_netlist(&parsed);
        let reparsed = parse_netlist(&printed).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_netlist("V1 a 0 DC 1\nQ9 bad line\n").unwrap_err();
        match err {
            SimError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
