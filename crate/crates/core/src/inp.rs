//! Reader and writer for the subset of the EPANET INP format needed by
//! single-period pipe sizing problems, plus the cost-table CSV.
//!
//! Supported sections: `[JUNCTIONS]`, `[RESERVOIRS]`, `[PIPES]`, `[PUMPS]`
//! (constant power only), `[COORDINATES]`, `[VERTICES]`, `[OPTIONS]`
//! (only `Units` and `Headloss` are read), `[TITLE]` and `[END]`. Any other
//! section is rejected.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{
    Element, Junction, NetworkError, OptionTable, OptionTableError, PipeNetwork, PipeOption,
    PipeSpec, PumpSpec, Reservoir,
};

/// Flow units as declared in EPANET files. US units imply feet, inches and
/// horsepower; SI units imply metres, millimetres and kilowatts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FlowUnits {
    Cfs,
    Gpm,
    Mgd,
    Imgd,
    Afd,
    Lps,
    Lpm,
    Mld,
    Cmh,
    Cmd,
    Cms,
}

impl FlowUnits {
    /// Cubic metres per second in one unit of flow.
    pub fn to_cms(self) -> f64 {
        match self {
            FlowUnits::Cfs => 0.028_316_846_592,
            FlowUnits::Gpm => 0.028_316_846_592 / 448.831,
            FlowUnits::Mgd => 0.028_316_846_592 / 0.646_317,
            FlowUnits::Imgd => 0.028_316_846_592 / 0.538_22,
            FlowUnits::Afd => 0.028_316_846_592 / 1.983_7,
            FlowUnits::Lps => 1e-3,
            FlowUnits::Lpm => 1e-3 / 60.0,
            FlowUnits::Mld => 1e3 / 86_400.0,
            FlowUnits::Cmh => 1.0 / 3_600.0,
            FlowUnits::Cmd => 1.0 / 86_400.0,
            FlowUnits::Cms => 1.0,
        }
    }

    pub fn is_us(self) -> bool {
        matches!(
            self,
            FlowUnits::Cfs | FlowUnits::Gpm | FlowUnits::Mgd | FlowUnits::Imgd | FlowUnits::Afd
        )
    }

    /// Metres per unit of length/elevation/head.
    pub fn length_to_m(self) -> f64 {
        if self.is_us() {
            0.3048
        } else {
            1.0
        }
    }

    /// Metres per unit of pipe diameter.
    pub fn diameter_to_m(self) -> f64 {
        if self.is_us() {
            0.0254
        } else {
            1e-3
        }
    }

    /// Watts per unit of pump power.
    pub fn power_to_w(self) -> f64 {
        if self.is_us() {
            745.7
        } else {
            1e3
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowUnits::Cfs => "CFS",
            FlowUnits::Gpm => "GPM",
            FlowUnits::Mgd => "MGD",
            FlowUnits::Imgd => "IMGD",
            FlowUnits::Afd => "AFD",
            FlowUnits::Lps => "LPS",
            FlowUnits::Lpm => "LPM",
            FlowUnits::Mld => "MLD",
            FlowUnits::Cmh => "CMH",
            FlowUnits::Cmd => "CMD",
            FlowUnits::Cms => "CMS",
        }
    }
}

impl FromStr for FlowUnits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "CFS" => FlowUnits::Cfs,
            "GPM" => FlowUnits::Gpm,
            "MGD" => FlowUnits::Mgd,
            "IMGD" => FlowUnits::Imgd,
            "AFD" => FlowUnits::Afd,
            "LPS" => FlowUnits::Lps,
            "LPM" => FlowUnits::Lpm,
            "MLD" => FlowUnits::Mld,
            "CMH" => FlowUnits::Cmh,
            "CMD" => FlowUnits::Cmd,
            "CMS" => FlowUnits::Cms,
            other => return Err(format!("unknown flow units {other}")),
        })
    }
}

/// Settings that the INP file itself does not carry.
#[derive(Debug, Clone, Default)]
pub struct InpOptions {
    /// Overrides `[OPTIONS] Units`; falls back to CMS when neither is given.
    pub flow_units: Option<FlowUnits>,
    /// Default required pressure head above elevation (m).
    pub min_head: f64,
    /// Per-junction required pressure head (m).
    pub min_head_overrides: HashMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: unknown or unsupported section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: reference to unknown node {id}")]
    DanglingReference { line: usize, id: String },
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("line {line}: {message}")]
    Unsupported { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: NetworkError },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::UnknownSection { line, .. }
            | ParseError::DuplicateId { line, .. }
            | ParseError::DanglingReference { line, .. }
            | ParseError::MalformedRecord { line, .. }
            | ParseError::Unsupported { line, .. }
            | ParseError::Invalid { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Title,
    Junctions,
    Reservoirs,
    Pipes,
    Pumps,
    Coordinates,
    Vertices,
    Options,
    End,
}

impl Section {
    fn from_header(name: &str) -> Option<Self> {
        Some(match name.to_ascii_uppercase().as_str() {
            "TITLE" => Section::Title,
            "JUNCTIONS" => Section::Junctions,
            "RESERVOIRS" => Section::Reservoirs,
            "PIPES" => Section::Pipes,
            "PUMPS" => Section::Pumps,
            "COORDINATES" => Section::Coordinates,
            "VERTICES" => Section::Vertices,
            "OPTIONS" => Section::Options,
            "END" => Section::End,
            _ => return None,
        })
    }
}

struct RawJunction {
    line: usize,
    id: String,
    elevation: f64,
    demand: f64,
}

struct RawReservoir {
    line: usize,
    id: String,
    head: f64,
}

struct RawPipe {
    line: usize,
    id: String,
    from: String,
    to: String,
    length: f64,
    diameter: f64,
    roughness: f64,
}

struct RawPump {
    line: usize,
    id: String,
    from: String,
    to: String,
    power: f64,
}

struct RawCoordinate {
    line: usize,
    node: String,
}

fn number(line: usize, field: &str, what: &str) -> Result<f64, ParseError> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParseError::MalformedRecord {
            line,
            message: format!("{what}: expected a number, found {field:?}"),
        })
}

fn require_fields(line: usize, fields: &[&str], n: usize, what: &str) -> Result<(), ParseError> {
    if fields.len() < n {
        return Err(ParseError::MalformedRecord {
            line,
            message: format!("{what} record needs at least {n} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

/// Parses an INP-subset document into a validated network.
///
/// Every pipe receives its own single-option table holding the declared
/// diameter at zero cost; attach real cost tables with
/// [`PipeNetwork::with_option_tables`].
pub fn parse_inp(text: &str, opts: &InpOptions) -> Result<PipeNetwork, ParseError> {
    let mut section: Option<Section> = None;
    let mut junctions = Vec::new();
    let mut reservoirs = Vec::new();
    let mut pipes = Vec::new();
    let mut pumps = Vec::new();
    let mut coordinates = Vec::new();
    let mut declared_units: Option<FlowUnits> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ParseError::MalformedRecord {
                line,
                message: "unterminated section header".into(),
            })?;
            section = Some(Section::from_header(name.trim()).ok_or_else(|| {
                ParseError::UnknownSection {
                    line,
                    section: name.trim().to_string(),
                }
            })?);
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match section {
            None => {
                return Err(ParseError::MalformedRecord {
                    line,
                    message: "data before the first section header".into(),
                })
            }
            Some(Section::Title | Section::Vertices | Section::End) => {}
            Some(Section::Options) => {
                let key = fields[0].to_ascii_uppercase();
                let value = fields.get(1).copied().unwrap_or("");
                match key.as_str() {
                    "UNITS" => {
                        declared_units = Some(value.parse().map_err(|message| {
                            ParseError::MalformedRecord { line, message }
                        })?)
                    }
                    "HEADLOSS" if !value.eq_ignore_ascii_case("H-W") => {
                        return Err(ParseError::Unsupported {
                            line,
                            message: format!("headloss formula {value} (only H-W)"),
                        });
                    }
                    _ => {}
                }
            }
            Some(Section::Junctions) => {
                require_fields(line, &fields, 2, "junction")?;
                junctions.push(RawJunction {
                    line,
                    id: fields[0].to_string(),
                    elevation: number(line, fields[1], "elevation")?,
                    demand: match fields.get(2) {
                        Some(f) => number(line, f, "demand")?,
                        None => 0.0,
                    },
                });
            }
            Some(Section::Reservoirs) => {
                require_fields(line, &fields, 2, "reservoir")?;
                if fields.len() > 2 {
                    return Err(ParseError::Unsupported {
                        line,
                        message: "reservoir head patterns".into(),
                    });
                }
                reservoirs.push(RawReservoir {
                    line,
                    id: fields[0].to_string(),
                    head: number(line, fields[1], "head")?,
                });
            }
            Some(Section::Pipes) => {
                require_fields(line, &fields, 6, "pipe")?;
                if let Some(status) = fields.get(7) {
                    if !status.eq_ignore_ascii_case("open") {
                        return Err(ParseError::Unsupported {
                            line,
                            message: format!("pipe status {status}"),
                        });
                    }
                }
                pipes.push(RawPipe {
                    line,
                    id: fields[0].to_string(),
                    from: fields[1].to_string(),
                    to: fields[2].to_string(),
                    length: number(line, fields[3], "length")?,
                    diameter: number(line, fields[4], "diameter")?,
                    roughness: number(line, fields[5], "roughness")?,
                });
            }
            Some(Section::Pumps) => {
                require_fields(line, &fields, 5, "pump")?;
                if !fields[3].eq_ignore_ascii_case("power") || fields.len() != 5 {
                    return Err(ParseError::Unsupported {
                        line,
                        message: "only constant-power pumps (POWER <value>) are supported".into(),
                    });
                }
                pumps.push(RawPump {
                    line,
                    id: fields[0].to_string(),
                    from: fields[1].to_string(),
                    to: fields[2].to_string(),
                    power: number(line, fields[4], "power")?,
                });
            }
            Some(Section::Coordinates) => {
                require_fields(line, &fields, 3, "coordinate")?;
                number(line, fields[1], "x")?;
                number(line, fields[2], "y")?;
                coordinates.push(RawCoordinate {
                    line,
                    node: fields[0].to_string(),
                });
            }
        }
    }

    let units = opts.flow_units.or(declared_units).unwrap_or(FlowUnits::Cms);
    let len = units.length_to_m();

    // Located checks first so that errors carry the offending line.
    let mut node_lines: HashMap<&str, usize> = HashMap::new();
    let node_records = junctions
        .iter()
        .map(|j| (j.id.as_str(), j.line))
        .chain(reservoirs.iter().map(|r| (r.id.as_str(), r.line)));
    for (id, line) in node_records {
        if node_lines.insert(id, line).is_some() {
            return Err(ParseError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
    }
    let mut link_lines: HashMap<&str, usize> = HashMap::new();
    let link_records = pipes
        .iter()
        .map(|p| (p.id.as_str(), p.line, [&p.from, &p.to]))
        .chain(pumps.iter().map(|p| (p.id.as_str(), p.line, [&p.from, &p.to])));
    for (id, line, ends) in link_records {
        if link_lines.insert(id, line).is_some() {
            return Err(ParseError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        for end in ends {
            if !node_lines.contains_key(end.as_str()) {
                return Err(ParseError::DanglingReference {
                    line,
                    id: end.clone(),
                });
            }
        }
    }
    let mut seen_coords = HashSet::new();
    for c in &coordinates {
        if !node_lines.contains_key(c.node.as_str()) {
            return Err(ParseError::DanglingReference {
                line: c.line,
                id: c.node.clone(),
            });
        }
        if !seen_coords.insert(c.node.as_str()) {
            return Err(ParseError::DuplicateId {
                line: c.line,
                id: c.node.clone(),
            });
        }
    }

    let junction_models = junctions
        .iter()
        .map(|j| Junction {
            id: j.id.clone(),
            elevation: j.elevation * len,
            demand: j.demand * units.to_cms(),
            min_head: opts
                .min_head_overrides
                .get(&j.id)
                .copied()
                .unwrap_or(opts.min_head),
        })
        .collect();
    let reservoir_models = reservoirs
        .iter()
        .map(|r| Reservoir {
            id: r.id.clone(),
            head: r.head * len,
        })
        .collect();
    let mut tables = Vec::with_capacity(pipes.len());
    let mut pipe_specs = Vec::with_capacity(pipes.len());
    for (k, p) in pipes.iter().enumerate() {
        let diameter = p.diameter * units.diameter_to_m();
        let table = OptionTable::fixed(diameter).map_err(|e| ParseError::MalformedRecord {
            line: p.line,
            message: e.to_string(),
        })?;
        tables.push(table);
        pipe_specs.push(PipeSpec {
            id: p.id.clone(),
            from: p.from.clone(),
            to: p.to.clone(),
            length: p.length * len,
            roughness: p.roughness,
            nominal_diameter: diameter,
            option_table: k,
        });
    }
    let pump_specs = pumps
        .iter()
        .map(|p| PumpSpec {
            id: p.id.clone(),
            from: p.from.clone(),
            to: p.to.clone(),
            power: p.power * units.power_to_w(),
        })
        .collect();

    PipeNetwork::new(
        junction_models,
        reservoir_models,
        pipe_specs,
        pump_specs,
        tables,
    )
    .map_err(|source| {
        let line = match &source {
            NetworkError::DuplicateId(el)
            | NetworkError::NotConnected(el)
            | NetworkError::InvalidValue { element: el, .. }
            | NetworkError::DanglingReference { element: el, .. }
            | NetworkError::MissingOptionTable { element: el, .. } => match el {
                Element::Node(id) => node_lines.get(id.as_str()).copied(),
                Element::Link(id) => link_lines.get(id.as_str()).copied(),
            },
            NetworkError::SelfLoop(id) => link_lines.get(id.as_str()).copied(),
            NetworkError::NoReservoir => None,
        };
        ParseError::Invalid {
            line: line.unwrap_or(0),
            source,
        }
    })
}

/// Writes the INP-retained fields of `net` in the given units. Required
/// heads and option tables have no INP representation and are not written.
pub fn to_inp(net: &PipeNetwork, units: FlowUnits) -> String {
    let len = units.length_to_m();
    let mut out = String::new();
    out.push_str("[OPTIONS]\n");
    let _ = writeln!(out, " Units {}", units.name());
    out.push_str(" Headloss H-W\n\n[JUNCTIONS]\n;ID Elev Demand\n");
    for j in net.junctions() {
        let _ = writeln!(
            out,
            " {} {} {}",
            j.id,
            j.elevation / len,
            j.demand / units.to_cms()
        );
    }
    out.push_str("\n[RESERVOIRS]\n;ID Head\n");
    for r in net.reservoirs() {
        let _ = writeln!(out, " {} {}", r.id, r.head / len);
    }
    out.push_str("\n[PIPES]\n;ID Node1 Node2 Length Diameter Roughness MinorLoss Status\n");
    for p in net.pipes() {
        let _ = writeln!(
            out,
            " {} {} {} {} {} {} 0 Open",
            p.id,
            net.node_id(p.from),
            net.node_id(p.to),
            p.length / len,
            p.nominal_diameter / units.diameter_to_m(),
            p.roughness
        );
    }
    if !net.pumps().is_empty() {
        out.push_str("\n[PUMPS]\n;ID Node1 Node2 Parameters\n");
        for p in net.pumps() {
            let _ = writeln!(
                out,
                " {} {} {} POWER {}",
                p.id,
                net.node_id(p.from),
                net.node_id(p.to),
                p.power / units.power_to_w()
            );
        }
    }
    out.push_str("\n[END]\n");
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostTableError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("option indices are not contiguous from 0 (missing or repeated index {0})")]
    NonContiguousIndex(usize),
    #[error("diameters are not strictly ascending at index {0}")]
    NonAscendingDiameter(usize),
    #[error(transparent)]
    Invalid(OptionTableError),
}

/// Parses a cost table CSV with header `index,diameter_mm,unit_cost`.
/// Rows may appear in any order; diameters are converted to metres.
pub fn parse_cost_table(text: &str) -> Result<OptionTable, CostTableError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CostTableError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    let expected = ["index", "diameter_mm", "unit_cost"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(CostTableError::Malformed {
            line: 1,
            message: "header must be index,diameter_mm,unit_cost".into(),
        });
    }
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CostTableError::Malformed {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| CostTableError::Malformed {
            line,
            message: format!("invalid {what}"),
        };
        let index: usize = record[0].parse().map_err(|_| bad("index"))?;
        let diameter_mm: f64 = record[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad("diameter"))?;
        let cost: f64 = record[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad("unit cost"))?;
        rows.push((index, diameter_mm, cost));
    }
    rows.sort_by_key(|r| r.0);
    for (expected, row) in rows.iter().enumerate() {
        if row.0 != expected {
            return Err(CostTableError::NonContiguousIndex(expected));
        }
    }
    for w in rows.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(CostTableError::NonAscendingDiameter(w[1].0));
        }
    }
    OptionTable::new(
        rows.iter()
            .map(|&(_, d, c)| PipeOption {
                diameter: d / 1000.0,
                unit_cost: c,
            })
            .collect(),
    )
    .map_err(CostTableError::Invalid)
}

/// Writes a cost table in the format read by [`parse_cost_table`].
pub fn write_cost_table(table: &OptionTable) -> String {
    let mut out = String::from("index,diameter_mm,unit_cost\n");
    for (i, opt) in table.options().iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i, opt.diameter * 1000.0, opt.unit_cost);
    }
    out
}
