//! Per-network sidecar configuration.
//!
//! An INP file carries neither units nor pipe prices, so each network is
//! paired with a small TOML file:
//!
//! ```toml
//! flow_units = "GPM"
//! min_head = 30.0
//! preset = "han"
//! default_table = "main"
//!
//! [min_head_overrides]
//! J7 = 25.0
//!
//! [cost_tables.main]
//! file = "han_costs.csv"
//!
//! [cost_tables.expansion]
//! rows = [[0, 0.0, 0.0], [1, 152.4, 49.54]]
//!
//! [pipe_tables]
//! P12 = "expansion"
//!
//! [archive]
//! cell_widths = [1000.0, 0.004]
//! max_occupancy = 64
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::ArchiveParams;
use crate::inp::{parse_cost_table, parse_inp, CostTableError, FlowUnits, InpOptions, ParseError};
use crate::network::{NetworkError, OptionTable, OptionTableError, PipeNetwork, PipeOption};
use crate::orchestrator::Preset;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub flow_units: Option<String>,
    #[serde(default)]
    pub min_head: f64,
    #[serde(default)]
    pub min_head_overrides: HashMap<String, f64>,
    pub preset: Option<Preset>,
    /// Table used for pipes not named in `pipe_tables`.
    pub default_table: Option<String>,
    #[serde(default)]
    pub cost_tables: BTreeMap<String, CostTableSource>,
    #[serde(default)]
    pub pipe_tables: HashMap<String, String>,
    pub archive: Option<ArchiveSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTableSource {
    /// CSV file, relative to the config file.
    pub file: Option<PathBuf>,
    /// Inline `[index, diameter_mm, unit_cost]` rows.
    pub rows: Option<Vec<(usize, f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveSection {
    pub cell_widths: Option<[f64; 2]>,
    pub origin: Option<[f64; 2]>,
    pub max_occupancy: Option<usize>,
}

impl ArchiveSection {
    /// Fills unset fields from `base`.
    pub fn apply(&self, base: ArchiveParams) -> ArchiveParams {
        ArchiveParams {
            cell_widths: self.cell_widths.unwrap_or(base.cell_widths),
            origin: self.origin.unwrap_or(base.origin),
            max_occupancy: self.max_occupancy.unwrap_or(base.max_occupancy),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Inp {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("cost table {name}: {source}")]
    CostTable {
        name: String,
        #[source]
        source: CostTableError,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl LoadError {
    /// True for malformed input files, as opposed to bad settings or
    /// missing files.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, LoadError::Inp { .. } | LoadError::CostTable { .. } | LoadError::Network(_))
    }
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl NetworkConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, LoadError> {
        toml::from_str(text).map_err(|e| LoadError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn inp_options(&self, path: &Path) -> Result<InpOptions, LoadError> {
        let flow_units = self
            .flow_units
            .as_deref()
            .map(|s| {
                s.parse::<FlowUnits>().map_err(|e| LoadError::Config {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()?;
        Ok(InpOptions {
            flow_units,
            min_head: self.min_head,
            min_head_overrides: self.min_head_overrides.clone(),
        })
    }
}

fn table_from_rows(rows: &[(usize, f64, f64)]) -> Result<OptionTable, CostTableError> {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| r.0);
    for (k, r) in sorted.iter().enumerate() {
        if r.0 != k {
            return Err(CostTableError::NonContiguousIndex(k));
        }
    }
    let options = sorted
        .iter()
        .map(|&(_, d_mm, unit_cost)| PipeOption {
            diameter: d_mm / 1000.0,
            unit_cost,
        })
        .collect();
    OptionTable::new(options).map_err(|e| match e {
        OptionTableError::NonAscendingDiameter(k) => CostTableError::NonAscendingDiameter(k),
        other => CostTableError::Invalid(other),
    })
}

/// A parsed network together with its sidecar settings.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub network: PipeNetwork,
    pub config: NetworkConfig,
}

/// Loads an INP file and its pipe prices.
///
/// `costs` may be a cost-table CSV (applied to every pipe) or a TOML
/// sidecar. Without it every pipe keeps its INP diameter at zero cost.
pub fn load_network(inp: &Path, costs: Option<&Path>) -> Result<LoadedNetwork, LoadError> {
    let inp_text = read(inp)?;
    let inp_err = |source| LoadError::Inp {
        path: inp.display().to_string(),
        source,
    };
    let Some(costs) = costs else {
        let network = parse_inp(&inp_text, &InpOptions::default()).map_err(inp_err)?;
        return Ok(LoadedNetwork {
            network,
            config: NetworkConfig::default(),
        });
    };

    let is_toml = costs.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let config = if is_toml {
        NetworkConfig::from_toml(&read(costs)?, costs)?
    } else {
        let mut config = NetworkConfig::default();
        config.cost_tables.insert(
            "default".into(),
            CostTableSource {
                file: costs.file_name().map(PathBuf::from),
                rows: None,
            },
        );
        config
    };
    let base_dir = costs.parent().unwrap_or(Path::new("."));
    let network = parse_inp(&inp_text, &config.inp_options(costs)?).map_err(inp_err)?;
    let network = apply_cost_tables(&network, &config, base_dir, costs)?;
    Ok(LoadedNetwork { network, config })
}

/// Attaches the configured cost tables to `network`.
pub fn apply_cost_tables(
    network: &PipeNetwork,
    config: &NetworkConfig,
    base_dir: &Path,
    config_path: &Path,
) -> Result<PipeNetwork, LoadError> {
    if config.cost_tables.is_empty() {
        return Ok(network.clone());
    }
    let config_err = |message: String| LoadError::Config {
        path: config_path.display().to_string(),
        message,
    };
    let mut names = Vec::new();
    let mut tables = Vec::new();
    for (name, source) in &config.cost_tables {
        let table = match (&source.file, &source.rows) {
            (Some(file), None) => {
                let path = if file.is_absolute() { file.clone() } else { base_dir.join(file) };
                parse_cost_table(&read(&path)?)
            }
            (None, Some(rows)) => table_from_rows(rows),
            _ => return Err(config_err(format!("cost table {name} needs exactly one of file or rows"))),
        }
        .map_err(|source| LoadError::CostTable {
            name: name.clone(),
            source,
        })?;
        names.push(name.clone());
        tables.push(table);
    }
    let position = |name: &str| {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| config_err(format!("unknown cost table {name}")))
    };
    let default = match &config.default_table {
        Some(name) => position(name)?,
        None if names.len() == 1 => 0,
        None => return Err(config_err("default_table is required when several cost tables are given".into())),
    };
    let mut assignment = HashMap::new();
    for (pipe, table) in &config.pipe_tables {
        if !network.pipes().iter().any(|p| &p.id == pipe) {
            return Err(config_err(format!("pipe_tables names unknown pipe {pipe}")));
        }
        assignment.insert(pipe.clone(), position(table)?);
    }
    Ok(network.with_option_tables(tables, &assignment, default)?)
}
