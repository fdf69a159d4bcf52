//! Experiment configuration: a TOML (or JSON) document validated against a
//! fixed schema, with dotted-path overrides applied before validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use topowave_core::dynamics::{time_grid, InitialState};
use topowave_core::lattice::Gap;
use topowave_core::{CouplingNode, DisorderSpec, GiantAtomSpec, Sublattice, WaveguideParams, C64};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    Boundstate,
    SwCouplings,
    MarkovScan,
    Evolve,
    PhotonMap,
    Transfer,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Boundstate => "boundstate",
            ExperimentKind::SwCouplings => "sw-couplings",
            ExperimentKind::MarkovScan => "markov-scan",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::PhotonMap => "photon-map",
            ExperimentKind::Transfer => "transfer",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    /// Output path prefix; `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Default seed for disorder when `disorder.seed` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub waveguide: WaveguideConfig,
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundstate: Option<BoundstateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    /// Required; presets that leave it open force an explicit override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    #[serde(default)]
    pub detuning: f64,
    pub nodes: Vec<NodeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub cell: usize,
    pub sublattice: SublatticeToken,
    pub strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SublatticeToken {
    A,
    B,
}

impl From<SublatticeToken> for Sublattice {
    fn from(t: SublatticeToken) -> Self {
        match t {
            SublatticeToken::A => Sublattice::A,
            SublatticeToken::B => Sublattice::B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub strength: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        time_grid(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundstateMethod {
    /// Root of the self-energy equation plus quadrature amplitudes.
    #[default]
    Bloch,
    /// In-gap eigenvectors of the finite ring.
    RealSpace,
    /// Zero-detuning closed form for one-cell A/B atoms.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundstateConfig {
    #[serde(default)]
    pub method: BoundstateMethod,
    /// Restrict to these gaps; all three by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<GapToken>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapToken {
    Lower,
    Middle,
    Upper,
}

impl From<GapToken> for Gap {
    fn from(t: GapToken) -> Self {
        match t {
            GapToken::Lower => Gap::Lower,
            GapToken::Middle => Gap::Middle,
            GapToken::Upper => Gap::Upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Exact evolution of the full single-excitation Hamiltonian.
    #[default]
    Full,
    /// Coherent effective couplings only.
    Effective,
    /// Master equation with coherent and dissipative couplings.
    Lindblad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default)]
    pub model: Model,
    #[serde(default = "default_initial")]
    pub initial: InitialConfig,
    /// Fidelity target; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<InitialConfig>,
    #[serde(default)]
    pub source: usize,
    #[serde(default = "default_destination")]
    pub destination: usize,
}

fn default_initial() -> InitialConfig {
    InitialConfig::Atom { atom: 0 }
}

fn default_destination() -> usize {
    1
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            model: Model::Full,
            initial: default_initial(),
            target: None,
            source: 0,
            destination: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Atom { atom: usize },
    Photon { cell: usize, sublattice: SublatticeToken },
    /// Equal-weight superposition with the given relative phases (radians).
    Superposition { atoms: Vec<usize>, #[serde(default)] phases: Vec<f64> },
}

impl InitialConfig {
    pub fn to_state(&self) -> InitialState {
        match self {
            InitialConfig::Atom { atom } => InitialState::AtomExcited(*atom),
            InitialConfig::Photon { cell, sublattice } => InitialState::PhotonSite {
                cell: *cell,
                sublattice: (*sublattice).into(),
            },
            InitialConfig::Superposition { atoms, phases } => InitialState::Superposition(
                atoms
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| (a, C64::from_polar(1.0, phases.get(i).copied().unwrap_or(0.0))))
                    .collect(),
            ),
        }
    }
}

/// Single small-atom decay run used to check the rate convention of the
/// Markov couplings against exact dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub detuning: f64,
    pub cells: usize,
    pub strength: f64,
    /// Externally quoted decay rate to express as a convention factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_gamma: Option<f64>,
}

fn config_error(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Reads a config file (TOML unless the extension is `.json`).
pub fn load_value(path: &Path) -> Result<toml::Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error("--config", format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| config_error("--config", e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| config_error("--config", e.to_string()))
    }
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `path.to.leaf=value`; numeric segments index arrays.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error("--set", format!("expected key=value, got '{assignment}'")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(config_error("--set", "empty key"));
    }
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let value = if last { Some(parse_literal(raw.trim())) } else { None };
        node = match node {
            toml::Value::Table(t) => {
                if let Some(v) = value {
                    t.insert(seg.to_string(), v);
                    return Ok(());
                }
                t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| config_error(path, format!("'{seg}' is not an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| config_error(path, format!("index {idx} out of range (length {len})")))?;
                if let Some(v) = value {
                    *slot = v;
                    return Ok(());
                }
                slot
            }
            _ => return Err(config_error(path, format!("'{seg}' is below a non-table value"))),
        };
    }
    Ok(())
}

pub fn from_value(value: toml::Value) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::deserialize(value).map_err(|e| config_error("config", e.to_string()))
}

pub fn to_value(config: &ExperimentConfig) -> toml::Value {
    toml::Value::try_from(config).expect("config serializes to TOML")
}

/// Model objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub params: WaveguideParams,
    pub atoms: Vec<GiantAtomSpec>,
    pub disorder: Option<DisorderSpec>,
}

impl ExperimentConfig {
    /// Checks the schema-level invariants and builds the model objects.
    pub fn validate(&self, kind: ExperimentKind) -> Result<Resolved, CliError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(config_error("kind", format!("config is for '{k}' but the subcommand is '{kind}'")));
            }
        }
        let delta = self.waveguide.delta.ok_or_else(|| {
            config_error("waveguide.delta", "required (set it with --set waveguide.delta=<value>)")
        })?;
        let params = WaveguideParams::new(delta, self.waveguide.cells)
            .map_err(|e| config_error(if self.waveguide.cells == 0 { "waveguide.cells" } else { "waveguide.delta" }, e.to_string()))?;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.iter().enumerate() {
            for (j, n) in a.nodes.iter().enumerate() {
                if n.cell >= params.cells() {
                    return Err(config_error(
                        format!("atoms.{i}.nodes.{j}.cell"),
                        format!("cell {} outside lattice of {} cells", n.cell, params.cells()),
                    ));
                }
            }
            let mut nodes: Vec<CouplingNode> = a
                .nodes
                .iter()
                .map(|n| CouplingNode::new(n.cell, n.sublattice.into(), n.strength))
                .collect();
            nodes.sort_by_key(|n| (n.cell, n.sublattice));
            let spec = GiantAtomSpec::new(a.detuning, nodes).map_err(|e| config_error(format!("atoms.{i}"), e.to_string()))?;
            atoms.push(spec);
        }
        let disorder = match &self.disorder {
            Some(d) => Some(
                DisorderSpec::new(d.strength, d.seed.or(self.seed).unwrap_or(0))
                    .map_err(|e| config_error("disorder.strength", e.to_string()))?,
            ),
            None => None,
        };
        for (name, grid) in [("detuning_grid", &self.detuning_grid), ("time_grid", &self.time_grid)] {
            if let Some(g) = grid {
                if g.points == 0 {
                    return Err(config_error(format!("{name}.points"), "grid must be non-empty"));
                }
                if !g.start.is_finite() || !g.stop.is_finite() {
                    return Err(config_error(name, "grid bounds must be finite"));
                }
            }
        }
        if let Some(g) = &self.time_grid {
            if g.stop < g.start {
                return Err(config_error("time_grid.stop", "must not precede time_grid.start"));
            }
        }
        let need = |cond: bool, field: &str, reason: &str| if cond { Ok(()) } else { Err(config_error(field, reason)) };
        match kind {
            ExperimentKind::Spectrum => {
                need(self.detuning_grid.is_some(), "detuning_grid", "required for spectrum")?;
            }
            ExperimentKind::Boundstate => {
                need(atoms.len() == 1, "atoms", "boundstate takes exactly one atom")?;
            }
            ExperimentKind::SwCouplings | ExperimentKind::MarkovScan => {
                need(!atoms.is_empty(), "atoms", "at least one atom is required")?;
                if self.detuning_grid.is_none() {
                    common_detuning(&atoms)?;
                }
            }
            ExperimentKind::Evolve | ExperimentKind::PhotonMap | ExperimentKind::Transfer => {
                need(!atoms.is_empty(), "atoms", "at least one atom is required")?;
                need(self.time_grid.is_some(), "time_grid", "required for time evolution")?;
                let dynamics = self.dynamics.clone().unwrap_or_default();
                let count = atoms.len();
                let check_state = |s: &InitialConfig, field: &str| -> Result<(), CliError> {
                    match s {
                        InitialConfig::Atom { atom } if *atom >= count => {
                            Err(config_error(format!("{field}.atom"), format!("atom {atom} does not exist")))
                        }
                        InitialConfig::Photon { cell, .. } if *cell >= params.cells() => {
                            Err(config_error(format!("{field}.cell"), "outside lattice"))
                        }
                        InitialConfig::Photon { .. } if dynamics.model != Model::Full => {
                            Err(config_error(field, "photon initial states need the full model"))
                        }
                        InitialConfig::Superposition { atoms: list, .. } if list.is_empty() || list.iter().any(|&a| a >= count) => {
                            Err(config_error(format!("{field}.atoms"), "must list existing atoms"))
                        }
                        _ => Ok(()),
                    }
                };
                check_state(&dynamics.initial, "dynamics.initial")?;
                if let Some(t) = &dynamics.target {
                    check_state(t, "dynamics.target")?;
                }
                if dynamics.model != Model::Full {
                    common_detuning(&atoms)?;
                    need(self.disorder.is_none(), "disorder", "only the full model supports disorder")?;
                }
                if kind == ExperimentKind::PhotonMap {
                    need(dynamics.model == Model::Full, "dynamics.model", "photon maps need the full model")?;
                }
                if kind == ExperimentKind::Transfer {
                    need(
                        dynamics.source < count && dynamics.destination < count && dynamics.source != dynamics.destination,
                        "dynamics.destination",
                        "source and destination must be distinct existing atoms",
                    )?;
                }
            }
        }
        if let Some(c) = &self.calibration {
            need(kind == ExperimentKind::MarkovScan, "calibration", "only markov-scan runs a calibration")?;
            need(c.cells > 0, "calibration.cells", "must be positive")?;
            need(c.strength >= 0.0, "calibration.strength", "must be >= 0")?;
        }
        Ok(Resolved {
            kind,
            params,
            atoms,
            disorder,
        })
    }
}

/// Detuning shared by every atom (effective models need one frame).
pub fn common_detuning(atoms: &[GiantAtomSpec]) -> Result<f64, CliError> {
    let first = atoms.first().map(|a| a.detuning()).unwrap_or(0.0);
    if atoms.iter().any(|a| (a.detuning() - first).abs() > 1e-12) {
        return Err(config_error("atoms.detuning", "all atoms must share one detuning for effective couplings"));
    }
    Ok(first)
}
