//! Scenario files: TOML with `schema = 1`.
//!
//! ```toml
//! schema = 1
//! name = "example"
//! seed = 7
//! duration_s = 2.0
//! mode = "multi-hop"          # or "single-hop"
//!
//! [[nodes]]
//! id = 1
//! position = [0.0, 0.0, 1.0]   # metres
//! ap = true
//!
//! [[blockers]]
//! center = [5.0, 0.0, 0.0]     # footprint centre, box floor at z
//! size = [0.5, 0.5, 1.8]       # length (x), width (y), height (z)
//! extra_loss_db = 20.0
//! active = [[1.0, inf]]        # [start_s, end_s) windows; omit for always
//!
//! [[flows]]
//! id = 1
//! src = 2
//! dst = 1
//! rate_mbps = 100.0
//! packet_bytes = 1500
//! start_s = 0.5
//! stop_s = 1.5
//!
//! [[edges]]                    # optional fixed link costs
//! a = 1
//! b = 2
//! cost = 4.0
//! ```
//!
//! Optional `[mac]`, `[channel]`, `[routing]` and `[metrics]` tables override
//! individual defaults. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Blocker, ChannelConfig, Position};
use crate::mac::MacConfig;
use crate::routing::RoutingConfig;
use crate::sim::SimTime;
use crate::traffic::{Flow, DEFAULT_PACKET_BYTES};
use crate::StaId;

pub const SCHEMA_VERSION: u32 = 1;

/// Scenarios shipped with the crate, by name.
pub const SHIPPED: &[(&str, &str)] = &[
    (
        "blocker-single-flow",
        include_str!("../scenarios/blocker-single-flow.toml"),
    ),
    (
        "blocker-multi-flow",
        include_str!("../scenarios/blocker-multi-flow.toml"),
    ),
    ("nlos-relay", include_str!("../scenarios/nlos-relay.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("unknown shipped scenario {0:?}")]
    UnknownShipped(String),
    #[error("cannot read file")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleHop,
    MultiHop,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::SingleHop => "single-hop",
            Mode::MultiHop => "multi-hop",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single-hop" => Ok(Mode::SingleHop),
            "multi-hop" => Ok(Mode::MultiHop),
            _ => Err(format!("unknown mode {s:?} (single-hop | multi-hop)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub bin_ms: f64,
    pub cumulative: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            bin_ms: 100.0,
            cumulative: false,
        }
    }
}

impl MetricsConfig {
    pub fn bin(&self) -> SimTime {
        SimTime::from_secs_f64(self.bin_ms * 1e-3).unwrap_or(SimTime::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: StaId,
    pub position: Position,
    pub ap: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub a: StaId,
    pub b: StaId,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub duration: SimTime,
    pub mode: Mode,
    pub nodes: Vec<NodeSpec>,
    pub blockers: Vec<Blocker>,
    pub flows: Vec<Flow>,
    /// When non-empty, the neighbor graph and link costs are fixed to these.
    pub edges: Vec<EdgeSpec>,
    pub mac: MacConfig,
    pub channel: ChannelConfig,
    pub routing: RoutingConfig,
    pub metrics: MetricsConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNode {
    id: u32,
    position: [f64; 3],
    #[serde(default)]
    ap: bool,
}

fn default_loss() -> f64 {
    20.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBlocker {
    center: [f64; 3],
    size: [f64; 3],
    #[serde(default = "default_loss")]
    extra_loss_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active: Option<Vec<[f64; 2]>>,
}

fn default_packet() -> u32 {
    DEFAULT_PACKET_BYTES
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFlow {
    id: u32,
    src: u32,
    dst: u32,
    rate_mbps: f64,
    #[serde(default = "default_packet")]
    packet_bytes: u32,
    start_s: f64,
    stop_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEdge {
    a: u32,
    b: u32,
    cost: f64,
}

fn default_mode() -> Mode {
    Mode::MultiHop
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: u32,
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    seed: u64,
    duration_s: f64,
    #[serde(default = "default_mode")]
    mode: Mode,
    nodes: Vec<FileNode>,
    #[serde(default)]
    blockers: Vec<FileBlocker>,
    #[serde(default)]
    flows: Vec<FileFlow>,
    #[serde(default)]
    edges: Vec<FileEdge>,
    #[serde(default)]
    mac: MacConfig,
    #[serde(default)]
    channel: Option<toml::Table>,
    #[serde(default)]
    routing: RoutingConfig,
    #[serde(default)]
    metrics: MetricsConfig,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn secs(v: f64, what: &str, errs: &mut Vec<String>) -> SimTime {
    if v == f64::INFINITY {
        return SimTime::MAX;
    }
    SimTime::from_secs_f64(v).unwrap_or_else(|| {
        errs.push(format!("{what}: {v} is not a valid time"));
        SimTime::ZERO
    })
}

fn secs_out(t: SimTime) -> f64 {
    if t == SimTime::MAX {
        f64::INFINITY
    } else {
        t.as_secs_f64()
    }
}

fn merge_channel(overrides: Option<toml::Table>) -> Result<ChannelConfig, String> {
    let Some(over) = overrides else {
        return Ok(ChannelConfig::default());
    };
    let mut base = toml::Table::try_from(ChannelConfig::default()).map_err(|e| e.to_string())?;
    for (k, v) in over {
        if !base.contains_key(&k) {
            return Err(format!("[channel]: unknown key {k:?}"));
        }
        base.insert(k, v);
    }
    toml::Value::Table(base)
        .try_into()
        .map_err(|e: toml::de::Error| format!("[channel]: {}", e.message()))
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ScenarioError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut errs = Vec::new();
    if file.schema != SCHEMA_VERSION {
        errs.push(format!(
            "schema {} is not supported (expected {SCHEMA_VERSION})",
            file.schema
        ));
    }
    let channel = merge_channel(file.channel).unwrap_or_else(|e| {
        errs.push(e);
        ChannelConfig::default()
    });
    let duration = secs(file.duration_s, "duration_s", &mut errs);
    let nodes: Vec<NodeSpec> = file
        .nodes
        .iter()
        .map(|n| NodeSpec {
            id: StaId(n.id),
            position: Position::new(n.position[0], n.position[1], n.position[2]),
            ap: n.ap,
        })
        .collect();
    let blockers: Vec<Blocker> = file
        .blockers
        .iter()
        .enumerate()
        .map(|(i, b)| Blocker {
            center: Position::new(b.center[0], b.center[1], b.center[2]),
            length: b.size[0],
            width: b.size[1],
            height: b.size[2],
            extra_loss_db: b.extra_loss_db,
            active: match &b.active {
                None => vec![(SimTime::ZERO, SimTime::MAX)],
                Some(w) => w
                    .iter()
                    .map(|[s, e]| {
                        let what = format!("blockers[{i}].active");
                        (secs(*s, &what, &mut errs), secs(*e, &what, &mut errs))
                    })
                    .collect(),
            },
        })
        .collect();
    let flows: Vec<Flow> = file
        .flows
        .iter()
        .map(|f| Flow {
            id: f.id,
            src: StaId(f.src),
            dst: StaId(f.dst),
            rate_bps: f.rate_mbps * 1e6,
            packet_bytes: f.packet_bytes,
            start: secs(f.start_s, &format!("flow {} start_s", f.id), &mut errs),
            stop: secs(f.stop_s, &format!("flow {} stop_s", f.id), &mut errs),
        })
        .collect();
    let edges: Vec<EdgeSpec> = file
        .edges
        .iter()
        .map(|e| EdgeSpec {
            a: StaId(e.a),
            b: StaId(e.b),
            cost: e.cost,
        })
        .collect();
    let sc = Scenario {
        name: file.name,
        description: file.description,
        seed: file.seed,
        duration,
        mode: file.mode,
        nodes,
        blockers,
        flows,
        edges,
        mac: file.mac,
        channel,
        routing: file.routing,
        metrics: file.metrics,
    };
    errs.extend(sc.problems());
    if errs.is_empty() {
        Ok(sc)
    } else {
        Err(ScenarioError::Invalid(errs))
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

pub fn shipped_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let (_, text) = SHIPPED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ScenarioError::UnknownShipped(name.to_string()))?;
    parse_scenario(text)
}

/// A shipped scenario name or a path to a scenario file.
pub fn resolve_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    if SHIPPED.iter().any(|(n, _)| *n == name_or_path) {
        shipped_scenario(name_or_path)
    } else {
        load_scenario(Path::new(name_or_path))
    }
}

impl Scenario {
    /// Every invariant violation, in declaration order.
    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.name.trim().is_empty() {
            errs.push("name must not be empty".into());
        }
        if self.seed > i64::MAX as u64 {
            errs.push("seed must be below 2^63".into());
        }
        if self.duration == SimTime::ZERO || self.duration == SimTime::MAX {
            errs.push("duration_s must be finite and > 0".into());
        }
        if self.nodes.is_empty() {
            errs.push("at least one node is required".into());
        }
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                errs.push(format!("node id {} is duplicated", n.id));
            }
            if let Err(e) = n.position.validate() {
                errs.push(format!("node {}: {e}", n.id));
            }
        }
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                if a.position.distance(&b.position) == 0.0 {
                    errs.push(format!("nodes {} and {} are co-located", a.id, b.id));
                }
            }
        }
        for (i, b) in self.blockers.iter().enumerate() {
            if let Err(e) = b.validate() {
                errs.push(format!("blockers[{i}]: {e}"));
            }
        }
        let mut flow_ids = BTreeSet::new();
        for f in &self.flows {
            if !flow_ids.insert(f.id) {
                errs.push(format!("flow id {} is duplicated", f.id));
            }
            for (what, sta) in [("src", f.src), ("dst", f.dst)] {
                if !ids.contains(&sta) {
                    errs.push(format!("flow {}: {what} {sta} is not a node", f.id));
                }
            }
            if let Err(e) = f.validate() {
                errs.push(e);
            }
            if f.stop >= self.duration {
                errs.push(format!(
                    "flow {}: stop_s must be before duration_s ({} >= {})",
                    f.id, f.stop, self.duration
                ));
            }
        }
        let mut pairs = BTreeSet::new();
        for e in &self.edges {
            for sta in [e.a, e.b] {
                if !ids.contains(&sta) {
                    errs.push(format!("edge {}-{}: {sta} is not a node", e.a, e.b));
                }
            }
            if e.a == e.b {
                errs.push(format!("edge {}-{} is a self-loop", e.a, e.b));
            }
            if !(e.cost.is_finite() && e.cost > 0.0) {
                errs.push(format!("edge {}-{}: cost must be > 0", e.a, e.b));
            }
            if !pairs.insert((e.a.min(e.b), e.a.max(e.b))) {
                errs.push(format!("edge {}-{} is duplicated", e.a, e.b));
            }
        }
        for (section, r) in [
            ("mac", self.mac.validate()),
            ("channel", self.channel.validate()),
            ("routing", self.routing.validate()),
        ] {
            if let Err(e) = r {
                errs.push(format!("[{section}]: {e}"));
            }
        }
        if !(self.metrics.bin_ms.is_finite() && self.metrics.bin_ms > 0.0) {
            errs.push("[metrics]: bin_ms must be > 0".into());
        }
        errs
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }

    /// Serializes back to the file format.
    pub fn emit(&self) -> String {
        let always = vec![(SimTime::ZERO, SimTime::MAX)];
        let file = ScenarioFile {
            schema: SCHEMA_VERSION,
            name: self.name.clone(),
            description: self.description.clone(),
            seed: self.seed,
            duration_s: secs_out(self.duration),
            mode: self.mode,
            nodes: self
                .nodes
                .iter()
                .map(|n| FileNode {
                    id: n.id.0,
                    position: [n.position.x, n.position.y, n.position.z],
                    ap: n.ap,
                })
                .collect(),
            blockers: self
                .blockers
                .iter()
                .map(|b| FileBlocker {
                    center: [b.center.x, b.center.y, b.center.z],
                    size: [b.length, b.width, b.height],
                    extra_loss_db: b.extra_loss_db,
                    active: (b.active != always).then(|| {
                        b.active
                            .iter()
                            .map(|&(s, e)| [secs_out(s), secs_out(e)])
                            .collect()
                    }),
                })
                .collect(),
            flows: self
                .flows
                .iter()
                .map(|f| FileFlow {
                    id: f.id,
                    src: f.src.0,
                    dst: f.dst.0,
                    rate_mbps: f.rate_bps / 1e6,
                    packet_bytes: f.packet_bytes,
                    start_s: secs_out(f.start),
                    stop_s: secs_out(f.stop),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| FileEdge {
                    a: e.a.0,
                    b: e.b.0,
                    cost: e.cost,
                })
                .collect(),
            mac: self.mac.clone(),
            channel: toml::Table::try_from(&self.channel).ok(),
            routing: self.routing.clone(),
            metrics: self.metrics.clone(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }

    pub fn node(&self, id: StaId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn with_mode(&self, mode: Mode) -> Scenario {
        Scenario {
            mode,
            ..self.clone()
        }
    }

    /// Earliest blocker activation, if any blocker is ever active.
    pub fn first_blockage(&self) -> Option<SimTime> {
        self.blockers
            .iter()
            .filter_map(|b| b.active.first().map(|w| w.0))
            .min()
    }
}
