//! Run configuration: a JSON file mirroring [`RunConfig`], overridden field
//! by field from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tapdip_core::ris::ceil_count;
use tapdip_core::{DelayDist, Directedness, Graph, PrecisionParams};

use crate::error::CliError;

/// Edge probability assignment applied after loading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weighting {
    /// `p(u, v) = 1 / indeg(v)`.
    #[default]
    WeightedCascade,
    Uniform {
        p: f64,
    },
}

impl FromStr for Weighting {
    type Err = String;

    /// `wc` or `uniform:<p>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "wc" || s == "weighted_cascade" => Ok(Weighting::WeightedCascade),
            Some(("uniform", p)) => p
                .parse()
                .map(|p| Weighting::Uniform { p })
                .map_err(|_| format!("bad probability in {s:?}")),
            _ => Err(format!(
                "unknown weighting {s:?}; expected wc or uniform:<p>"
            )),
        }
    }
}

/// Parses `weibull:<shape>,<scale>`, `deterministic:<value>` or
/// `exponential:<rate>`.
pub fn parse_delay(s: &str) -> Result<DelayDist, String> {
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| format!("delay {s:?} needs the form kind:args"))?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("bad number in delay {s:?}"))?;
    let d = match (kind, nums.as_slice()) {
        ("weibull", [k, lambda]) => DelayDist::weibull(*k, *lambda),
        ("deterministic", [v]) => DelayDist::deterministic(*v),
        ("exponential", [rate]) => DelayDist::exponential(*rate),
        _ => return Err(format!("unknown delay {s:?}")),
    };
    d.map_err(|e| e.to_string())
}

/// Failure probability: a literal value or `1/n`, resolved once the graph is
/// loaded.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Delta {
    #[default]
    PerNode,
    Value(f64),
}

impl Delta {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            Delta::PerNode => 1.0 / n as f64,
            Delta::Value(d) => d,
        }
    }
}

impl FromStr for Delta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "1/n" {
            return Ok(Delta::PerNode);
        }
        s.parse::<f64>()
            .map(Delta::Value)
            .map_err(|_| format!("delta {s:?} is neither a number nor \"1/n\""))
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::PerNode => f.write_str("1/n"),
            Delta::Value(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeltaRepr {
    Number(f64),
    Text(String),
}

impl Serialize for Delta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Delta::PerNode => DeltaRepr::Text("1/n".into()),
            Delta::Value(d) => DeltaRepr::Number(*d),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Delta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match DeltaRepr::deserialize(d)? {
            DeltaRepr::Number(x) => Ok(Delta::Value(x)),
            DeltaRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    /// Read each line as an undirected edge.
    pub undirected: bool,
    pub weighting: Weighting,
    pub delay: DelayDist,
    pub trigger_count: Option<usize>,
    pub trigger_frac: Option<f64>,
    pub activate_count: Option<usize>,
    pub activate_frac: Option<f64>,
    pub rate: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub delta: Delta,
    pub grid: Option<f64>,
    pub seed: u64,
    /// Worker threads; results are identical for any value.
    pub workers: Option<usize>,
    /// Simulation runs for `simulate`.
    pub runs: usize,
    pub max_iterations: usize,
    pub sample_cap: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: None,
            undirected: false,
            weighting: Weighting::default(),
            delay: DelayDist::default(),
            trigger_count: None,
            trigger_frac: None,
            activate_count: None,
            activate_frac: None,
            rate: 2.0,
            horizon: 10.0,
            epsilon: 0.1,
            delta: Delta::PerNode,
            grid: None,
            seed: 0,
            workers: None,
            runs: 10_000,
            max_iterations: 100,
            sample_cap: 1 << 22,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Loads the graph and applies weighting and delays.
    pub fn load_graph(&self) -> Result<Graph, CliError> {
        let path = self
            .graph
            .as_ref()
            .ok_or_else(|| CliError::Config("no graph given (--graph)".into()))?;
        let dir = if self.undirected {
            Directedness::Symmetrize
        } else {
            Directedness::Directed
        };
        let g = Graph::load_edge_list(path, dir).map_err(CliError::Ingest)?;
        let g = match self.weighting {
            Weighting::WeightedCascade => g.assign_weighted_cascade(),
            Weighting::Uniform { p } => g
                .assign_uniform_probability(p)
                .map_err(|e| CliError::Config(e.to_string()))?,
        };
        g.assign_delay(self.delay)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn precision(&self, n: usize) -> Result<PrecisionParams, CliError> {
        PrecisionParams::new(self.epsilon, self.delta.resolve(n))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn trigger_required(&self, n: usize) -> Result<usize, CliError> {
        resolve_count("trigger", self.trigger_count, self.trigger_frac, n)
    }

    pub fn activation_required(&self, n: usize) -> Result<usize, CliError> {
        resolve_count("activation", self.activate_count, self.activate_frac, n)
    }
}

/// Counts win over fractions when both are set.
fn resolve_count(
    what: &str,
    count: Option<usize>,
    frac: Option<f64>,
    n: usize,
) -> Result<usize, CliError> {
    match (count, frac) {
        (Some(c), _) => Ok(c),
        (None, Some(f)) if f > 0.0 && f <= 1.0 => Ok(ceil_count(f, n)),
        (None, Some(f)) => Err(CliError::Config(format!(
            "{what} fraction {f} not in (0, 1]"
        ))),
        (None, None) => Err(CliError::Config(format!(
            "no {what} requirement given (count or fraction)"
        ))),
    }
}
