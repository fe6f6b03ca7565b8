//! Serialized command outputs. Every JSON document carries `"schema": 1`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tapdip_core::{EvalPoint, Graph, GraphStats, NodeId};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
}

impl GraphSummary {
    pub fn of(g: &Graph) -> Self {
        GraphSummary {
            nodes: g.node_count(),
            edges: g.edge_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemEcho {
    pub trigger_required: Option<usize>,
    pub activation_required: usize,
    pub rate: Option<f64>,
    pub horizon: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub grid: Option<f64>,
    pub seed: u64,
}

/// Budget search trace of one minimum-seed solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetTrace {
    pub budget: usize,
    pub f_hat: f64,
    pub target: f64,
    pub rounds: usize,
    pub budgets: Vec<usize>,
    pub f_hats: Vec<f64>,
    pub sample_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: u32,
    pub command: String,
    pub graph: GraphSummary,
    pub problem: ProblemEcho,
    pub t_bar: f64,
    /// External ids.
    pub seeds: Vec<u64>,
    pub h_prime_t_bar: usize,
    pub h_t_bar: usize,
    pub iterations: usize,
    pub converged: bool,
    pub h_prime_curve: Vec<EvalPoint>,
    pub final_solve: BudgetTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOverlap {
    pub fast: usize,
    pub base: usize,
    pub shared: usize,
    /// Shared seeds over the union of both sets.
    pub shared_fraction: f64,
}

impl SeedOverlap {
    pub fn between(fast: &[u64], base: &[u64]) -> Self {
        let a: BTreeSet<u64> = fast.iter().copied().collect();
        let b: BTreeSet<u64> = base.iter().copied().collect();
        let shared = a.intersection(&b).count();
        let union = a.union(&b).count();
        SeedOverlap {
            fast: a.len(),
            base: b.len(),
            shared,
            shared_fraction: if union == 0 {
                0.0
            } else {
                shared as f64 / union as f64
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseTapReport {
    pub schema: u32,
    pub command: String,
    pub graph: GraphSummary,
    pub problem: ProblemEcho,
    pub seeds: Vec<u64>,
    pub solve: BudgetTrace,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub overlap: Option<SeedOverlap>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Fast,
    Base,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimMode {
    Dip { trigger_required: usize, rate: f64 },
    Fixed { speedup_at: Option<f64>, rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub command: String,
    pub source: Option<SeedSource>,
    pub mode: SimMode,
    pub seed_count: usize,
    pub activation_required: usize,
    pub horizon: f64,
    pub mean: f64,
    pub stderr: f64,
    pub fraction_of_requirement: f64,
    /// Share of runs that reached the trigger; dip mode only.
    pub trigger_rate: Option<f64>,
    pub runs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub schema: u32,
    pub command: String,
    #[serde(flatten)]
    pub stats: GraphStats,
}

pub fn external(g: &Graph, seeds: &[NodeId]) -> Vec<u64> {
    seeds.iter().map(|&v| g.external_id(v)).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or stdout when `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Output {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
