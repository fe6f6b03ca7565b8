//! Command bodies. Each takes a loaded graph and returns its report, so the
//! harness can be driven without going through files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tapdip_core::ris::GroundSet;
use tapdip_core::{
    estimate_dip_mc, estimate_influence_mc, fast, mminseed, DipProblem, FastConfig, Graph,
    MinSeedResult, NodeId, SolverConfig, SpeedupSchedule, ThresholdSpec,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{
    external, BaseTapReport, BudgetTrace, EvalReport, GraphSummary, ProblemEcho, SeedOverlap,
    SeedSource, SimMode, SolveReport, SCHEMA,
};

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        seed: cfg.seed,
        hard_cap: cfg.sample_cap,
    }
}

fn trace(r: &MinSeedResult) -> BudgetTrace {
    BudgetTrace {
        budget: r.budget,
        f_hat: r.f_hat,
        target: r.target,
        rounds: r.rounds,
        budgets: r.budgets.clone(),
        f_hats: r.f_hats.clone(),
        sample_sizes: r.sample_sizes.clone(),
    }
}

pub fn dip_problem(cfg: &RunConfig, g: &Graph) -> Result<DipProblem, CliError> {
    let n = g.node_count();
    if let Some(grid) = cfg.grid {
        if grid.is_nan() || grid <= 0.0 {
            return Err(CliError::Config(format!("grid {grid} must be > 0")));
        }
    }
    let problem = DipProblem::new(
        n,
        cfg.trigger_required(n)?,
        cfg.activation_required(n)?,
        cfg.rate,
        cfg.horizon,
        cfg.precision(n)?,
        cfg.grid,
    )?;
    Ok(problem)
}

/// Speedup-time search plus the final joint solve.
pub fn solve(cfg: &RunConfig, g: &Graph) -> Result<SolveReport, CliError> {
    let problem = dip_problem(cfg, g)?;
    let config = FastConfig {
        solver: solver_config(cfg),
        max_iterations: cfg.max_iterations,
        lipschitz_floor: None,
    };
    let echo = ProblemEcho {
        trigger_required: Some(problem.trigger_required),
        activation_required: problem.activation_required,
        rate: Some(problem.rate),
        horizon: problem.horizon,
        epsilon: problem.precision.epsilon,
        delta: problem.precision.delta,
        grid: Some(problem.grid),
        seed: cfg.seed,
    };
    let r = fast(g, problem, config)?;
    Ok(SolveReport {
        schema: SCHEMA,
        command: "solve".into(),
        graph: GraphSummary::of(g),
        problem: echo,
        t_bar: r.t_bar,
        seeds: external(g, &r.seeds),
        h_prime_t_bar: r.h_prime_t_bar,
        h_t_bar: r.h_t_bar,
        iterations: r.iterations,
        converged: r.converged,
        h_prime_curve: r.h_prime_curve,
        final_solve: trace(&r.final_solve),
    })
}

/// Minimum seeds reaching the activation requirement by the horizon with no
/// speedup. The trigger is ignored.
pub fn base_tap(cfg: &RunConfig, g: &Graph) -> Result<BaseTapReport, CliError> {
    let n = g.node_count();
    let activation = cfg.activation_required(n)?;
    let precision = cfg.precision(n)?;
    if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
        return Err(CliError::Config(format!(
            "horizon {} must be > 0",
            cfg.horizon
        )));
    }
    if activation == 0 || activation > n {
        return Err(tapdip_core::Error::Infeasible(format!(
            "activation count {activation} not in 1..={n}"
        ))
        .into());
    }
    let spec = ThresholdSpec::new(GroundSet::All { n }, activation, cfg.horizon)?;
    let r = mminseed(g, &[spec], &precision, &solver_config(cfg))?;
    Ok(BaseTapReport {
        schema: SCHEMA,
        command: "base-tap".into(),
        graph: GraphSummary::of(g),
        problem: ProblemEcho {
            trigger_required: None,
            activation_required: activation,
            rate: None,
            horizon: cfg.horizon,
            epsilon: precision.epsilon,
            delta: precision.delta,
            grid: None,
            seed: cfg.seed,
        },
        seeds: external(g, &r.seeds),
        solve: trace(&r),
        overlap: None,
    })
}

/// Attaches the overlap with a FAST seed set to a base-TAP report.
pub fn with_overlap(mut report: BaseTapReport, fast_seeds: &[u64]) -> BaseTapReport {
    report.overlap = Some(SeedOverlap::between(fast_seeds, &report.seeds));
    report
}

/// Seeds from a file: a JSON array of external ids, or any report with a
/// `seeds` array (its `command` then names the source).
pub fn read_seed_file(path: &Path) -> Result<(Vec<u64>, Option<SeedSource>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    let (list, source) = match &value {
        serde_json::Value::Array(_) => (value.clone(), None),
        serde_json::Value::Object(map) => {
            let source = match map.get("command").and_then(|c| c.as_str()) {
                Some("solve") => Some(SeedSource::Fast),
                Some("base-tap") => Some(SeedSource::Base),
                _ => None,
            };
            let seeds = map.get("seeds").cloned().ok_or_else(|| {
                CliError::BadInput(format!("{}: no \"seeds\" array", path.display()))
            })?;
            (seeds, source)
        }
        _ => {
            return Err(CliError::BadInput(format!(
                "{}: expected a JSON array of node ids",
                path.display()
            )))
        }
    };
    let ids: Vec<u64> = serde_json::from_value(list)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    Ok((ids, source))
}

pub fn resolve_seeds(g: &Graph, ids: &[u64]) -> Result<Vec<NodeId>, CliError> {
    if ids.is_empty() {
        return Err(CliError::BadInput("seed set is empty".into()));
    }
    ids.iter()
        .map(|&x| {
            g.lookup_external(x)
                .ok_or(CliError::Solver(tapdip_core::Error::UnknownNode(x)))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimulateMode {
    Dip,
    Fixed { speedup_at: Option<f64> },
}

/// Forward Monte Carlo evaluation of a seed set.
pub fn simulate(
    cfg: &RunConfig,
    g: &Graph,
    seeds: &[NodeId],
    mode: SimulateMode,
    source: Option<SeedSource>,
) -> Result<EvalReport, CliError> {
    let n = g.node_count();
    let activation = cfg.activation_required(n)?;
    if activation == 0 {
        return Err(CliError::Config(
            "activation requirement must be >= 1".into(),
        ));
    }
    let (mean, stderr, trigger_rate, mode) = match mode {
        SimulateMode::Dip => {
            let trigger = cfg.trigger_required(n)?;
            let e = estimate_dip_mc(g, seeds, trigger, cfg.rate, cfg.horizon, cfg.runs, cfg.seed)?;
            let mode = SimMode::Dip {
                trigger_required: trigger,
                rate: cfg.rate,
            };
            (e.mean, e.stderr, Some(e.trigger_rate), mode)
        }
        SimulateMode::Fixed { speedup_at } => {
            let schedule = match speedup_at {
                Some(ts) => SpeedupSchedule::at(ts, cfg.rate)?,
                None => SpeedupSchedule::none(),
            };
            let e = estimate_influence_mc(g, seeds, &schedule, cfg.horizon, cfg.runs, cfg.seed)?;
            let mode = SimMode::Fixed {
                speedup_at,
                rate: cfg.rate,
            };
            (e.mean, e.stderr, None, mode)
        }
    };
    Ok(EvalReport {
        schema: SCHEMA,
        command: "simulate".into(),
        source,
        mode,
        seed_count: seeds.len(),
        activation_required: activation,
        horizon: cfg.horizon,
        mean,
        stderr,
        fraction_of_requirement: mean / activation as f64,
        trigger_rate,
        runs: cfg.runs,
        seed: cfg.seed,
    })
}

/// One sweep cell. Failed cells keep their axis values and carry the error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub rate: f64,
    pub trigger_required: usize,
    pub activation_required: usize,
    pub t_bar: Option<f64>,
    pub seeds: Option<usize>,
    pub h_prime_t_bar: Option<usize>,
    pub iterations: Option<usize>,
    pub error: String,
}

/// Solves every cell of the `rates x triggers x activations` grid.
pub fn sweep(
    cfg: &RunConfig,
    g: &Graph,
    rates: &[f64],
    triggers: &[usize],
    activations: &[usize],
) -> Result<Vec<SweepRow>, CliError> {
    if rates.is_empty() || triggers.is_empty() || activations.is_empty() {
        return Err(CliError::Config("sweep axes must be non-empty".into()));
    }
    let mut rows = Vec::with_capacity(rates.len() * triggers.len() * activations.len());
    for &rate in rates {
        for &trigger in triggers {
            for &activation in activations {
                let cell = RunConfig {
                    rate,
                    trigger_count: Some(trigger),
                    activate_count: Some(activation),
                    ..cfg.clone()
                };
                let mut row = SweepRow {
                    rate,
                    trigger_required: trigger,
                    activation_required: activation,
                    t_bar: None,
                    seeds: None,
                    h_prime_t_bar: None,
                    iterations: None,
                    error: String::new(),
                };
                match solve(&cell, g) {
                    Ok(r) => {
                        row.t_bar = Some(r.t_bar);
                        row.seeds = Some(r.seeds.len());
                        row.h_prime_t_bar = Some(r.h_prime_t_bar);
                        row.iterations = Some(r.iterations);
                    }
                    Err(e) => {
                        log::warn!(
                            "sweep cell r={rate} trigger={trigger} activation={activation}: {e}"
                        );
                        row.error = e.to_string();
                    }
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("utf-8 csv")
}

/// One threshold of an `mtap` spec file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdEntry {
    pub ground_set: GroundEntry,
    /// Integer JSON numbers are counts, others fractions of the ground set.
    pub required: serde_json::Number,
    /// Real-time deadline.
    pub deadline: f64,
    #[serde(default)]
    pub rate_profile: Option<RateProfile>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GroundEntry {
    /// Only `"all"`.
    Named(String),
    /// External ids.
    Ids(Vec<u64>),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateProfile {
    pub speedup_at: f64,
    pub rate: f64,
}

pub fn read_threshold_file(path: &Path) -> Result<Vec<ThresholdEntry>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::BadInput(format!("{}: {e}", path.display())))?;
    let entries: Vec<ThresholdEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no thresholds",
            path.display()
        )));
    }
    Ok(entries)
}

pub fn threshold_specs(
    g: &Graph,
    entries: &[ThresholdEntry],
) -> Result<Vec<ThresholdSpec>, CliError> {
    let n = g.node_count();
    entries
        .iter()
        .map(|e| {
            let ground = match &e.ground_set {
                GroundEntry::Named(s) if s == "all" => GroundSet::All { n },
                GroundEntry::Named(s) => {
                    return Err(CliError::Config(format!("unknown ground set {s:?}")))
                }
                GroundEntry::Ids(ids) => GroundSet::nodes(resolve_seeds(g, ids)?),
            };
            let deadline_w = match e.rate_profile {
                Some(rp) => SpeedupSchedule::at(rp.speedup_at, rp.rate)?.warp(e.deadline)?,
                None if e.deadline >= 0.0 => e.deadline,
                None => return Err(CliError::Config(format!("deadline {} < 0", e.deadline))),
            };
            let spec = if let Some(count) = e.required.as_u64() {
                if count as usize > ground.len() {
                    return Err(tapdip_core::Error::Infeasible(format!(
                        "required {count} exceeds ground set size {}",
                        ground.len()
                    ))
                    .into());
                }
                ThresholdSpec::new(ground, count as usize, deadline_w)
            } else {
                let f = e.required.as_f64().unwrap_or(f64::NAN);
                if !(f > 0.0 && f <= 1.0) {
                    return Err(CliError::Config(format!(
                        "required fraction {f} not in (0, 1]"
                    )));
                }
                ThresholdSpec::with_fraction(ground, f, deadline_w)
            };
            spec.map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEcho {
    pub ground_size: usize,
    pub required: usize,
    pub deadline_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MtapReport {
    pub schema: u32,
    pub command: String,
    pub graph: GraphSummary,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub thresholds: Vec<ThresholdEcho>,
    pub seeds: Vec<u64>,
    pub solve: BudgetTrace,
}

/// Minimum seeds meeting every threshold in `specs`.
pub fn mtap(cfg: &RunConfig, g: &Graph, specs: &[ThresholdSpec]) -> Result<MtapReport, CliError> {
    let precision = cfg.precision(g.node_count())?;
    let r = mminseed(g, specs, &precision, &solver_config(cfg))?;
    Ok(MtapReport {
        schema: SCHEMA,
        command: "mtap".into(),
        graph: GraphSummary::of(g),
        epsilon: precision.epsilon,
        delta: precision.delta,
        seed: cfg.seed,
        thresholds: specs
            .iter()
            .map(|s| ThresholdEcho {
                ground_size: s.ground().len(),
                required: s.required(),
                deadline_w: s.deadline_w(),
            })
            .collect(),
        seeds: external(g, &r.seeds),
        solve: trace(&r),
    })
}
