//! Search for the speedup time.
//!
//! For a candidate speedup time `t`, `H'(t) = s_s(t) + s_a(t)` splits the
//! problem into a trigger-only solve (enough nodes active by `t`) and an
//! activation-only solve (enough nodes by the horizon given a speedup at `t`).
//! `s_s` falls and `s_a` rises with `t`, which yields a local Lipschitz
//! constant per interval and a lower bound on `H'` inside it. The search keeps
//! splitting the interval with the lowest bound until that interval is short
//! relative to its constant, then solves the joint two-threshold problem at
//! the best point found.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::mminseed::{mminseed_with, MinSeedResult};
use crate::multi_im::{PrecisionParams, SolverConfig};
use crate::ris::{GroundSet, SampleCollection, ThresholdSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipProblem {
    pub trigger_required: usize,
    pub activation_required: usize,
    pub rate: f64,
    pub horizon: f64,
    pub precision: PrecisionParams,
    /// Spacing of candidate speedup times.
    pub grid: f64,
}

impl DipProblem {
    /// Grid spacing when none is given: `horizon / 256`.
    pub const DEFAULT_GRID_CELLS: f64 = 256.0;

    pub fn new(
        n: usize,
        trigger_required: usize,
        activation_required: usize,
        rate: f64,
        horizon: f64,
        precision: PrecisionParams,
        grid: Option<f64>,
    ) -> Result<Self> {
        let p = DipProblem {
            trigger_required,
            activation_required,
            rate,
            horizon,
            precision,
            grid: grid.unwrap_or(horizon / Self::DEFAULT_GRID_CELLS),
        };
        p.validate(n)?;
        Ok(p)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.trigger_required == 0 || self.trigger_required > n {
            return Err(Error::Infeasible(format!(
                "trigger count {} not in 1..={n}",
                self.trigger_required
            )));
        }
        if self.activation_required == 0 || self.activation_required > n {
            return Err(Error::Infeasible(format!(
                "activation count {} not in 1..={n}",
                self.activation_required
            )));
        }
        if !(self.rate.is_finite() && self.rate > 1.0) {
            return Err(Error::invalid(format!("rate {} must be > 1", self.rate)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon {} must be > 0",
                self.horizon
            )));
        }
        if !(self.grid > 0.0 && self.grid <= self.horizon) {
            return Err(Error::invalid(format!(
                "grid {} not in (0, {}]",
                self.grid, self.horizon
            )));
        }
        Ok(())
    }

    /// Warped deadline of the activation requirement for a speedup at `t`.
    pub fn activation_deadline(&self, t: f64) -> f64 {
        t + self.rate * (self.horizon - t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastConfig {
    pub solver: SolverConfig,
    pub max_iterations: usize,
    /// Lower clamp on local Lipschitz constants; `None` means `1 / horizon`.
    pub lipschitz_floor: Option<f64>,
}

impl Default for FastConfig {
    fn default() -> Self {
        FastConfig {
            solver: SolverConfig::default(),
            max_iterations: 100,
            lipschitz_floor: None,
        }
    }
}

/// `H'` at one candidate speedup time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub t: f64,
    pub s_s: usize,
    pub s_a: usize,
    pub h_prime: usize,
}

impl EvalPoint {
    pub fn new(t: f64, s_s: usize, s_a: usize) -> Self {
        EvalPoint {
            t,
            s_s,
            s_a,
            h_prime: s_s + s_a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FastResult {
    pub t_bar: f64,
    /// Joint two-threshold solution at `t_bar`.
    pub seeds: Vec<NodeId>,
    pub h_prime_t_bar: usize,
    pub h_t_bar: usize,
    /// Every evaluated point, ordered by `t`.
    pub h_prime_curve: Vec<EvalPoint>,
    /// Probes after the two endpoints.
    pub iterations: usize,
    /// False when the iteration cap stopped the search.
    pub converged: bool,
    pub final_solve: MinSeedResult,
}

/// Candidate times `min(i * grid, horizon)` for `i = 0..=cells`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub spacing: f64,
    pub horizon: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(spacing: f64, horizon: f64) -> Self {
        let cells = ((horizon / spacing) - 1e-9).ceil().max(1.0) as usize;
        Grid {
            spacing,
            horizon,
            cells,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        if i >= self.cells {
            self.horizon
        } else {
            i as f64 * self.spacing
        }
    }

    /// Nearest grid index.
    pub fn index(&self, t: f64) -> usize {
        if t >= self.horizon {
            return self.cells;
        }
        ((t / self.spacing).round().max(0.0) as usize).min(self.cells)
    }
}

/// `max(s_s(t1) - s_s(t2), s_a(t2) - s_a(t1)) / grid`, clamped below by
/// `floor`.
pub fn local_lipschitz(e1: &EvalPoint, e2: &EvalPoint, grid: f64, floor: f64) -> f64 {
    let drop_s = e1.s_s as f64 - e2.s_s as f64;
    let rise_a = e2.s_a as f64 - e1.s_a as f64;
    (drop_s.max(rise_a) / grid).max(floor)
}

/// Lower bound on `H'` over `[e1.t, e2.t]` given constant `l`.
pub fn interval_lower_bound(e1: &EvalPoint, e2: &EvalPoint, l: f64) -> f64 {
    (e1.h_prime as f64 + e2.h_prime as f64) / 2.0 - l * (e2.t - e1.t) / 2.0
}

/// Unsnapped probe: the minimiser of the two Lipschitz cones.
pub fn probe_point(e1: &EvalPoint, e2: &EvalPoint, l: f64) -> f64 {
    (e1.t + e2.t) / 2.0 + (e1.h_prime as f64 - e2.h_prime as f64) / (2.0 * l)
}

/// Probe snapped to the grid strictly inside `(e1.t, e2.t)`; a snap onto an
/// endpoint moves one cell inwards. `None` when no grid point lies inside.
pub fn next_probe(e1: &EvalPoint, e2: &EvalPoint, l: f64, grid: &Grid) -> Option<f64> {
    let (i1, i2) = (grid.index(e1.t), grid.index(e2.t));
    next_probe_index(e1, e2, l, grid, i1, i2).map(|i| grid.time(i))
}

fn next_probe_index(
    e1: &EvalPoint,
    e2: &EvalPoint,
    l: f64,
    grid: &Grid,
    i1: usize,
    i2: usize,
) -> Option<usize> {
    if i2 <= i1 + 1 {
        return None;
    }
    let raw = probe_point(e1, e2, l);
    let i = grid.index(raw.clamp(e1.t, e2.t));
    Some(i.clamp(i1 + 1, i2 - 1))
}

type SampleKey = (u64, u64);

/// Solver state for one problem: evaluated points and cached sample pools.
pub struct FastSolver<'g> {
    g: &'g Graph,
    problem: DipProblem,
    config: FastConfig,
    grid: Grid,
    cache: HashMap<SampleKey, SampleCollection>,
    points: BTreeMap<usize, EvalPoint>,
}

impl<'g> FastSolver<'g> {
    pub fn new(g: &'g Graph, problem: DipProblem, config: FastConfig) -> Result<Self> {
        problem.validate(g.node_count())?;
        let grid = Grid::new(problem.grid, problem.horizon);
        Ok(FastSolver {
            g,
            problem,
            config,
            grid,
            cache: HashMap::new(),
            points: BTreeMap::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn problem(&self) -> &DipProblem {
        &self.problem
    }

    fn lipschitz_floor(&self) -> f64 {
        self.config
            .lipschitz_floor
            .unwrap_or(1.0 / self.problem.horizon)
    }

    fn spec(&self, required: usize, deadline_w: f64) -> Result<ThresholdSpec> {
        ThresholdSpec::new(
            GroundSet::All {
                n: self.g.node_count(),
            },
            required,
            deadline_w,
        )
    }

    /// Minimum-seed solve over `specs`, reusing cached pools with the same
    /// ground set and deadline.
    pub fn solve_specs(&mut self, specs: &[ThresholdSpec]) -> Result<MinSeedResult> {
        let mut collections = Vec::with_capacity(specs.len());
        let mut keys = Vec::with_capacity(specs.len());
        for s in specs {
            let key = s.sample_key();
            let mut c = match keys.contains(&key) {
                // Same pool requested twice in one solve.
                true => collections
                    .iter()
                    .find(|c: &&SampleCollection| c.spec().sample_key() == key)
                    .cloned()
                    .expect("pool present"),
                false => self.cache.remove(&key).unwrap_or_else(|| {
                    SampleCollection::new(self.g.node_count(), s.clone(), self.config.solver.seed)
                }),
            };
            c.retarget(s.required())?;
            keys.push(key);
            collections.push(c);
        }
        let out = mminseed_with(
            self.g,
            &mut collections,
            &self.problem.precision,
            &self.config.solver,
        );
        for (key, c) in keys.into_iter().zip(collections) {
            let keep = self.cache.get(&key).is_none_or(|old| old.len() < c.len());
            if keep {
                self.cache.insert(key, c);
            }
        }
        out
    }

    /// `H'(t)` with `t` snapped to the grid.
    pub fn eval_h_prime(&mut self, t: f64) -> Result<EvalPoint> {
        if !(t >= 0.0 && t <= self.problem.horizon) {
            return Err(Error::invalid(format!(
                "speedup time {t} outside [0, {}]",
                self.problem.horizon
            )));
        }
        let i = self.grid.index(t);
        self.eval_index(i)
    }

    fn eval_index(&mut self, i: usize) -> Result<EvalPoint> {
        if let Some(p) = self.points.get(&i) {
            return Ok(*p);
        }
        let t = self.grid.time(i);
        let p = &self.problem;
        let (trigger, activation, deadline_a) = (
            p.trigger_required,
            p.activation_required,
            p.activation_deadline(t),
        );
        let s_s = if i == 0 {
            // Nothing propagates by time 0: the trigger must be seeded outright.
            trigger
        } else {
            let spec = self.spec(trigger, t)?;
            self.solve_specs(&[spec])?.seeds.len()
        };
        let spec = self.spec(activation, deadline_a)?;
        let s_a = self.solve_specs(&[spec])?.seeds.len();
        let point = EvalPoint::new(t, s_s, s_a);
        log::info!("H'({t:.4}) = {s_s} + {s_a} = {}", point.h_prime);
        self.points.insert(i, point);
        Ok(point)
    }

    /// Joint solve `H(t)`: trigger by `t` and activation by the horizon.
    pub fn solve_h(&mut self, t: f64) -> Result<MinSeedResult> {
        let p = &self.problem;
        let (trigger, activation, deadline_a) = (
            p.trigger_required,
            p.activation_required,
            p.activation_deadline(t),
        );
        let specs = [self.spec(trigger, t)?, self.spec(activation, deadline_a)?];
        self.solve_specs(&specs)
    }

    /// Drops cached pools that no longer belong to the incumbent point.
    fn prune_cache(&mut self, best_t: f64) {
        let n = self.g.node_count();
        let ground = GroundSet::All { n }.key();
        let keep = [
            (ground, best_t.to_bits()),
            (ground, self.problem.activation_deadline(best_t).to_bits()),
        ];
        self.cache.retain(|k, _| keep.contains(k));
    }

    fn best(&self) -> (usize, EvalPoint) {
        // Smallest H', earliest time on ties.
        let (&i, &p) = self
            .points
            .iter()
            .min_by_key(|(&i, p)| (p.h_prime, i))
            .expect("at least two points evaluated");
        (i, p)
    }

    pub fn run(&mut self) -> Result<FastResult> {
        let floor = self.lipschitz_floor();
        let spacing = self.problem.grid;
        self.eval_index(0)?;
        self.eval_index(self.grid.cells)?;
        self.prune_cache(self.best().1.t);

        let mut iterations = 0;
        let mut converged = false;
        loop {
            let pts: Vec<(usize, EvalPoint)> = self.points.iter().map(|(&i, &p)| (i, p)).collect();
            let mut pick: Option<(f64, usize, f64)> = None;
            for (w, pair) in pts.windows(2).enumerate() {
                let ((i1, a), (i2, b)) = (pair[0], pair[1]);
                let l = local_lipschitz(&a, &b, spacing, floor);
                // Adjacent grid points: nothing lies between, the bound is exact.
                let r = if i2 <= i1 + 1 {
                    a.h_prime.min(b.h_prime) as f64
                } else {
                    interval_lower_bound(&a, &b, l)
                };
                if pick.is_none_or(|(best, _, _)| r < best) {
                    pick = Some((r, w, l));
                }
            }
            let (_, w, l) = pick.expect("two or more points");
            let ((i1, a), (i2, b)) = (pts[w], pts[w + 1]);
            if i2 <= i1 + 1 || (b.t - a.t) < 1.0 / l {
                converged = true;
                break;
            }
            if iterations >= self.config.max_iterations {
                log::warn!(
                    "speedup search stopped at the iteration cap ({}); returning best so far",
                    self.config.max_iterations
                );
                break;
            }
            let probe = next_probe_index(&a, &b, l, &self.grid, i1, i2)
                .expect("interval has interior grid points");
            self.eval_index(probe)?;
            iterations += 1;
            self.prune_cache(self.best().1.t);
        }

        let (_, best) = self.best();
        let final_solve = self.solve_h(best.t)?;
        Ok(FastResult {
            t_bar: best.t,
            seeds: final_solve.seeds.clone(),
            h_prime_t_bar: best.h_prime,
            h_t_bar: final_solve.seeds.len(),
            h_prime_curve: self.points.values().copied().collect(),
            iterations,
            converged,
            final_solve,
        })
    }
}

pub fn fast(g: &Graph, problem: DipProblem, config: FastConfig) -> Result<FastResult> {
    FastSolver::new(g, problem, config)?.run()
}
