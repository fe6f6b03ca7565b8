//! Continuous independent cascade with a one-shot rate increase.
//!
//! A rate profile that equals 1 before the speedup time `t_s` and `r` after it
//! is handled through a warped clock `W` with `W'(x) = rho(x)`: every live
//! edge consumes exactly its sampled delay in warped units. All traversal
//! happens in warped time and converts back at the boundary, so a single
//! earliest-arrival search covers both the fixed and the trend-triggered case.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::seeds;

/// Fixed rate profile: rate 1 up to `speedup_at`, `rate` afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupSchedule {
    speedup_at: Option<f64>,
    rate: f64,
}

impl SpeedupSchedule {
    /// Rate 1 throughout.
    pub fn none() -> Self {
        SpeedupSchedule {
            speedup_at: None,
            rate: 1.0,
        }
    }

    pub fn at(speedup_at: f64, rate: f64) -> Result<Self> {
        if !(speedup_at.is_finite() && speedup_at >= 0.0) {
            return Err(Error::invalid(format!(
                "speedup time {speedup_at} must be >= 0"
            )));
        }
        if !(rate.is_finite() && rate > 1.0) {
            return Err(Error::invalid(format!("rate {rate} must be > 1")));
        }
        Ok(SpeedupSchedule {
            speedup_at: Some(speedup_at),
            rate,
        })
    }

    pub fn speedup_at(&self) -> Option<f64> {
        self.speedup_at
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Real time to warped time.
    pub fn warp(&self, x: f64) -> Result<f64> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::invalid(format!("negative time {x}")));
        }
        Ok(self.warp_unchecked(x))
    }

    #[inline]
    pub(crate) fn warp_unchecked(&self, x: f64) -> f64 {
        match self.speedup_at {
            Some(ts) if x > ts => ts + self.rate * (x - ts),
            _ => x,
        }
    }

    /// Warped time to real time.
    #[inline]
    pub fn unwarp(&self, w: f64) -> f64 {
        match self.speedup_at {
            Some(ts) if w > ts => ts + (w - ts) / self.rate,
            _ => w,
        }
    }
}

/// Source of per-edge randomness for one realisation.
pub trait EdgeDraws {
    /// `Some(delay)` when the edge is live. Called at most once per edge per
    /// traversal.
    fn draw(&mut self, g: &Graph, edge: usize) -> Option<f64>;
}

/// Samples liveness and delay on demand.
pub struct LazyDraws<'r, R: ?Sized>(pub &'r mut R);

impl<R: Rng + ?Sized> EdgeDraws for LazyDraws<'_, R> {
    #[inline]
    fn draw(&mut self, g: &Graph, edge: usize) -> Option<f64> {
        g.edge(edge).draw(self.0)
    }
}

/// A fully materialised realisation, for coupled comparisons.
#[derive(Clone, Debug)]
pub struct Realization {
    pub draws: Vec<Option<f64>>,
}

impl Realization {
    pub fn sample<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> Self {
        Realization {
            draws: g.edges().iter().map(|e| e.draw(rng)).collect(),
        }
    }
}

impl EdgeDraws for Realization {
    #[inline]
    fn draw(&mut self, _g: &Graph, edge: usize) -> Option<f64> {
        self.draws[edge]
    }
}

impl EdgeDraws for &Realization {
    #[inline]
    fn draw(&mut self, _g: &Graph, edge: usize) -> Option<f64> {
        self.draws[edge]
    }
}

/// Result of one forward run; activation times are real times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOutcome {
    /// `(node, real activation time)` in activation order.
    pub activations: Vec<(NodeId, f64)>,
    pub trigger_time: Option<f64>,
    /// Set when the run was asked to start from no seeds.
    pub empty_seeds: bool,
}

impl SimOutcome {
    pub fn activated(&self) -> usize {
        self.activations.len()
    }

    /// Number of nodes active at real time `t`.
    pub fn activated_count_at(&self, t: f64) -> usize {
        self.activations.partition_point(|&(_, at)| at <= t)
    }

    pub fn activation_time(&self, v: NodeId) -> Option<f64> {
        self.activations
            .iter()
            .find(|&&(u, _)| u == v)
            .map(|&(_, t)| t)
    }
}

#[derive(Clone, Copy, PartialEq)]
pub(crate) struct Arrival {
    pub at: f64,
    pub node: u32,
}

impl Eq for Arrival {}

impl Ord for Arrival {
    // Min-heap on (time, node id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable buffers for forward runs on one graph.
pub struct ForwardScratch {
    dist: Vec<f64>,
    stamp: Vec<u32>,
    settled: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Arrival>,
}

impl ForwardScratch {
    pub fn new(n: usize) -> Self {
        ForwardScratch {
            dist: vec![f64::INFINITY; n],
            stamp: vec![0; n],
            settled: vec![0; n],
            epoch: 0,
            heap: BinaryHeap::new(),
        }
    }

    fn reset(&mut self) {
        self.heap.clear();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.settled.fill(0);
            self.epoch = 1;
        }
    }
}

enum Mode {
    Fixed {
        deadline_w: f64,
    },
    Dip {
        trigger_count: usize,
        rate: f64,
        horizon: f64,
    },
}

/// Earliest-arrival run in warped time. Returns warped activation times in
/// order and the warped trigger time for the dynamic rule.
fn propagate<D: EdgeDraws>(
    g: &Graph,
    seeds: &[NodeId],
    draws: &mut D,
    mode: Mode,
    scratch: &mut ForwardScratch,
    out: &mut Vec<(NodeId, f64)>,
) -> Option<f64> {
    scratch.reset();
    out.clear();
    let epoch = scratch.epoch;
    let (mut stop_at, push_bound, dip) = match mode {
        Mode::Fixed { deadline_w } => (deadline_w, deadline_w, None),
        // Before the trigger the run may only settle nodes up to the horizon;
        // arrivals up to `rate * horizon` can still count once it fires.
        Mode::Dip {
            trigger_count,
            rate,
            horizon,
        } => (
            horizon,
            rate * horizon,
            Some((trigger_count, rate, horizon)),
        ),
    };
    let mut push_bound = push_bound;
    let mut trigger = None;
    for &s in seeds {
        let i = s.index();
        if scratch.stamp[i] != epoch || scratch.dist[i] > 0.0 {
            scratch.stamp[i] = epoch;
            scratch.dist[i] = 0.0;
            scratch.heap.push(Arrival { at: 0.0, node: s.0 });
        }
    }
    while let Some(Arrival { at, node }) = scratch.heap.pop() {
        if at > stop_at {
            break;
        }
        let v = node as usize;
        if scratch.settled[v] == epoch {
            continue;
        }
        scratch.settled[v] = epoch;
        out.push((NodeId(node), at));
        if let Some((trigger_count, rate, horizon)) = dip {
            if trigger.is_none() && out.len() >= trigger_count {
                trigger = Some(at);
                stop_at = at + rate * (horizon - at);
                push_bound = stop_at;
            }
        }
        for &e in g.out_edges(NodeId(node)) {
            let e = e as usize;
            let u = g.edge(e).dst.index();
            if scratch.settled[u] == epoch {
                continue;
            }
            let Some(delay) = draws.draw(g, e) else {
                continue;
            };
            let arrive = at + delay;
            if arrive > push_bound {
                continue;
            }
            if scratch.stamp[u] != epoch || arrive < scratch.dist[u] {
                scratch.stamp[u] = epoch;
                scratch.dist[u] = arrive;
                scratch.heap.push(Arrival {
                    at: arrive,
                    node: u as u32,
                });
            }
        }
    }
    trigger
}

fn check_seeds(g: &Graph, seeds: &[NodeId]) -> Result<()> {
    match seeds.iter().find(|s| s.index() >= g.node_count()) {
        Some(s) => Err(Error::UnknownNode(s.0 as u64)),
        None => Ok(()),
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "horizon {horizon} must be finite and >= 0"
        )))
    }
}

/// Forward run under a fixed schedule with edge randomness from `draws`.
pub fn simulate_fixed_with<D: EdgeDraws>(
    g: &Graph,
    seeds: &[NodeId],
    schedule: &SpeedupSchedule,
    horizon: f64,
    draws: &mut D,
    scratch: &mut ForwardScratch,
) -> Result<SimOutcome> {
    check_seeds(g, seeds)?;
    check_horizon(horizon)?;
    let mut acts = Vec::new();
    propagate(
        g,
        seeds,
        draws,
        Mode::Fixed {
            deadline_w: schedule.warp_unchecked(horizon),
        },
        scratch,
        &mut acts,
    );
    for a in &mut acts {
        a.1 = schedule.unwarp(a.1).min(horizon);
    }
    Ok(SimOutcome {
        activations: acts,
        trigger_time: None,
        empty_seeds: seeds.is_empty(),
    })
}

/// Forward run under a fixed schedule.
pub fn simulate_fixed<R: Rng + ?Sized>(
    g: &Graph,
    seeds: &[NodeId],
    schedule: &SpeedupSchedule,
    horizon: f64,
    rng: &mut R,
) -> Result<SimOutcome> {
    let mut scratch = ForwardScratch::new(g.node_count());
    simulate_fixed_with(
        g,
        seeds,
        schedule,
        horizon,
        &mut LazyDraws(rng),
        &mut scratch,
    )
}

/// Forward run where the rate jumps to `rate` as soon as `trigger_count`
/// nodes are active. In-flight delays shrink with the jump.
pub fn simulate_dip_with<D: EdgeDraws>(
    g: &Graph,
    seeds: &[NodeId],
    trigger_count: usize,
    rate: f64,
    horizon: f64,
    draws: &mut D,
    scratch: &mut ForwardScratch,
) -> Result<SimOutcome> {
    check_seeds(g, seeds)?;
    check_horizon(horizon)?;
    if trigger_count == 0 {
        return Err(Error::invalid("trigger count must be >= 1"));
    }
    if trigger_count > g.node_count() {
        return Err(Error::UnreachableTrigger {
            trigger: trigger_count,
            n: g.node_count(),
        });
    }
    if !(rate.is_finite() && rate > 1.0) {
        return Err(Error::invalid(format!("rate {rate} must be > 1")));
    }
    let mut acts = Vec::new();
    let trigger = propagate(
        g,
        seeds,
        draws,
        Mode::Dip {
            trigger_count,
            rate,
            horizon,
        },
        scratch,
        &mut acts,
    );
    if let Some(w0) = trigger {
        let schedule = SpeedupSchedule {
            speedup_at: Some(w0),
            rate,
        };
        for a in &mut acts {
            a.1 = schedule.unwarp(a.1).min(horizon);
        }
    }
    Ok(SimOutcome {
        activations: acts,
        trigger_time: trigger,
        empty_seeds: seeds.is_empty(),
    })
}

pub fn simulate_dip<R: Rng + ?Sized>(
    g: &Graph,
    seeds: &[NodeId],
    trigger_count: usize,
    rate: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<SimOutcome> {
    let mut scratch = ForwardScratch::new(g.node_count());
    simulate_dip_with(
        g,
        seeds,
        trigger_count,
        rate,
        horizon,
        &mut LazyDraws(rng),
        &mut scratch,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Fraction of runs in which the trigger fired within the horizon.
    pub trigger_rate: f64,
    pub runs: usize,
}

fn mean_stderr(counts: &[usize]) -> (f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if counts.len() < 2 {
        return (mean, 0.0);
    }
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo influence under a fixed schedule. Run `i` draws from its own
/// stream derived from `seed`, so the result does not depend on the size of
/// the current rayon pool.
pub fn estimate_influence_mc(
    g: &Graph,
    seeds: &[NodeId],
    schedule: &SpeedupSchedule,
    horizon: f64,
    runs: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_seeds(g, seeds)?;
    check_horizon(horizon)?;
    if runs == 0 {
        return Err(Error::invalid("runs must be >= 1"));
    }
    let deadline_w = schedule.warp_unchecked(horizon);
    let counts: Vec<usize> = (0..runs)
        .into_par_iter()
        .map_init(
            || (ForwardScratch::new(g.node_count()), Vec::new()),
            |(scratch, acts), i| {
                let mut rng = seeds::stream_rng(seed, seeds::TAG_FIXED_MC, i as u64);
                propagate(
                    g,
                    seeds,
                    &mut LazyDraws(&mut rng),
                    Mode::Fixed { deadline_w },
                    scratch,
                    acts,
                );
                acts.len()
            },
        )
        .collect();
    let (mean, stderr) = mean_stderr(&counts);
    Ok(McEstimate { mean, stderr, runs })
}

/// Monte Carlo activated count under the trend-triggered rule.
pub fn estimate_dip_mc(
    g: &Graph,
    seeds: &[NodeId],
    trigger_count: usize,
    rate: f64,
    horizon: f64,
    runs: usize,
    seed: u64,
) -> Result<DipEstimate> {
    check_seeds(g, seeds)?;
    check_horizon(horizon)?;
    if runs == 0 {
        return Err(Error::invalid("runs must be >= 1"));
    }
    if trigger_count == 0 || trigger_count > g.node_count() {
        return Err(Error::UnreachableTrigger {
            trigger: trigger_count,
            n: g.node_count(),
        });
    }
    if !(rate.is_finite() && rate > 1.0) {
        return Err(Error::invalid(format!("rate {rate} must be > 1")));
    }
    let results: Vec<(usize, bool)> = (0..runs)
        .into_par_iter()
        .map_init(
            || (ForwardScratch::new(g.node_count()), Vec::new()),
            |(scratch, acts), i| {
                let mut rng = seeds::stream_rng(seed, seeds::TAG_DIP_MC, i as u64);
                let trig = propagate(
                    g,
                    seeds,
                    &mut LazyDraws(&mut rng),
                    Mode::Dip {
                        trigger_count,
                        rate,
                        horizon,
                    },
                    scratch,
                    acts,
                );
                (acts.len(), trig.is_some())
            },
        )
        .collect();
    let counts: Vec<usize> = results.iter().map(|r| r.0).collect();
    let (mean, stderr) = mean_stderr(&counts);
    let fired = results.iter().filter(|r| r.1).count();
    Ok(DipEstimate {
        mean,
        stderr,
        trigger_rate: fired as f64 / runs as f64,
        runs,
    })
}
