//! Minimum seed sets for threshold activation when the propagation rate jumps
//! once a cascade becomes trending.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: directed graphs with per-edge activation probability and delay
//!   distribution, edge-list ingestion and weighted-cascade weighting.
//! * [`cic`]: the continuous independent-cascade model, the warped clock for a
//!   fixed speedup schedule and forward Monte Carlo simulation (fixed and
//!   trend-triggered).
//! * [`ris`]: reverse-reachable sampling with a warped deadline and the
//!   coverage-based influence estimator.
//! * [`multi_im`]: budgeted greedy maximisation of the capped multi-threshold
//!   objective with sample verification and doubling.
//! * [`mminseed`]: the smallest budget meeting every threshold.
//! * [`fast`]: Lipschitz search over the speedup time.

pub mod cic;
pub mod error;
pub mod fast;
pub mod graph;
pub mod mminseed;
pub mod multi_im;
pub mod ris;
pub mod seeds;
pub mod synth;

pub use cic::{
    estimate_dip_mc, estimate_influence_mc, simulate_dip, simulate_fixed, DipEstimate, McEstimate,
    SimOutcome, SpeedupSchedule,
};
pub use error::{Error, Result};
pub use fast::{fast, DipProblem, EvalPoint, FastConfig, FastResult, FastSolver};
pub use graph::{DelayDist, Directedness, Edge, Graph, GraphStats, NodeId};
pub use mminseed::{mminseed, MinSeedResult};
pub use multi_im::{
    compute_constants, greedy_max_fhat, multi_im, multi_im_toward, objective_f_hat,
    PrecisionParams, SolverConfig, StoppingConstants,
};
pub use ris::{GroundSet, RrSet, SampleCollection, ThresholdSpec};

/// Runs `f` on a dedicated rayon pool with `workers` threads, or on the
/// global pool when `None`. Results never depend on the worker count.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .expect("thread pool")
            .install(f),
        None => f(),
    }
}
