//! Smallest budget whose greedy solution meets every threshold.
//!
//! Budgets grow by the average-gain jump: assuming each additional seed adds
//! the mean gain observed over the last jump, add just enough seeds to close
//! the remaining gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::multi_im::{multi_im_toward, PrecisionParams, SolverConfig};
use crate::ris::{SampleCollection, ThresholdSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSeedResult {
    pub seeds: Vec<NodeId>,
    pub budget: usize,
    pub f_hat: f64,
    /// `sum_l required_l`.
    pub target: f64,
    pub rounds: usize,
    /// Budget tried in each round.
    pub budgets: Vec<usize>,
    pub f_hats: Vec<f64>,
    pub sample_sizes: Vec<usize>,
}

/// Next budget after a round at `j` scoring `f`, with the previous round at
/// `j_prev` scoring `f_prev`. `goal` is `(1 - eps) * f(S*)`. A round that
/// gained nothing doubles the budget instead.
pub fn next_budget(j: usize, j_prev: usize, f: f64, f_prev: f64, goal: f64) -> usize {
    debug_assert!(j > j_prev);
    let gain = f - f_prev;
    if gain.is_nan() || gain <= 0.0 {
        return j.saturating_mul(2);
    }
    let per_seed = gain / (j - j_prev) as f64;
    let jump = ((goal - f) / per_seed).ceil().max(1.0);
    let jump = if jump >= (usize::MAX / 4) as f64 {
        usize::MAX / 4
    } else {
        jump as usize
    };
    j.saturating_add(jump)
}

/// Budget search over caller-owned collections (grown in place).
pub fn mminseed_with(
    g: &Graph,
    collections: &mut [SampleCollection],
    precision: &PrecisionParams,
    cfg: &SolverConfig,
) -> Result<MinSeedResult> {
    if collections.is_empty() {
        return Err(Error::invalid("need at least one threshold"));
    }
    let n = g.node_count();
    let target: f64 = collections.iter().map(|c| c.spec().required() as f64).sum();
    let goal = (1.0 - precision.epsilon) * target;

    let mut j = 1;
    let mut j_prev = 0;
    let mut f_prev = 0.0;
    let mut budgets = Vec::new();
    let mut f_hats = Vec::new();
    loop {
        let out = multi_im_toward(g, collections, j, precision, cfg, Some(goal))?;
        budgets.push(j);
        f_hats.push(out.f_hat);
        log::debug!("budget {j}: f_hat {:.2} / goal {goal:.2}", out.f_hat);
        if out.verified && out.f_hat >= goal {
            return Ok(MinSeedResult {
                seeds: out.seeds,
                budget: j,
                f_hat: out.f_hat,
                target,
                rounds: budgets.len(),
                budgets,
                f_hats,
                sample_sizes: out.sample_sizes,
            });
        }
        if j >= n {
            // Seeding every node covers every sample, so this is unreachable
            // for valid specs.
            return Err(Error::Infeasible(format!(
                "objective {:.3} below goal {goal:.3} with every node seeded",
                out.f_hat
            )));
        }
        let next = next_budget(j, j_prev, out.f_hat, f_prev, goal).min(n);
        j_prev = j;
        f_prev = out.f_hat;
        j = next;
    }
}

pub fn mminseed(
    g: &Graph,
    specs: &[ThresholdSpec],
    precision: &PrecisionParams,
    cfg: &SolverConfig,
) -> Result<MinSeedResult> {
    for s in specs {
        if s.required() > s.ground().len() {
            return Err(Error::Infeasible(format!(
                "required {} exceeds ground set size {}",
                s.required(),
                s.ground().len()
            )));
        }
    }
    let mut collections: Vec<SampleCollection> = specs
        .iter()
        .map(|s| SampleCollection::new(g.node_count(), s.clone(), cfg.seed))
        .collect();
    mminseed_with(g, &mut collections, precision, cfg)
}
