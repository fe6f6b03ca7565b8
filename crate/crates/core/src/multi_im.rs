//! Budgeted maximisation of the capped multi-threshold objective
//!
//! ```text
//! f(S) = sum_l min(required_l, I_l(S))
//! ```
//!
//! over one RR-sample collection per threshold, with the sample verification
//! and doubling loop that makes the greedy guarantee hold with probability at
//! least `1 - delta`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::ris::{SampleCollection, ThresholdSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrecisionParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon {epsilon} must be > 0")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta {delta} must be in (0,1)")));
        }
        Ok(PrecisionParams { epsilon, delta })
    }
}

/// Knobs shared by the sampling solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Root of every RR-sample stream.
    pub seed: u64,
    /// Upper bound on the size of any one sample collection.
    pub hard_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            hard_cap: 1 << 22,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingConstants {
    pub sigma: f64,
    pub tau: f64,
    pub phi: f64,
    pub gamma: f64,
    pub thresholds: usize,
    pub budget: usize,
    pub n: usize,
}

/// `ln C(n, k)` through log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Verification constants for `l` thresholds, `n` nodes and budget `j`.
pub fn compute_constants(
    l: usize,
    n: usize,
    j: usize,
    p: &PrecisionParams,
) -> Result<StoppingConstants> {
    if l == 0 {
        return Err(Error::invalid("need at least one threshold"));
    }
    if j == 0 || j > n {
        return Err(Error::invalid(format!("budget {j} not in 1..={n}")));
    }
    let lf = l as f64;
    let c = 1.0 - 1.0 / E;
    let ln_3l_delta = (3.0 * lf / p.delta).ln();
    let sigma = ln_3l_delta.sqrt();
    let tau = (c * (ln_binomial(n, j) + ln_3l_delta)).sqrt();
    let phi = (c * sigma + tau) / p.epsilon;
    let gamma = 2.0 * (phi * phi + (3.0 * lf * lf / ((2.0 * lf - 1.0) * p.delta)).ln());
    Ok(StoppingConstants {
        sigma,
        tau,
        phi,
        gamma,
        thresholds: l,
        budget: j,
        n,
    })
}

/// `sum_l min(required_l, estimate_l(S))`.
pub fn objective_f_hat(collections: &[SampleCollection], seeds: &[NodeId]) -> f64 {
    collections
        .iter()
        .map(|c| {
            let est = if c.is_empty() {
                0.0
            } else {
                c.coverage(seeds) as f64 / c.len() as f64 * c.spec().ground().len() as f64
            };
            (c.spec().required() as f64).min(est)
        })
        .sum()
}

/// Coverage bookkeeping for one collection. Gains are kept in integer units
/// of `1/|samples|` so stale heap keys are exact upper bounds.
struct CoverState<'a> {
    c: &'a SampleCollection,
    covered: Vec<bool>,
    count: u64,
    cap: u64,
    ground: u64,
}

impl<'a> CoverState<'a> {
    fn new(c: &'a SampleCollection) -> Self {
        CoverState {
            c,
            covered: vec![false; c.len()],
            count: 0,
            cap: c.spec().required() as u64 * c.len() as u64,
            ground: c.spec().ground().len() as u64,
        }
    }

    fn scaled(&self, covered: u64) -> u64 {
        self.cap.min(covered * self.ground)
    }

    #[inline]
    fn gain(&self, v: NodeId) -> f64 {
        if self.c.is_empty() {
            return 0.0;
        }
        let fresh = self
            .c
            .samples_containing(v)
            .iter()
            .filter(|&&id| !self.covered[id as usize])
            .count() as u64;
        let units = self.scaled(self.count + fresh) - self.scaled(self.count);
        units as f64 / self.c.len() as f64
    }

    fn add(&mut self, v: NodeId) {
        for &id in self.c.samples_containing(v) {
            let c = &mut self.covered[id as usize];
            if !*c {
                *c = true;
                self.count += 1;
            }
        }
    }
}

#[derive(PartialEq)]
struct Candidate {
    gain: f64,
    node: u32,
    round: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // Max gain first, then smallest id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lazy greedy selection of up to `k` nodes maximising [`objective_f_hat`].
///
/// Stale heap entries are re-evaluated when popped; an entry is accepted only
/// if its gain is current. Ties go to the smallest node id, which makes the
/// result identical to plain greedy with full re-evaluation. Stops early once
/// no node has positive gain.
pub fn greedy_max_fhat(collections: &[SampleCollection], k: usize) -> Vec<NodeId> {
    let Some(n) = collections.first().map(|c| c.node_count()) else {
        return Vec::new();
    };
    let mut states: Vec<CoverState> = collections.iter().map(CoverState::new).collect();
    let gain = |states: &[CoverState], v: NodeId| states.iter().map(|s| s.gain(v)).sum::<f64>();

    let mut heap: BinaryHeap<Candidate> = (0..n as u32)
        .filter_map(|v| {
            let g = gain(&states, NodeId(v));
            (g > 0.0).then_some(Candidate {
                gain: g,
                node: v,
                round: 0,
            })
        })
        .collect();
    let mut chosen = Vec::with_capacity(k.min(n));
    while chosen.len() < k {
        let Some(top) = heap.pop() else { break };
        let v = NodeId(top.node);
        if top.round == chosen.len() {
            for s in &mut states {
                s.add(v);
            }
            chosen.push(v);
        } else {
            let g = gain(&states, v);
            if g > 0.0 {
                heap.push(Candidate {
                    gain: g,
                    node: top.node,
                    round: chosen.len(),
                });
            }
        }
    }
    chosen
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiImOutcome {
    pub seeds: Vec<NodeId>,
    pub f_hat: f64,
    pub constants: StoppingConstants,
    /// Greedy passes until every collection verified.
    pub rounds: usize,
    pub coverages: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    /// False when the round was cut short because the objective could not
    /// reach the caller's goal; see [`multi_im_toward`].
    pub verified: bool,
}

/// Runs the verification loop on caller-owned collections, which are grown in
/// place and may be reused by later calls.
pub fn multi_im_with(
    g: &Graph,
    collections: &mut [SampleCollection],
    k: usize,
    precision: &PrecisionParams,
    cfg: &SolverConfig,
) -> Result<MultiImOutcome> {
    multi_im_toward(g, collections, k, precision, cfg, None)
}

/// Upper confidence bound on the influence of a set covering `coverage` of
/// `samples` samples, failing with probability at most `exp(-a)`.
pub fn influence_upper_bound(coverage: usize, samples: usize, ground: usize, a: f64) -> f64 {
    let c = (coverage as f64 + a / 2.0).sqrt() + (a / 2.0).sqrt();
    c * c * ground as f64 / samples as f64
}

/// [`multi_im_with`], except that with a `goal` the loop stops doubling as
/// soon as an upper confidence bound on the objective of the current greedy
/// set falls below it. Such a budget cannot pass a `goal` test, so precise
/// verification is wasted on it; the outcome is then marked unverified.
pub fn multi_im_toward(
    g: &Graph,
    collections: &mut [SampleCollection],
    k: usize,
    precision: &PrecisionParams,
    cfg: &SolverConfig,
    goal: Option<f64>,
) -> Result<MultiImOutcome> {
    if collections.is_empty() {
        return Err(Error::invalid("need at least one threshold"));
    }
    if k == 0 {
        return Err(Error::invalid("budget must be >= 1"));
    }
    let n = g.node_count();
    let k = k.min(n);
    let constants = compute_constants(collections.len(), n, k, precision)?;
    let gamma = constants.gamma;
    let initial = gamma.ceil() as usize;
    for (l, c) in collections.iter_mut().enumerate() {
        if c.len() < initial {
            if initial > cfg.hard_cap {
                return Err(Error::SampleCapExceeded {
                    threshold: l,
                    samples: initial,
                    cap: cfg.hard_cap,
                    coverage: 0,
                    gamma,
                    budget: k,
                });
            }
            c.extend(g, initial)?;
        }
    }

    let mut verified = vec![false; collections.len()];
    let mut rounds = 0;
    let finish =
        |collections: &[SampleCollection], seeds: Vec<NodeId>, rounds, ok| MultiImOutcome {
            f_hat: objective_f_hat(collections, &seeds),
            coverages: collections.iter().map(|c| c.coverage(&seeds)).collect(),
            sample_sizes: collections.iter().map(|c| c.len()).collect(),
            seeds,
            constants,
            rounds,
            verified: ok,
        };
    // Same failure budget as the per-collection lower-tail term.
    let tail = constants.sigma * constants.sigma;
    loop {
        rounds += 1;
        let seeds = greedy_max_fhat(collections, k);
        if let Some(goal) = goal {
            let upper: f64 = collections
                .iter()
                .map(|c| {
                    let ub = influence_upper_bound(
                        c.coverage(&seeds),
                        c.len(),
                        c.spec().ground().len(),
                        tail,
                    );
                    ub.min(c.spec().required() as f64)
                })
                .sum();
            if upper < goal && !verified.iter().all(|&v| v) {
                log::debug!("budget {k}: objective bound {upper:.2} below goal {goal:.2}");
                return Ok(finish(collections, seeds, rounds, false));
            }
        }
        for (l, c) in collections.iter_mut().enumerate() {
            if verified[l] {
                continue;
            }
            let cov = c.coverage(&seeds);
            if cov as f64 >= gamma {
                verified[l] = true;
            } else {
                let next = 2 * c.len();
                if next > cfg.hard_cap {
                    return Err(Error::SampleCapExceeded {
                        threshold: l,
                        samples: next,
                        cap: cfg.hard_cap,
                        coverage: cov,
                        gamma,
                        budget: k,
                    });
                }
                log::debug!("threshold {l}: coverage {cov} < {gamma:.1}, doubling to {next}");
                c.extend(g, next)?;
            }
        }
        if verified.iter().all(|&v| v) {
            return Ok(finish(collections, seeds, rounds, true));
        }
    }
}

/// Fresh collections for `specs`, then [`multi_im_with`].
pub fn multi_im(
    g: &Graph,
    specs: &[ThresholdSpec],
    k: usize,
    precision: &PrecisionParams,
    cfg: &SolverConfig,
) -> Result<MultiImOutcome> {
    let mut collections: Vec<SampleCollection> = specs
        .iter()
        .map(|s| SampleCollection::new(g.node_count(), s.clone(), cfg.seed))
        .collect();
    multi_im_with(g, &mut collections, k, precision, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DelayDist;
    use crate::ris::{GroundSet, RrSet};

    fn collection(n: usize, required: usize, sets: &[&[u32]]) -> SampleCollection {
        let spec = ThresholdSpec::new(GroundSet::All { n }, required, 1.0).unwrap();
        let rr: Vec<RrSet> = sets
            .iter()
            .map(|s| RrSet {
                target: NodeId(s[0]),
                members: s.iter().map(|&x| NodeId(x)).collect(),
            })
            .collect();
        SampleCollection::from_sets(n, spec, &rr).unwrap()
    }

    #[test]
    fn constants_boundary_budget_has_zero_binomial() {
        let p = PrecisionParams::new(0.1, 0.01).unwrap();
        let c = compute_constants(1, 100, 100, &p).unwrap();
        let expect_tau = ((1.0 - 1.0 / E) * (300.0f64).ln()).sqrt();
        assert!((c.tau - expect_tau).abs() < 1e-12);
        assert!(compute_constants(1, 100, 101, &p).is_err());
        assert!(compute_constants(0, 100, 1, &p).is_err());
    }

    #[test]
    fn doubling_epsilon_halves_phi() {
        let a = compute_constants(2, 500, 20, &PrecisionParams::new(0.1, 0.01).unwrap()).unwrap();
        let b = compute_constants(2, 500, 20, &PrecisionParams::new(0.2, 0.01).unwrap()).unwrap();
        assert!((a.phi - 2.0 * b.phi).abs() < 1e-9 * a.phi);
    }

    #[test]
    fn precision_validation() {
        assert!(PrecisionParams::new(0.0, 0.1).is_err());
        assert!(PrecisionParams::new(0.1, 1.0).is_err());
        assert!(PrecisionParams::new(0.1, 0.0).is_err());
    }

    #[test]
    fn objective_caps() {
        // 4 samples over ground 4: S={0} covers 3 -> estimate 3.0, required 2.
        let c = collection(4, 2, &[&[0], &[1, 0], &[2, 0], &[3]]);
        assert_eq!(objective_f_hat(std::slice::from_ref(&c), &[NodeId(0)]), 2.0);
        assert_eq!(objective_f_hat(std::slice::from_ref(&c), &[]), 0.0);
        // Two specs: required 2 and 3, estimates 1 and 5 (n = 5).
        let a = collection(5, 2, &[&[0], &[1], &[2], &[3], &[4]]);
        let b = collection(5, 3, &[&[0], &[1, 0], &[2, 0], &[3, 0], &[4, 0]]);
        assert_eq!(objective_f_hat(&[a, b], &[NodeId(0)]), 4.0);
    }

    #[test]
    fn greedy_majority_and_saturation() {
        let c = collection(3, 3, &[&[0], &[0], &[1]]);
        assert_eq!(
            greedy_max_fhat(std::slice::from_ref(&c), 1),
            vec![NodeId(0)]
        );
        let s = greedy_max_fhat(std::slice::from_ref(&c), 10);
        // Node 2 appears in no sample, so greedy stops after two picks.
        assert_eq!(s, vec![NodeId(0), NodeId(1)]);
        let a = collection(3, 1, &[&[0], &[1], &[2]]);
        let b = collection(3, 2, &[&[1], &[2], &[0, 1]]);
        let both = [a, b];
        let s = greedy_max_fhat(&both, 3);
        assert_eq!(objective_f_hat(&both, &s), 3.0);
    }

    #[test]
    fn greedy_ties_prefer_small_ids() {
        let c = collection(4, 4, &[&[3], &[2], &[1]]);
        assert_eq!(
            greedy_max_fhat(std::slice::from_ref(&c), 2),
            vec![NodeId(1), NodeId(2)]
        );
    }

    #[test]
    fn complete_graph_single_round() {
        let g = crate::synth::complete(8)
            .assign_delay(DelayDist::deterministic(0.5).unwrap())
            .unwrap();
        let spec = ThresholdSpec::new(GroundSet::All { n: 8 }, 8, 5.0).unwrap();
        let p = PrecisionParams::new(0.1, 0.01).unwrap();
        let out = multi_im(&g, &[spec], 1, &p, &SolverConfig::default()).unwrap();
        assert_eq!(out.rounds, 1);
        assert_eq!(out.coverages[0], out.sample_sizes[0]);
        assert_eq!(out.f_hat, 8.0);
    }

    #[test]
    fn infeasible_requirement_hits_cap() {
        let g = Graph::from_pairs(200, (0..199).map(|i| (i, i + 1)), 0.0, DelayDist::default())
            .unwrap();
        let spec = ThresholdSpec::new(GroundSet::All { n: 200 }, 150, 5.0).unwrap();
        let p = PrecisionParams::new(0.1, 0.01).unwrap();
        let cfg = SolverConfig {
            seed: 1,
            hard_cap: 1 << 14,
        };
        match multi_im(&g, &[spec], 1, &p, &cfg) {
            Err(Error::SampleCapExceeded { cap, .. }) => assert_eq!(cap, 1 << 14),
            other => panic!("expected cap abort, got {other:?}"),
        }
    }
}
