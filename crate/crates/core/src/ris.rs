//! Reverse influence sampling with a warped-time deadline.
//!
//! An RR set for target `v` holds every node whose shortest live path to `v`
//! has warped length at most the deadline. Sample `i` of a collection is drawn
//! from a stream keyed by the collection's ground set and `i` alone, so two
//! collections over the same ground set with different deadlines see the same
//! targets and edge draws (common random numbers), and the smaller deadline's
//! RR set is always contained in the larger one's.

use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;

use crate::cic::{Arrival, EdgeDraws, LazyDraws};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::seeds;

const TAG_RR: u64 = 0x5252_5345_5400_0000;
const EXTEND_CHUNK: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundSet {
    /// Every node of a graph with `n` nodes.
    All { n: usize },
    /// Sorted, de-duplicated explicit subset.
    Nodes(Vec<NodeId>),
}

impl GroundSet {
    pub fn nodes(mut ids: Vec<NodeId>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        GroundSet::Nodes(ids)
    }

    pub fn len(&self) -> usize {
        match self {
            GroundSet::All { n } => *n,
            GroundSet::Nodes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: NodeId) -> bool {
        match self {
            GroundSet::All { n } => v.index() < *n,
            GroundSet::Nodes(ids) => ids.binary_search(&v).is_ok(),
        }
    }

    #[inline]
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeId {
        match self {
            GroundSet::All { n } => NodeId(rng.random_range(0..*n as u32)),
            GroundSet::Nodes(ids) => ids[rng.random_range(0..ids.len())],
        }
    }

    /// Stable key of the set's contents.
    pub fn key(&self) -> u64 {
        match self {
            GroundSet::All { n } => seeds::mix([0xa11, *n as u64]),
            GroundSet::Nodes(ids) => seeds::mix(
                std::iter::once(0x5e7u64)
                    .chain(std::iter::once(ids.len() as u64))
                    .chain(ids.iter().map(|v| v.0 as u64)),
            ),
        }
    }
}

/// One requirement: at least `required` nodes of `ground` active by the
/// warped deadline.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSpec {
    ground: GroundSet,
    required: usize,
    deadline_w: f64,
}

impl ThresholdSpec {
    pub fn new(ground: GroundSet, required: usize, deadline_w: f64) -> Result<Self> {
        if ground.is_empty() {
            return Err(Error::invalid("ground set is empty"));
        }
        if required == 0 || required > ground.len() {
            return Err(Error::Infeasible(format!(
                "required count {required} not in 1..={}",
                ground.len()
            )));
        }
        if !(deadline_w.is_finite() && deadline_w >= 0.0) {
            return Err(Error::invalid(format!(
                "deadline {deadline_w} must be >= 0"
            )));
        }
        Ok(ThresholdSpec {
            ground,
            required,
            deadline_w,
        })
    }

    /// `required = ceil(fraction * |ground|)`.
    pub fn with_fraction(ground: GroundSet, fraction: f64, deadline_w: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::invalid(format!("fraction {fraction} not in (0,1]")));
        }
        let required = ceil_count(fraction, ground.len());
        ThresholdSpec::new(ground, required, deadline_w)
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn required(&self) -> usize {
        self.required
    }

    pub fn deadline_w(&self) -> f64 {
        self.deadline_w
    }

    /// Same requirement with a different count.
    pub fn with_required(&self, required: usize) -> Result<Self> {
        ThresholdSpec::new(self.ground.clone(), required, self.deadline_w)
    }

    /// Identifies the sample distribution: ground set and deadline.
    pub fn sample_key(&self) -> (u64, u64) {
        (self.ground.key(), self.deadline_w.to_bits())
    }
}

/// `ceil(fraction * len)`, tolerant of representation error in the product.
pub fn ceil_count(fraction: f64, len: usize) -> usize {
    let x = fraction * len as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RrSet {
    pub target: NodeId,
    /// Target first, then in order of reverse arrival.
    pub members: Vec<NodeId>,
}

/// Reverse earliest-arrival search with reusable buffers.
pub struct RrSampler<'g> {
    g: &'g Graph,
    dist: Vec<f64>,
    stamp: Vec<u32>,
    settled: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Arrival>,
}

impl<'g> RrSampler<'g> {
    pub fn new(g: &'g Graph) -> Self {
        let n = g.node_count();
        RrSampler {
            g,
            dist: vec![f64::INFINITY; n],
            stamp: vec![0; n],
            settled: vec![0; n],
            epoch: 0,
            heap: BinaryHeap::new(),
        }
    }

    /// Nodes within warped distance `deadline_w` of `target` along live
    /// in-edges. Each in-edge is drawn once, when its head is settled.
    pub fn reverse_reach<D: EdgeDraws>(
        &mut self,
        target: NodeId,
        deadline_w: f64,
        draws: &mut D,
        out: &mut Vec<u32>,
    ) {
        self.heap.clear();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.settled.fill(0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let g = self.g;
        self.stamp[target.index()] = epoch;
        self.dist[target.index()] = 0.0;
        self.heap.push(Arrival {
            at: 0.0,
            node: target.0,
        });
        while let Some(Arrival { at, node }) = self.heap.pop() {
            let v = node as usize;
            if self.settled[v] == epoch {
                continue;
            }
            self.settled[v] = epoch;
            out.push(node);
            for &e in g.in_edges(NodeId(node)) {
                let e = e as usize;
                let u = g.edge(e).src.index();
                if self.settled[u] == epoch {
                    continue;
                }
                let Some(delay) = draws.draw(g, e) else {
                    continue;
                };
                let arrive = at + delay;
                if arrive > deadline_w {
                    continue;
                }
                if self.stamp[u] != epoch || arrive < self.dist[u] {
                    self.stamp[u] = epoch;
                    self.dist[u] = arrive;
                    self.heap.push(Arrival {
                        at: arrive,
                        node: u as u32,
                    });
                }
            }
        }
    }

    /// Draws a target uniformly from the ground set, then its RR set.
    pub fn sample_into<R: Rng + ?Sized>(
        &mut self,
        spec: &ThresholdSpec,
        rng: &mut R,
        out: &mut Vec<u32>,
    ) -> NodeId {
        let target = spec.ground.pick(rng);
        self.reverse_reach(target, spec.deadline_w, &mut LazyDraws(rng), out);
        target
    }
}

pub fn generate_rr_set<R: Rng + ?Sized>(g: &Graph, spec: &ThresholdSpec, rng: &mut R) -> RrSet {
    let mut sampler = RrSampler::new(g);
    let mut out = Vec::new();
    let target = sampler.sample_into(spec, rng, &mut out);
    RrSet {
        target,
        members: out.into_iter().map(NodeId).collect(),
    }
}

/// Append-only pool of RR sets for one requirement, with an inverted index
/// from node to the samples containing it.
#[derive(Clone, Debug)]
pub struct SampleCollection {
    spec: ThresholdSpec,
    stream: u64,
    offsets: Vec<usize>,
    members: Vec<u32>,
    targets: Vec<u32>,
    index: Vec<Vec<u32>>,
}

impl SampleCollection {
    /// Empty collection whose sample `i` is drawn from the stream
    /// `(root_seed, ground key, i)`.
    pub fn new(n: usize, spec: ThresholdSpec, root_seed: u64) -> Self {
        let stream = seeds::derive(root_seed, TAG_RR, spec.ground.key());
        SampleCollection {
            spec,
            stream,
            offsets: vec![0],
            members: Vec::new(),
            targets: Vec::new(),
            index: vec![Vec::new(); n],
        }
    }

    /// Collection over hand-built RR sets.
    pub fn from_sets(n: usize, spec: ThresholdSpec, sets: &[RrSet]) -> Result<Self> {
        let mut c = SampleCollection::new(n, spec, 0);
        for s in sets {
            if let Some(bad) = s.members.iter().chain([&s.target]).find(|m| m.index() >= n) {
                return Err(Error::UnknownNode(bad.0 as u64));
            }
            c.push(s.target.0, s.members.iter().map(|m| m.0));
        }
        Ok(c)
    }

    fn push(&mut self, target: u32, members: impl IntoIterator<Item = u32>) {
        let id = self.targets.len() as u32;
        self.targets.push(target);
        for m in members {
            self.members.push(m);
            self.index[m as usize].push(id);
        }
        self.offsets.push(self.members.len());
    }

    pub fn spec(&self) -> &ThresholdSpec {
        &self.spec
    }

    /// Changes the required count; the samples depend only on ground set and
    /// deadline.
    pub fn retarget(&mut self, required: usize) -> Result<()> {
        self.spec = self.spec.with_required(required)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.index.len()
    }

    pub fn sample(&self, i: usize) -> &[u32] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn target(&self, i: usize) -> NodeId {
        NodeId(self.targets[i])
    }

    /// Ids of the samples that contain `v`, ascending.
    #[inline]
    pub fn samples_containing(&self, v: NodeId) -> &[u32] {
        &self.index[v.index()]
    }

    pub fn total_members(&self) -> usize {
        self.members.len()
    }

    /// Grows the pool to exactly `upto` samples. Existing samples are left
    /// untouched and the result does not depend on the rayon pool size.
    pub fn extend(&mut self, g: &Graph, upto: usize) -> Result<()> {
        if upto < self.len() {
            return Err(Error::invalid(format!(
                "cannot shrink collection from {} to {upto}",
                self.len()
            )));
        }
        if g.node_count() != self.index.len() {
            return Err(Error::invalid("collection built for a different graph"));
        }
        let spec = self.spec.clone();
        let stream = self.stream;
        while self.len() < upto {
            let start = self.len();
            let end = upto.min(start + EXTEND_CHUNK);
            let batch: Vec<(u32, Vec<u32>)> = (start..end)
                .into_par_iter()
                .map_init(
                    || RrSampler::new(g),
                    |sampler, i| {
                        let mut rng = seeds::stream_rng(stream, 0, i as u64);
                        let mut out = Vec::new();
                        let t = sampler.sample_into(&spec, &mut rng, &mut out);
                        (t.0, out)
                    },
                )
                .collect();
            for (t, m) in batch {
                self.push(t, m);
            }
        }
        Ok(())
    }

    /// Number of samples intersecting `seeds`.
    pub fn coverage(&self, seeds: &[NodeId]) -> usize {
        let mut covered = vec![false; self.len()];
        let mut count = 0;
        for s in seeds {
            for &id in self.samples_containing(*s) {
                let c = &mut covered[id as usize];
                if !*c {
                    *c = true;
                    count += 1;
                }
            }
        }
        count
    }

    /// `coverage / |samples| * |ground|`.
    pub fn estimate_influence(&self, seeds: &[NodeId]) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::invalid("empty sample collection"));
        }
        Ok(self.coverage(seeds) as f64 / self.len() as f64 * self.spec.ground.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cic::Realization;
    use crate::graph::DelayDist;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> Graph {
        Graph::from_pairs(
            n,
            (0..n - 1).map(|i| (i, i + 1)),
            1.0,
            DelayDist::deterministic(1.0).unwrap(),
        )
        .unwrap()
    }

    fn members_of(g: &Graph, target: u32, deadline: f64) -> Vec<u32> {
        let mut s = RrSampler::new(g);
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        s.reverse_reach(NodeId(target), deadline, &mut LazyDraws(&mut rng), &mut out);
        out.sort();
        out
    }

    #[test]
    fn chain_reverse_reach() {
        let g = chain(3);
        assert_eq!(members_of(&g, 2, 1.5), vec![1, 2]);
        assert_eq!(members_of(&g, 2, 2.5), vec![0, 1, 2]);
        assert_eq!(members_of(&g, 2, 0.0), vec![2]);
    }

    #[test]
    fn zero_probability_isolated_target() {
        let g = chain(4).assign_uniform_probability(0.0).unwrap();
        let spec = ThresholdSpec::new(GroundSet::All { n: 4 }, 1, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let rr = generate_rr_set(&g, &spec, &mut rng);
            assert_eq!(rr.members, vec![rr.target]);
        }
    }

    #[test]
    fn targets_come_from_ground_set() {
        let g = chain(6);
        let ground = GroundSet::nodes(vec![NodeId(4), NodeId(1), NodeId(4)]);
        assert_eq!(ground.len(), 2);
        let spec = ThresholdSpec::new(ground.clone(), 1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let rr = generate_rr_set(&g, &spec, &mut rng);
            assert!(ground.contains(rr.target));
            assert_eq!(rr.members[0], rr.target);
        }
    }

    #[test]
    fn spec_validation() {
        let all = GroundSet::All { n: 5 };
        assert!(ThresholdSpec::new(all.clone(), 0, 1.0).is_err());
        assert!(ThresholdSpec::new(all.clone(), 6, 1.0).is_err());
        assert!(ThresholdSpec::new(all.clone(), 5, -1.0).is_err());
        assert!(ThresholdSpec::new(GroundSet::nodes(vec![]), 1, 1.0).is_err());
        assert_eq!(
            ThresholdSpec::with_fraction(GroundSet::All { n: 10 }, 0.3, 1.0)
                .unwrap()
                .required(),
            3
        );
        assert_eq!(
            ThresholdSpec::with_fraction(all, 0.5, 1.0)
                .unwrap()
                .required(),
            3
        );
    }

    fn hand_built(sets: &[&[u32]]) -> SampleCollection {
        let n = 4;
        let spec = ThresholdSpec::new(GroundSet::All { n: 3 }, 1, 1.0).unwrap();
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
    fn coverage_counts() {
        // a=0, b=1, c=2
        let c = hand_built(&[&[0], &[0, 1], &[2]]);
        assert_eq!(c.coverage(&[NodeId(0)]), 2);
        assert_eq!(c.coverage(&[]), 0);
        assert_eq!(c.coverage(&[NodeId(0), NodeId(1), NodeId(2)]), 3);
        assert_eq!(c.coverage(&[NodeId(0), NodeId(0)]), 2);
        assert_eq!(c.estimate_influence(&[NodeId(0)]).unwrap(), 2.0);
        assert_eq!(c.estimate_influence(&[NodeId(3)]).unwrap(), 0.0);
    }

    #[test]
    fn empty_collection_estimate_errors() {
        let spec = ThresholdSpec::new(GroundSet::All { n: 3 }, 1, 1.0).unwrap();
        let c = SampleCollection::new(3, spec, 0);
        assert!(c.estimate_influence(&[NodeId(0)]).is_err());
    }

    #[test]
    fn extend_appends_and_noops() {
        let g = chain(5);
        let spec = ThresholdSpec::new(GroundSet::All { n: 5 }, 2, 2.0).unwrap();
        let mut c = SampleCollection::new(5, spec, 11);
        c.extend(&g, 10).unwrap();
        let before: Vec<Vec<u32>> = (0..10).map(|i| c.sample(i).to_vec()).collect();
        c.extend(&g, 20).unwrap();
        assert_eq!(c.len(), 20);
        for (i, s) in before.iter().enumerate() {
            assert_eq!(c.sample(i), &s[..]);
        }
        c.extend(&g, 20).unwrap();
        assert_eq!(c.len(), 20);
        assert!(c.extend(&g, 5).is_err());
    }

    #[test]
    fn sequential_and_single_extend_identical() {
        let g = crate::synth::erdos_renyi(40, 0.08, 3)
            .assign_weighted_cascade()
            .assign_delay(DelayDist::default())
            .unwrap();
        let spec = ThresholdSpec::new(GroundSet::All { n: 40 }, 5, 3.0).unwrap();
        let mut a = SampleCollection::new(40, spec.clone(), 5);
        for n in [8, 16, 32] {
            a.extend(&g, n).unwrap();
        }
        let mut b = SampleCollection::new(40, spec, 5);
        b.extend(&g, 32).unwrap();
        for i in 0..32 {
            assert_eq!(a.sample(i), b.sample(i));
        }
    }

    #[test]
    fn realization_membership_monotone_in_deadline() {
        let g = crate::synth::erdos_renyi(30, 0.1, 8)
            .assign_weighted_cascade()
            .assign_delay(DelayDist::default())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = RrSampler::new(&g);
        for _ in 0..50 {
            let real = Realization::sample(&g, &mut rng);
            let target = NodeId(rng.random_range(0..30));
            let mut prev: Vec<u32> = Vec::new();
            for d in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
                let mut out = Vec::new();
                s.reverse_reach(target, d, &mut &real, &mut out);
                out.sort();
                assert!(prev.iter().all(|x| out.binary_search(x).is_ok()));
                prev = out;
            }
        }
    }
}
