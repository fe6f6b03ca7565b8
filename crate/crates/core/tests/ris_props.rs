use proptest::prelude::*;
use tapdip_core::ris::{GroundSet, RrSet};
use tapdip_core::{
    estimate_influence_mc, synth, DelayDist, Graph, NodeId, SampleCollection, SpeedupSchedule,
    ThresholdSpec,
};

#[test]
fn path_estimate_concentrates_on_the_exact_value() {
    let g = synth::path(4)
        .assign_delay(DelayDist::deterministic(1.0).unwrap())
        .unwrap();
    let spec = ThresholdSpec::new(GroundSet::All { n: 4 }, 1, 1.0).unwrap();
    let mut c = SampleCollection::new(4, spec, 21);
    c.extend(&g, 100_000).unwrap();
    // Node 1 reaches itself and node 2 within one unit.
    let est = c.estimate_influence(&[NodeId(1)]).unwrap();
    assert!((est - 2.0).abs() < 0.02, "{est}");
}

#[test]
fn estimate_agrees_with_forward_simulation() {
    let g = synth::random_with_edges(50, 200, 3)
        .assign_weighted_cascade()
        .assign_delay(DelayDist::weibull(2.0, 0.8).unwrap())
        .unwrap();
    let deadline = 2.0;
    let spec = ThresholdSpec::new(GroundSet::All { n: 50 }, 1, deadline).unwrap();
    let mut c = SampleCollection::new(50, spec, 5);
    let r = 100_000;
    c.extend(&g, r).unwrap();
    for seeds in [vec![NodeId(0)], vec![NodeId(4), NodeId(9), NodeId(30)]] {
        let rr = c.estimate_influence(&seeds).unwrap();
        let p = c.coverage(&seeds) as f64 / r as f64;
        let rr_se = 50.0 * (p * (1.0 - p) / r as f64).sqrt();
        let mc =
            estimate_influence_mc(&g, &seeds, &SpeedupSchedule::none(), deadline, r, 9).unwrap();
        let se = rr_se.hypot(mc.stderr);
        assert!(
            (rr - mc.mean).abs() <= 3.0 * se,
            "{rr} vs {} (se {se})",
            mc.mean
        );
    }
}

#[test]
fn restricted_ground_set_scales_by_its_size() {
    let g = synth::out_star(5)
        .assign_delay(DelayDist::deterministic(1.0).unwrap())
        .unwrap();
    let ground = GroundSet::nodes(vec![NodeId(1), NodeId(2)]);
    let spec = ThresholdSpec::new(ground, 2, 1.0).unwrap();
    let mut c = SampleCollection::new(6, spec, 0);
    c.extend(&g, 500).unwrap();
    assert!((0..c.len()).all(|i| [1, 2].contains(&c.target(i).0)));
    assert_eq!(c.estimate_influence(&[NodeId(0)]).unwrap(), 2.0);
    assert_eq!(c.estimate_influence(&[NodeId(3)]).unwrap(), 0.0);
}

fn collection_strategy() -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::btree_set(0u32..6, 1..4), 1..10)
        .prop_map(|sets| sets.into_iter().map(|s| s.into_iter().collect()).collect())
}

fn build(sets: &[Vec<u32>]) -> SampleCollection {
    let rr: Vec<RrSet> = sets
        .iter()
        .map(|m| RrSet {
            target: NodeId(m[0]),
            members: m.iter().map(|&v| NodeId(v)).collect(),
        })
        .collect();
    let spec = ThresholdSpec::new(GroundSet::All { n: 6 }, 6, 1.0).unwrap();
    SampleCollection::from_sets(6, spec, &rr).unwrap()
}

fn subset(mask: u32) -> Vec<NodeId> {
    (0..6).filter(|i| mask >> i & 1 == 1).map(NodeId).collect()
}

proptest! {
    #[test]
    fn coverage_is_monotone_and_submodular(sets in collection_strategy()) {
        let c = build(&sets);
        let cov = |mask: u32| c.coverage(&subset(mask));
        // Naive count as the oracle.
        for mask in 0u32..64 {
            let naive = sets.iter().filter(|s| s.iter().any(|&v| mask >> v & 1 == 1)).count();
            prop_assert_eq!(cov(mask), naive);
        }
        for a in 0u32..64 {
            for b in 0u32..64 {
                if a & b != a {
                    continue;
                }
                prop_assert!(cov(a) <= cov(b));
                for v in 0..6 {
                    let x = 1 << v;
                    if b & x != 0 {
                        continue;
                    }
                    prop_assert!(cov(a | x) - cov(a) >= cov(b | x) - cov(b));
                }
            }
        }
    }

    #[test]
    fn larger_deadlines_contain_smaller_ones(seed in 0u64..500, d in 0.0f64..3.0, extra in 0.0f64..2.0) {
        let g: Graph = synth::random_with_edges(25, 80, 2)
            .assign_uniform_probability(0.4)
            .unwrap();
        let small = ThresholdSpec::new(GroundSet::All { n: 25 }, 1, d).unwrap();
        let big = ThresholdSpec::new(GroundSet::All { n: 25 }, 1, d + extra).unwrap();
        let mut a = SampleCollection::new(25, small, seed);
        let mut b = SampleCollection::new(25, big, seed);
        a.extend(&g, 40).unwrap();
        b.extend(&g, 40).unwrap();
        for i in 0..40 {
            prop_assert_eq!(a.target(i), b.target(i));
            for v in a.sample(i) {
                prop_assert!(b.sample(i).contains(v));
            }
        }
    }
}
