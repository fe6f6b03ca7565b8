use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tapdip_core::cic::{simulate_fixed_with, ForwardScratch, Realization};
use tapdip_core::multi_im::multi_im_with;
use tapdip_core::ris::{GroundSet, RrSet};
use tapdip_core::{
    compute_constants, greedy_max_fhat, multi_im, objective_f_hat, synth, NodeId, PrecisionParams,
    SampleCollection, SolverConfig, SpeedupSchedule, ThresholdSpec,
};

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

#[test]
fn constants_match_summed_logs() {
    let p = PrecisionParams::new(0.1, 0.01).unwrap();
    for (l, n, j) in [(1, 100, 5), (2, 4039, 50), (5, 30, 30), (1, 1000, 1)] {
        let c = compute_constants(l, n, j, &p).unwrap();
        let lnc = ln_factorial(n) - ln_factorial(j) - ln_factorial(n - j);
        let a = (3.0 * l as f64 / 0.01).ln();
        let e = 1.0 - (-1.0f64).exp();
        let sigma = a.sqrt();
        let tau = (e * (lnc + a)).sqrt();
        let phi = (e * sigma + tau) / 0.1;
        let lf = l as f64;
        let gamma = 2.0 * (phi * phi + (3.0 * lf * lf / ((2.0 * lf - 1.0) * 0.01)).ln());
        for (got, want) in [
            (c.sigma, sigma),
            (c.tau, tau),
            (c.phi, phi),
            (c.gamma, gamma),
        ] {
            assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
        }
    }
    let c = compute_constants(1, 100, 5, &p).unwrap();
    assert!((c.phi - 53.917).abs() < 5e-3 && (c.gamma - 5825.5).abs() < 0.5);
}

fn random_collections(rng: &mut ChaCha8Rng, n: u32) -> Vec<SampleCollection> {
    let l = rng.random_range(1..=3);
    (0..l)
        .map(|_| {
            let len = rng.random_range(3..25);
            let sets: Vec<RrSet> = (0..len)
                .map(|_| {
                    let target = NodeId(rng.random_range(0..n));
                    let mut members = vec![target];
                    for v in 0..n {
                        if v != target.0 && rng.random::<f64>() < 0.2 {
                            members.push(NodeId(v));
                        }
                    }
                    RrSet { target, members }
                })
                .collect();
            let required = rng.random_range(1..=n as usize);
            let spec = ThresholdSpec::new(GroundSet::All { n: n as usize }, required, 1.0).unwrap();
            SampleCollection::from_sets(n as usize, spec, &sets).unwrap()
        })
        .collect()
}

/// Plain greedy: recompute every marginal gain from scratch each step.
fn naive_greedy(cs: &[SampleCollection], k: usize) -> Vec<NodeId> {
    let n = cs[0].node_count();
    let mut chosen: Vec<NodeId> = Vec::new();
    while chosen.len() < k {
        let mut best: Option<(f64, u32)> = None;
        for v in 0..n as u32 {
            if chosen.contains(&NodeId(v)) {
                continue;
            }
            let mut gain = 0.0;
            for c in cs {
                let cover = |s: &[NodeId]| {
                    (0..c.len())
                        .filter(|&i| c.sample(i).iter().any(|m| s.contains(&NodeId(*m))))
                        .count() as u64
                };
                let cap = c.spec().required() as u64 * c.len() as u64;
                let ground = c.spec().ground().len() as u64;
                let mut with = chosen.clone();
                with.push(NodeId(v));
                let units = cap.min(cover(&with) * ground) - cap.min(cover(&chosen) * ground);
                gain += units as f64 / c.len() as f64;
            }
            if gain > 0.0 && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, v));
            }
        }
        match best {
            Some((_, v)) => chosen.push(NodeId(v)),
            None => break,
        }
    }
    chosen
}

fn subsets(n: u32, k: usize) -> Vec<Vec<NodeId>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(NodeId).collect())
        .collect()
}

#[test]
fn lazy_greedy_equals_naive_greedy_and_approximates_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..40 {
        let n = rng.random_range(4..9);
        let cs = random_collections(&mut rng, n);
        let k = rng.random_range(1..=3.min(n as usize));
        let lazy = greedy_max_fhat(&cs, k);
        assert_eq!(lazy, naive_greedy(&cs, k));
        let opt = subsets(n, k)
            .iter()
            .map(|s| objective_f_hat(&cs, s))
            .fold(0.0, f64::max);
        let got = objective_f_hat(&cs, &lazy);
        assert!(
            got >= (1.0 - (-1.0f64).exp()) * opt - 1e-9,
            "{got} vs {opt}"
        );
    }
}

#[test]
fn six_node_hand_built_instance() {
    let sets: Vec<Vec<u32>> = vec![
        vec![0, 1],
        vec![1, 2],
        vec![2],
        vec![3, 4],
        vec![4, 5],
        vec![5, 0],
        vec![3],
        vec![1, 4],
    ];
    let rr: Vec<RrSet> = sets
        .iter()
        .map(|m| RrSet {
            target: NodeId(m[0]),
            members: m.iter().map(|&v| NodeId(v)).collect(),
        })
        .collect();
    let spec = ThresholdSpec::new(GroundSet::All { n: 6 }, 6, 1.0).unwrap();
    let cs = [SampleCollection::from_sets(6, spec, &rr).unwrap()];
    let best = subsets(6, 2)
        .iter()
        .map(|s| objective_f_hat(&cs, s))
        .fold(0.0, f64::max);
    let got = greedy_max_fhat(&cs, 2);
    assert_eq!(objective_f_hat(&cs, &got), best);
}

#[test]
fn termination_meets_gamma_and_sizes_double() {
    let g = synth::random_with_edges(80, 300, 6).assign_weighted_cascade();
    let specs = [
        ThresholdSpec::new(GroundSet::All { n: 80 }, 30, 2.0).unwrap(),
        ThresholdSpec::new(GroundSet::nodes((0..40).map(NodeId).collect()), 10, 1.0).unwrap(),
    ];
    let p = PrecisionParams::new(0.2, 0.05).unwrap();
    for k in [1, 3, 8] {
        let out = multi_im(
            &g,
            &specs,
            k,
            &p,
            &SolverConfig {
                seed: k as u64,
                ..Default::default()
            },
        )
        .unwrap();
        let base = out.constants.gamma.ceil() as usize;
        for (l, &size) in out.sample_sizes.iter().enumerate() {
            assert!(out.coverages[l] as f64 >= out.constants.gamma);
            assert_eq!(size % base, 0);
            assert!((size / base).is_power_of_two());
        }
    }
}

#[test]
fn reused_collections_give_the_same_answer() {
    let g = synth::random_with_edges(60, 200, 1).assign_weighted_cascade();
    let spec = ThresholdSpec::new(GroundSet::All { n: 60 }, 20, 3.0).unwrap();
    let p = PrecisionParams::new(0.2, 0.05).unwrap();
    let cfg = SolverConfig::default();
    let mut cs = vec![SampleCollection::new(60, spec.clone(), cfg.seed)];
    let a = multi_im_with(&g, &mut cs, 4, &p, &cfg).unwrap();
    let b = multi_im_with(&g, &mut cs, 4, &p, &cfg).unwrap();
    assert_eq!(a.seeds, b.seeds);
    assert_eq!(a.seeds, multi_im(&g, &[spec], 4, &p, &cfg).unwrap().seeds);
}

#[test]
fn two_threshold_solution_is_near_optimal_in_simulation() {
    let n = 20;
    let g = synth::random_with_edges(n, 50, 12)
        .assign_uniform_probability(0.35)
        .unwrap();
    let ground_b: Vec<NodeId> = (0..10).map(NodeId).collect();
    let specs = [
        ThresholdSpec::new(GroundSet::All { n }, 8, 1.5).unwrap(),
        ThresholdSpec::new(GroundSet::nodes(ground_b), 4, 2.5).unwrap(),
    ];
    let k = 2;

    // Exact-per-realisation reach tables, shared by every candidate set.
    let runs = 40_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut scratch = ForwardScratch::new(n);
    let mut reach: Vec<[[u32; 2]; 20]> = Vec::with_capacity(runs);
    for _ in 0..runs {
        let real = Realization::sample(&g, &mut rng);
        let mut row = [[0u32; 2]; 20];
        for (u, masks) in row.iter_mut().enumerate().take(n) {
            let out = simulate_fixed_with(
                &g,
                &[NodeId(u as u32)],
                &SpeedupSchedule::none(),
                2.5,
                &mut &real,
                &mut scratch,
            )
            .unwrap();
            for &(v, t) in &out.activations {
                if t <= 1.5 {
                    masks[0] |= 1 << v.0;
                }
                if t <= 2.5 && v.0 < 10 {
                    masks[1] |= 1 << v.0;
                }
            }
        }
        reach.push(row);
    }
    let f = |s: &[NodeId]| -> f64 {
        let mut tot = [0u64; 2];
        for row in &reach {
            for (l, t) in tot.iter_mut().enumerate() {
                let mask = s.iter().fold(0u32, |m, v| m | row[v.index()][l]);
                *t += mask.count_ones() as u64;
            }
        }
        (tot[0] as f64 / runs as f64).min(8.0) + (tot[1] as f64 / runs as f64).min(4.0)
    };
    let opt = subsets(n as u32, k)
        .iter()
        .map(|s| f(s))
        .fold(0.0, f64::max);

    let eps = 0.1;
    let p = PrecisionParams::new(eps, 0.05).unwrap();
    let ratio = 1.0 - (1.0 - 1.0 / k as f64).powi(k as i32) - eps;
    let reps = 60;
    let good = (0..reps)
        .filter(|&rep| {
            let cfg = SolverConfig {
                seed: rep,
                ..Default::default()
            };
            let out = multi_im(&g, &specs, k, &p, &cfg).unwrap();
            f(&out.seeds) >= ratio * opt
        })
        .count();
    assert!(good as f64 >= 0.95 * reps as f64, "{good}/{reps}");
}

fn small_collections() -> impl Strategy<Value = (Vec<Vec<u32>>, usize)> {
    (
        prop::collection::vec(prop::collection::btree_set(0u32..6, 1..4), 1..10)
            .prop_map(|v| v.into_iter().map(|s| s.into_iter().collect()).collect()),
        1usize..=6,
    )
}

proptest! {
    #[test]
    fn objective_is_monotone_and_submodular((sets, required) in small_collections()) {
        let rr: Vec<RrSet> = sets
            .iter()
            .map(|m: &Vec<u32>| RrSet { target: NodeId(m[0]), members: m.iter().map(|&v| NodeId(v)).collect() })
            .collect();
        let spec = ThresholdSpec::new(GroundSet::All { n: 6 }, required, 1.0).unwrap();
        let cs = [SampleCollection::from_sets(6, spec, &rr).unwrap()];
        let f = |m: u32| objective_f_hat(&cs, &(0..6).filter(|i| m >> i & 1 == 1).map(NodeId).collect::<Vec<_>>());
        for a in 0u32..64 {
            for b in 0u32..64 {
                if a & b != a { continue; }
                prop_assert!(f(a) <= f(b) + 1e-12);
                for v in 0..6 {
                    let x = 1 << v;
                    if b & x != 0 { continue; }
                    prop_assert!(f(a | x) - f(a) >= f(b | x) - f(b) - 1e-9);
                }
            }
        }
    }
}
