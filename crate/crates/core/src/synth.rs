//! Small graph generators used by tests, benches and the CLI.
//!
//! All generators return edges with probability 1 and the default delay;
//! callers reassign weights as needed.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{DelayDist, Graph};
use crate::seeds;

const TAG_SYNTH: u64 = 0x5359_4e54_4800_0000;

fn build(n: usize, pairs: Vec<(usize, usize)>) -> Graph {
    Graph::from_pairs(n, pairs, 1.0, DelayDist::default()).expect("generator emits valid edges")
}

/// Directed path `0 -> 1 -> ... -> n-1`.
pub fn path(n: usize) -> Graph {
    build(n, (1..n).map(|i| (i - 1, i)).collect())
}

/// Edges from the center `0` to every leaf.
pub fn out_star(leaves: usize) -> Graph {
    build(leaves + 1, (1..=leaves).map(|i| (0, i)).collect())
}

/// Every ordered pair.
pub fn complete(n: usize) -> Graph {
    let pairs = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    build(n, pairs)
}

/// Directed G(n, p): each ordered pair independently.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = seeds::stream_rng(seed, TAG_SYNTH, 1);
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    build(n, pairs)
}

/// Random directed graph with exactly `m` distinct edges.
pub fn random_with_edges(n: usize, m: usize, seed: u64) -> Graph {
    assert!(m <= n * n.saturating_sub(1), "too many edges for {n} nodes");
    let mut rng = seeds::stream_rng(seed, TAG_SYNTH, 2);
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(m);
    while pairs.len() < m {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && seen.insert((u, v)) {
            pairs.push((u, v));
        }
    }
    build(n, pairs)
}

/// Undirected social-circle graph with `n` nodes and exactly `m` undirected
/// edges, returned symmetrised (`2m` directed edges).
///
/// Nodes are split into `circles` groups of uneven size. Each group has a hub
/// linked to all its members; the rest of the edge budget goes to intra-group
/// pairs with heavy-tailed endpoint weights, and a small share to inter-group
/// pairs.
pub fn social_circles(n: usize, m: usize, circles: usize, seed: u64) -> Graph {
    assert!(circles >= 1 && n >= 2 * circles);
    let mut rng = seeds::stream_rng(seed, TAG_SYNTH, 3);
    // Uneven group sizes: weights 1, 1/2, ..., 1/circles then shuffled.
    let weights: Vec<f64> = (1..=circles).map(|i| 1.0 / i as f64 + 0.15).collect();
    let total: f64 = weights.iter().sum();
    let mut sizes: Vec<usize> = weights
        .iter()
        .map(|w| ((w / total) * n as f64).floor().max(2.0) as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += n - assigned;
    sizes.shuffle(&mut rng);

    let mut groups = Vec::with_capacity(circles);
    let mut start = 0;
    for s in &sizes {
        groups.push((start, *s));
        start += s;
    }
    // Pareto-like activity per node.
    let activity: Vec<f64> = (0..n)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / 1.6))
        .collect();

    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut und = Vec::with_capacity(m);
    let mut add = |a: usize, b: usize, und: &mut Vec<(usize, usize)>| {
        let key = (a.min(b), a.max(b));
        if a != b && und.len() < m && seen.insert(key) {
            und.push(key);
        }
    };
    for &(s, len) in &groups {
        for v in s + 1..s + len {
            add(s, v, &mut und);
        }
    }
    // Cumulative activity per group for weighted endpoint draws.
    let cum: Vec<Vec<f64>> = groups
        .iter()
        .map(|&(s, len)| {
            let mut acc = 0.0;
            (s..s + len)
                .map(|v| {
                    acc += activity[v];
                    acc
                })
                .collect()
        })
        .collect();
    let group_mass: Vec<f64> = groups
        .iter()
        .map(|&(_, len)| (len as f64).powf(1.4))
        .collect();
    let mass_total: f64 = group_mass.iter().sum();
    let pick_in = |rng: &mut rand_chacha::ChaCha8Rng, gi: usize| {
        let c = &cum[gi];
        let x = rng.random::<f64>() * c[c.len() - 1];
        groups[gi].0 + c.partition_point(|&y| y < x).min(c.len() - 1)
    };
    let mut guard = 0usize;
    while und.len() < m && guard < 50 * m {
        guard += 1;
        let mut x = rng.random::<f64>() * mass_total;
        let mut gi = 0;
        while gi + 1 < group_mass.len() && x >= group_mass[gi] {
            x -= group_mass[gi];
            gi += 1;
        }
        let a = pick_in(&mut rng, gi);
        let b = if rng.random::<f64>() < 0.03 {
            let gj = rng.random_range(0..groups.len());
            pick_in(&mut rng, gj)
        } else {
            pick_in(&mut rng, gi)
        };
        add(a, b, &mut und);
    }
    while und.len() < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        add(a, b, &mut und);
    }
    let pairs = und.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    build(n, pairs)
}
