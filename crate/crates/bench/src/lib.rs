//! Shared fixtures for the benchmarks.

use tapdip_core::{synth, DelayDist, Graph, GroundSet, ThresholdSpec};

/// Weighted-cascade social-circle graph with Weibull(4, 1) delays.
pub fn social_graph(n: usize, m: usize) -> Graph {
    synth::social_circles(n, m, 10, 7)
        .assign_weighted_cascade()
        .assign_delay(DelayDist::default())
        .expect("valid delay")
}

pub fn whole_graph_spec(n: usize, required: usize, deadline: f64) -> ThresholdSpec {
    ThresholdSpec::new(GroundSet::All { n }, required, deadline).expect("valid spec")
}
