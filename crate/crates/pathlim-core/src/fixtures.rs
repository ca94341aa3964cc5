//! Small reference digraphs used across the test suites.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::WeightedDigraph;

/// Single vertex with a loop of weight 2.
pub fn g1() -> WeightedDigraph {
    WeightedDigraph::from_edges(&[("a", "a", 2.0)]).expect("fixture is well formed")
}

/// Two loops of different weight joined by an edge: a dominant sink class.
pub fn g2() -> WeightedDigraph {
    WeightedDigraph::from_edges(&[("a", "a", 1.0), ("a", "b", 1.0), ("b", "b", 2.0)])
        .expect("fixture is well formed")
}

/// Two unit loops joined by an edge: equal radii stacked in a chain.
pub fn g3() -> WeightedDigraph {
    WeightedDigraph::from_edges(&[("a", "a", 1.0), ("a", "b", 1.0), ("b", "b", 1.0)])
        .expect("fixture is well formed")
}

/// A transient vertex feeding an asymmetric 2-cycle.
pub fn g4() -> WeightedDigraph {
    WeightedDigraph::from_edges(&[
        ("a", "b", 1.0),
        ("a", "c", 1.0),
        ("b", "c", 2.0),
        ("c", "b", 1.0),
    ])
    .expect("fixture is well formed")
}

/// A plain 2-cycle: strongly connected with period 2.
pub fn g5() -> WeightedDigraph {
    WeightedDigraph::from_edges(&[("a", "b", 1.0), ("b", "a", 1.0)]).expect("fixture is well formed")
}

/// All five fixtures in order.
pub fn all() -> Vec<WeightedDigraph> {
    vec![g1(), g2(), g3(), g4(), g5()]
}
