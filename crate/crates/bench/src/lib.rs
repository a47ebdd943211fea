//! Shared fixtures for the benchmarks.

use pcf_lab::{IfsSpec, VertexGraph};

pub fn gasket(level: usize) -> VertexGraph {
    VertexGraph::single(&IfsSpec::catalog("sierpinski").expect("catalog"), level).expect("graph")
}

pub fn interval(level: usize) -> VertexGraph {
    VertexGraph::single(&IfsSpec::catalog("interval").expect("catalog"), level).expect("graph")
}
