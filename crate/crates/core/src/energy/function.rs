use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractal::VertexGraph;

/// Real values on `V_k^F`, indexed by vertex id. Because ids are stable
/// under refinement, restriction to a coarser level is a prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionOnVertices {
    level: usize,
    values: Vec<f64>,
}

impl FunctionOnVertices {
    pub fn new(graph: &VertexGraph, level: usize, values: Vec<f64>) -> Result<Self> {
        if level > graph.level() {
            return Err(Error::LevelTooDeep { requested: level, built: graph.level() });
        }
        let expected = graph.vertex_count(level);
        if values.len() != expected {
            return Err(Error::Length { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("function values must be finite".into()));
        }
        Ok(FunctionOnVertices { level, values })
    }

    /// A function on the top level of `graph`.
    pub fn on_graph(graph: &VertexGraph, values: Vec<f64>) -> Result<Self> {
        Self::new(graph, graph.level(), values)
    }

    /// Evaluate `f` at the float coordinates of every top-level vertex.
    pub fn from_fn(graph: &VertexGraph, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..graph.len()).map(|i| f(graph.coord(i))).collect();
        FunctionOnVertices { level: graph.level(), values }
    }

    pub fn constant(graph: &VertexGraph, c: f64) -> Self {
        FunctionOnVertices { level: graph.level(), values: vec![c; graph.len()] }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn restrict(&self, graph: &VertexGraph, k: usize) -> Result<Self> {
        if k > self.level {
            return Err(Error::LevelTooDeep { requested: k, built: self.level });
        }
        Ok(FunctionOnVertices { level: k, values: self.values[..graph.vertex_count(k)].to_vec() })
    }

    pub fn scaled(&self, c: f64) -> Self {
        FunctionOnVertices { level: self.level, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn shifted(&self, c: f64) -> Self {
        FunctionOnVertices { level: self.level, values: self.values.iter().map(|v| v + c).collect() }
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}
