//! Homogeneous p.c.f. self-similar sets, glue sets and exact vertex graphs.

mod glue;
mod graph;
mod ifs;
mod point;
mod word;

pub use glue::GlueSet;
pub use graph::{CellLevel, GapEstimate, GraphDocument, JointStats, VertexGraph};
pub use ifs::{IfsDescription, IfsSpec, Similitude, Template};
pub use point::{format_rational, parse_rational, rational_to_f64, Point};
pub use word::Word;
