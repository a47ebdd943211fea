use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::function::FunctionOnVertices;
use super::solver::{EdgeProblem, SolverOptions};
use crate::error::{Error, Result};
use crate::fractal::{IfsSpec, VertexGraph};

/// Minimiser of the one-step energy `E_1` on the template `V_1` with the
/// `V_0` values pinned. One instance serves every cell of every level.
#[derive(Clone, Debug)]
pub struct CellSolver {
    p: f64,
    n_boundary: usize,
    problem: EdgeProblem,
    linear: DMatrix<f64>,
    opts: SolverOptions,
}

impl CellSolver {
    pub fn new(ifs: &IfsSpec, p: f64, opts: SolverOptions) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        let t = ifs.template();
        let nb = ifs.boundary().len();
        let n_free = t.len() - nb;
        let var = |i: usize| if i >= nb { i - nb } else { n_free + i };
        let mut problem = EdgeProblem::new(n_free);
        for child in &t.children {
            for (a, &i) in child.iter().enumerate() {
                for &j in &child[a + 1..] {
                    problem.add(var(i), var(j), 2.0);
                }
            }
        }
        problem.compact();
        let linear = problem.linear_extension(nb)?;
        Ok(CellSolver { p, n_boundary: nb, problem, linear, opts })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Values at template points `|V_0|..|V_1|` given the `V_0` values.
    pub fn solve(&self, boundary: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(boundary.len(), self.n_boundary);
        let lin = (&self.linear * DVector::from_column_slice(boundary)).as_slice().to_vec();
        if self.p == 2.0 {
            return Ok(lin);
        }
        Ok(self.problem.solve(boundary, self.p, Some(&lin), &self.opts)?.x)
    }

    /// The linear (`p = 2`) extension matrix, rows indexed by template interior points.
    pub fn linear_matrix(&self) -> &DMatrix<f64> {
        &self.linear
    }
}

/// Extend `u` from `V_n^F` to `V_{to_level}^F` one level at a time, each
/// new level minimising `E_{k+1}` given the values on `V_k^F`. Cells at a
/// given level do not share new vertices, so the step decouples by cell.
pub fn p_harmonic_extension(
    graph: &VertexGraph,
    u: &FunctionOnVertices,
    to_level: usize,
    p: f64,
    opts: &SolverOptions,
) -> Result<FunctionOnVertices> {
    if to_level > graph.level() {
        return Err(Error::LevelTooDeep { requested: to_level, built: graph.level() });
    }
    let from = u.level();
    if to_level < from {
        return u.restrict(graph, to_level);
    }
    let solver = CellSolver::new(graph.ifs(), p, *opts)?;
    let template = graph.ifs().template();
    let mut vals = u.values().to_vec();
    vals.resize(graph.vertex_count(to_level), f64::NAN);
    for k in from..to_level {
        let cells = graph.cells(k);
        let next = graph.cells(k + 1);
        let interiors: Vec<Vec<f64>> = (0..cells.len())
            .into_par_iter()
            .map(|c| {
                let b: Vec<f64> = cells.cell(c).iter().map(|&i| vals[i as usize]).collect();
                solver.solve(&b)
            })
            .collect::<Result<_>>()?;
        for (c, inner) in interiors.iter().enumerate() {
            let base = graph.children(c).start;
            for (t, &(child, slot)) in template.interior_source.iter().enumerate() {
                let id = next.cell(base + child)[slot] as usize;
                vals[id] = inner[t];
            }
        }
        debug_assert!(vals[..graph.vertex_count(k + 1)].iter().all(|v| v.is_finite()), "unfilled vertex");
    }
    FunctionOnVertices::new(graph, to_level, vals)
}

/// Extension of values given on `V_0^F` to the top level of `graph`.
pub fn harmonic_extension_of_boundary(
    graph: &VertexGraph,
    boundary: &[f64],
    p: f64,
    opts: &SolverOptions,
) -> Result<FunctionOnVertices> {
    let u0 = FunctionOnVertices::new(graph, 0, boundary.to_vec())?;
    p_harmonic_extension(graph, &u0, graph.level(), p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::discrete_p_energy;

    #[test]
    fn gasket_midpoints_two_fifths_rule() {
        let ifs = IfsSpec::catalog("sierpinski").unwrap();
        let g = VertexGraph::single(&ifs, 1).unwrap();
        let u = harmonic_extension_of_boundary(&g, &[1.0, 0.0, 0.0], 2.0, &SolverOptions::default()).unwrap();
        let mut mids: Vec<f64> = u.values()[3..].to_vec();
        mids.sort_by(f64::total_cmp);
        let expect = [0.2, 0.4, 0.4];
        for (a, b) in mids.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{mids:?}");
        }
    }

    #[test]
    fn gasket_energy_ratio_three_fifths() {
        let ifs = IfsSpec::catalog("sierpinski").unwrap();
        let g = VertexGraph::single(&ifs, 5).unwrap();
        let u = harmonic_extension_of_boundary(&g, &[1.0, 0.0, 0.0], 2.0, &SolverOptions::default()).unwrap();
        let e0 = discrete_p_energy(&g, &u, 0, 2.0).unwrap();
        assert!((e0 - 4.0).abs() < 1e-14);
        for n in 1..=5 {
            let e = discrete_p_energy(&g, &u, n, 2.0).unwrap();
            let expect = 4.0 * 0.6f64.powi(n as i32);
            assert!((e - expect).abs() < 1e-12, "n={n}: {e}");
        }
    }

    #[test]
    fn interval_extension_is_linear_for_p3() {
        let ifs = IfsSpec::catalog("interval").unwrap();
        let g = VertexGraph::single(&ifs, 4).unwrap();
        let u = harmonic_extension_of_boundary(&g, &[0.0, 1.0], 3.0, &SolverOptions::default()).unwrap();
        for (i, v) in u.values().iter().enumerate() {
            assert!((v - g.coord(i)[0]).abs() < 1e-9);
        }
    }
}
