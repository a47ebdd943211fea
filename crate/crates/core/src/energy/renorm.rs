use serde::Serialize;

use super::discrete::cell_energy;
use super::solver::{EdgeProblem, SolverOptions};
use crate::error::{Error, Result};
use crate::fractal::{IfsSpec, VertexGraph};
use crate::sum::par_sum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenormOptions {
    /// Deepest level at which the minimal energy is computed.
    pub depth: usize,
    /// Convergence threshold on successive ratios.
    pub tol: f64,
    pub solver: SolverOptions,
}

impl Default for RenormOptions {
    fn default() -> Self {
        RenormOptions { depth: 5, tol: 1e-6, solver: SolverOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RenormReport {
    pub p: f64,
    pub r_p: f64,
    /// `ratios[j][n-1] = E_n^{min}(e_{j+1}) / E_{n-1}^{min}(e_{j+1})`.
    pub ratios: Vec<Vec<f64>>,
    pub depth_used: usize,
}

/// Minimal `E_n` over all extensions of `data` from `V_0` to `V_n`.
fn minimal_energy(graph: &VertexGraph, n: usize, data: &[f64], p: f64, opts: &SolverOptions) -> Result<f64> {
    let nb = data.len();
    let count = graph.vertex_count(n);
    let n_free = count - nb;
    let var = |id: u32| {
        let id = id as usize;
        if id >= nb {
            id - nb
        } else {
            n_free + id
        }
    };
    let mut problem = EdgeProblem::new(n_free);
    for cell in graph.cells(n).iter() {
        for (a, &i) in cell.iter().enumerate() {
            for &j in &cell[a + 1..] {
                problem.add(var(i), var(j), 2.0);
            }
        }
    }
    problem.compact();
    let sol = problem.solve(data, p, None, opts)?;
    let mut vals = data.to_vec();
    vals.extend_from_slice(&sol.x);
    let cells = graph.cells(n);
    Ok(par_sum(cells.len(), |c| cell_energy(cells.cell(c), &vals, p)))
}

/// Estimate `r_p` as the limiting ratio of consecutive minimal energies,
/// averaged over the boundary data `e_1, …, e_{|V_0|−1}`.
pub fn renormalization_factor(ifs: &IfsSpec, p: f64, opts: &RenormOptions) -> Result<RenormReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    if opts.depth < 2 {
        return Err(Error::InvalidParameter("renormalisation depth must be at least 2".into()));
    }
    let graph = VertexGraph::single(ifs, opts.depth)?;
    let nb = ifs.boundary().len();
    let basis: Vec<Vec<f64>> = (1..nb)
        .map(|j| (0..nb).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut previous: Vec<f64> = basis
        .iter()
        .map(|e| minimal_energy(&graph, 0, e, p, &opts.solver))
        .collect::<Result<_>>()?;
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); basis.len()];
    for n in 1..=opts.depth {
        for (j, e) in basis.iter().enumerate() {
            let m = minimal_energy(&graph, n, e, p, &opts.solver)?;
            ratios[j].push(m / previous[j]);
            previous[j] = m;
        }
        if n >= 2 && ratios.iter().all(|r| (r[n - 1] - r[n - 2]).abs() < opts.tol) {
            let r_p = ratios.iter().map(|r| r[n - 1]).sum::<f64>() / ratios.len() as f64;
            return Ok(RenormReport { p, r_p, ratios, depth_used: n });
        }
    }
    let mean: Vec<f64> = (0..opts.depth)
        .map(|n| ratios.iter().map(|r| r[n]).sum::<f64>() / ratios.len() as f64)
        .collect();
    Err(Error::RatioOscillation { ratios: mean })
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalExponent {
    pub p: f64,
    pub r_p: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub rho: f64,
    /// `σ > α/p`; when false the input fails property (E).
    pub property_e: bool,
    pub renorm: RenormReport,
}

/// `σ_p^# = (log_ρ r_p + α) / p`.
pub fn critical_exponent(ifs: &IfsSpec, p: f64, opts: &RenormOptions) -> Result<CriticalExponent> {
    let renorm = renormalization_factor(ifs, p, opts)?;
    let rho = ifs.rho_f64();
    let alpha = ifs.alpha();
    let sigma = (renorm.r_p.ln() / rho.ln() + alpha) / p;
    Ok(CriticalExponent { p, r_p: renorm.r_p, sigma, alpha, rho, property_e: sigma > alpha / p, renorm })
}

/// Walk dimension `β* = log_ρ r_2 + α`.
pub fn beta_star(ifs: &IfsSpec) -> Result<f64> {
    Ok(2.0 * critical_exponent(ifs, 2.0, &RenormOptions::default())?.sigma)
}
