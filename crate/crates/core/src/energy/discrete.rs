use serde::Serialize;

use super::function::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::sum::{par_sum, pow_p};

/// `E_n^{(p),F}(u) = Σ_f Σ_{|w|=n} Σ_{x,y ∈ f(V_w)} |u(x) − u(y)|^p` over
/// ordered pairs.
pub fn discrete_p_energy(graph: &VertexGraph, u: &FunctionOnVertices, n: usize, p: f64) -> Result<f64> {
    if n > graph.level() {
        return Err(Error::LevelTooDeep { requested: n, built: graph.level() });
    }
    if n > u.level() {
        return Err(Error::LevelTooDeep { requested: n, built: u.level() });
    }
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    let cells = graph.cells(n);
    let vals = u.values();
    Ok(par_sum(cells.len(), |c| cell_energy(cells.cell(c), vals, p)))
}

#[inline]
pub(crate) fn cell_energy(cell: &[u32], vals: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for (i, &a) in cell.iter().enumerate() {
        for &b in &cell[i + 1..] {
            s += pow_p((vals[a as usize] - vals[b as usize]).abs(), p);
        }
    }
    2.0 * s
}

/// `E_n` and `𝓔_n^σ = ρ^{−n(pσ−α)} E_n` for `n = 0..=m`.
#[derive(Clone, Debug, Serialize)]
pub struct EnergySequence {
    pub p: f64,
    pub sigma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
}

impl EnergySequence {
    pub fn compute(graph: &VertexGraph, u: &FunctionOnVertices, p: f64, sigma: f64) -> Result<Self> {
        Self::up_to(graph, u, p, sigma, u.level().min(graph.level()))
    }

    pub fn up_to(graph: &VertexGraph, u: &FunctionOnVertices, p: f64, sigma: f64, n_max: usize) -> Result<Self> {
        let rho = graph.ifs().rho_f64();
        let alpha = graph.ifs().alpha();
        let raw = (0..=n_max).map(|n| discrete_p_energy(graph, u, n, p)).collect::<Result<Vec<_>>>()?;
        let scaled = raw
            .iter()
            .enumerate()
            .map(|(n, e)| scale_factor(rho, n, p, sigma, alpha) * e)
            .collect();
        Ok(EnergySequence { p, sigma, rho, alpha, raw, scaled })
    }
}

/// `ρ^{−n(pσ−α)}`.
pub fn scale_factor(rho: f64, n: usize, p: f64, sigma: f64, alpha: f64) -> f64 {
    (-(n as f64) * (p * sigma - alpha) * rho.ln()).exp()
}
