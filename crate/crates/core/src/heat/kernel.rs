use serde::Serialize;

use super::spectral::SpectralKernel;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::measure::{BallIndex, DiscreteMeasure, Radius};

/// `exp(−CUTOFF)` is where radial kernels are truncated (about 1e-18 of the peak).
const CUTOFF: f64 = 41.5;

/// Constants of the two-sided sub-Gaussian estimate
/// `c1 t^{−α/β} e^{−c2 s^γ} ≤ p_t ≤ c3 t^{−α/β} e^{−c4 s^γ}`, `s = d / t^{1/β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HkConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// A kernel of the form `amp · exp(−(d / len)^γ)`, frozen at one time.
#[derive(Clone, Copy, Debug)]
pub struct RadialKernel {
    pub amp: f64,
    pub len: f64,
    pub gamma: f64,
    /// Distance beyond which the kernel is treated as zero.
    pub cutoff: f64,
}

impl RadialKernel {
    fn new(amp: f64, len: f64, gamma: f64) -> Self {
        RadialKernel { amp, len, gamma, cutoff: len * CUTOFF.powf(1.0 / gamma) }
    }

    #[inline]
    pub fn eval(&self, d: f64, d2: f64) -> f64 {
        let e = if self.gamma == 2.0 { d2 / (self.len * self.len) } else { (d / self.len).powf(self.gamma) };
        self.amp * (-e).exp()
    }

    /// `ln p` without underflow.
    #[inline]
    pub fn log_eval(&self, d: f64) -> f64 {
        self.amp.ln() - (d / self.len).powf(self.gamma)
    }
}

/// The Euclidean kernel `(4πt)^{−n/2} exp(−|x − y|² / 4t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussWeierstrass {
    pub dim: usize,
}

impl GaussWeierstrass {
    pub fn radial(&self, t: f64) -> RadialKernel {
        RadialKernel::new((4.0 * std::f64::consts::PI * t).powf(-(self.dim as f64) / 2.0), 2.0 * t.sqrt(), 2.0)
    }

    pub fn constants(&self) -> HkConstants {
        let c = (4.0 * std::f64::consts::PI).powf(-(self.dim as f64) / 2.0);
        HkConstants { c1: c, c2: 0.25, c3: c, c4: 0.25 }
    }
}

/// `p_t(x, y) = c(t) t^{−α/β} exp(−(d / t^{1/β})^{β/(β−1)})` with `c(t)`
/// fixed by quadrature against the vertex measure so that the largest
/// mass over vertices is exactly 1.
#[derive(Clone, Debug, Serialize)]
pub struct SurrogateKernel {
    pub alpha: f64,
    pub beta: f64,
    pub r0: f64,
    /// `(t, c(t), smallest vertex mass)`, sorted by `t`.
    pub normalization: Vec<(f64, f64, f64)>,
}

impl SurrogateKernel {
    pub fn fit(graph: &VertexGraph, measure: &DiscreteMeasure, alpha: f64, beta: f64, r0: f64, times: &[f64]) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(Error::InvalidParameter(format!("walk dimension must exceed 1, got {beta}")));
        }
        let mut k = SurrogateKernel { alpha, beta, r0, normalization: Vec::new() };
        k.add_times(graph, measure, times)?;
        Ok(k)
    }

    /// Fit `c(t)` for any times not seen yet.
    pub fn add_times(&mut self, graph: &VertexGraph, measure: &DiscreteMeasure, times: &[f64]) -> Result<()> {
        let count = graph.vertex_count(measure.level());
        let index = BallIndex::new(graph, count, 2.0 * graph.ifs().rho_f64().powi(measure.level() as i32));
        let w = measure.weights();
        for &t in times {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
            }
            if self.lookup(t).is_some() {
                continue;
            }
            let raw = self.unnormalized(t);
            let cut = Radius::new(raw.cutoff)?;
            let masses: Vec<f64> = (0..count)
                .map(|x| {
                    let mut s = crate::sum::Kahan::new();
                    index.for_each_in_ball(x, &cut, |y, d2| s.add(w[y] * raw.eval(d2.sqrt(), d2)));
                    s.value()
                })
                .collect();
            let max = masses.iter().cloned().fold(0.0, f64::max);
            let min = masses.iter().cloned().fold(f64::INFINITY, f64::min);
            self.normalization.push((t, 1.0 / max, min / max));
        }
        self.normalization.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(())
    }

    fn lookup(&self, t: f64) -> Option<(f64, f64, f64)> {
        self.normalization.iter().copied().find(|e| (e.0 - t).abs() <= 1e-12 * t)
    }

    pub fn gamma(&self) -> f64 {
        self.beta / (self.beta - 1.0)
    }

    fn unnormalized(&self, t: f64) -> RadialKernel {
        RadialKernel::new(t.powf(-self.alpha / self.beta), t.powf(1.0 / self.beta), self.gamma())
    }

    pub fn c_at(&self, t: f64) -> Option<f64> {
        self.lookup(t).map(|e| e.1)
    }

    pub fn radial(&self, t: f64) -> Result<RadialKernel> {
        let c = self
            .c_at(t)
            .ok_or_else(|| Error::InvalidParameter(format!("surrogate kernel not normalised at t = {t}")))?;
        let mut k = self.unnormalized(t);
        k.amp *= c;
        Ok(k)
    }

    /// `c1 = min c(t)`, `c3 = max c(t)` over the fitted times, `c2 = c4 = 1`.
    pub fn constants(&self) -> HkConstants {
        let c1 = self.normalization.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        let c3 = self.normalization.iter().map(|e| e.1).fold(0.0, f64::max);
        HkConstants { c1, c2: 1.0, c3, c4: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub enum KernelModel {
    GaussWeierstrass(GaussWeierstrass),
    SubGaussian(SurrogateKernel),
    GraphSpectral(Box<SpectralKernel>),
}

impl KernelModel {
    pub fn name(&self) -> &'static str {
        match self {
            KernelModel::GaussWeierstrass(_) => "gauss_weierstrass",
            KernelModel::SubGaussian(_) => "subgaussian",
            KernelModel::GraphSpectral(_) => "graph_spectral",
        }
    }

    /// Walk dimension `β*`.
    pub fn beta_star(&self) -> f64 {
        match self {
            KernelModel::GaussWeierstrass(_) => 2.0,
            KernelModel::SubGaussian(s) => s.beta,
            KernelModel::GraphSpectral(s) => s.beta_star,
        }
    }

    pub fn constants(&self) -> Option<HkConstants> {
        match self {
            KernelModel::GaussWeierstrass(g) => Some(g.constants()),
            KernelModel::SubGaussian(s) => Some(s.constants()),
            KernelModel::GraphSpectral(_) => None,
        }
    }

    /// The radial evaluator at time `t`, or `None` for the spectral kernel.
    pub fn radial(&self, t: f64) -> Result<Option<RadialKernel>> {
        match self {
            KernelModel::GaussWeierstrass(g) => Ok(Some(g.radial(t))),
            KernelModel::SubGaussian(s) => s.radial(t).map(Some),
            KernelModel::GraphSpectral(_) => Ok(None),
        }
    }

    /// Dense density matrix `p_t(x, y)` over the first `count` vertices.
    pub fn density_matrix(&self, graph: &VertexGraph, count: usize, t: f64) -> Result<nalgebra::DMatrix<f64>> {
        match self {
            KernelModel::GraphSpectral(s) => {
                if s.len() != count {
                    return Err(Error::Length { expected: s.len(), got: count });
                }
                Ok(s.density_matrix(t))
            }
            _ => {
                let k = self.radial(t)?.expect("radial kernel");
                let dim = graph.dim();
                let c = graph.coords();
                Ok(nalgebra::DMatrix::from_fn(count, count, |x, y| {
                    let d2: f64 = (0..dim).map(|j| (c[x * dim + j] - c[y * dim + j]).powi(2)).sum();
                    k.eval(d2.sqrt(), d2)
                }))
            }
        }
    }

    /// `P_t f(x) = Σ_y p_t(x, y) f(y) μ(y)` at every vertex.
    pub fn apply(&self, graph: &VertexGraph, measure: &DiscreteMeasure, f: &[f64], t: f64) -> Result<Vec<f64>> {
        let count = f.len();
        match self {
            KernelModel::GraphSpectral(s) => Ok(s.apply(f, t)),
            _ => {
                let k = self.radial(t)?.expect("radial kernel");
                let index = BallIndex::new(graph, count, 2.0 * graph.ifs().rho_f64().powi(measure.level() as i32));
                let cut = Radius::new(k.cutoff)?;
                let w = measure.weights();
                Ok((0..count)
                    .map(|x| {
                        let mut s = crate::sum::Kahan::new();
                        index.for_each_in_ball(x, &cut, |y, d2| s.add(k.eval(d2.sqrt(), d2) * f[y] * w[y]));
                        s.value()
                    })
                    .collect())
            }
        }
    }

    /// `∫ p_t(x, ·) dμ` at every vertex.
    pub fn masses(&self, graph: &VertexGraph, measure: &DiscreteMeasure, t: f64) -> Result<Vec<f64>> {
        let ones = vec![1.0; graph.vertex_count(measure.level())];
        self.apply(graph, measure, &ones, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    #[test]
    fn gauss_weierstrass_diagonal() {
        let g = GaussWeierstrass { dim: 1 };
        for t in [1e-4, 1e-2, 1.0] {
            let k = g.radial(t);
            assert!((k.eval(0.0, 0.0) - (4.0 * std::f64::consts::PI * t).powf(-0.5)).abs() < 1e-15 * k.amp);
        }
    }

    #[test]
    fn surrogate_interval_mass() {
        let graph = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 12).unwrap();
        let mu = DiscreteMeasure::mu_m(&graph);
        let times = [1e-4, 1e-3, 1e-2, 1e-1];
        let s = SurrogateKernel::fit(&graph, &mu, 1.0, 2.0, 1.0, &times).unwrap();
        let model = KernelModel::SubGaussian(s.clone());
        for &t in &times {
            let m = model.masses(&graph, &mu, t).unwrap();
            let max = m.iter().cloned().fold(0.0, f64::max);
            assert!((0.99..=1.01).contains(&max), "t={t}: {max}");
            let k = s.radial(t).unwrap();
            assert_eq!(k.eval(0.0, 0.0), s.c_at(t).unwrap() * t.powf(-0.5));
        }
        let c = s.constants();
        assert!(c.c1 <= c.c3 && c.c2 == 1.0 && c.c4 == 1.0);
    }

    #[test]
    fn surrogate_needs_beta_above_one() {
        let graph = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 3).unwrap();
        let mu = DiscreteMeasure::mu_m(&graph);
        assert!(SurrogateKernel::fit(&graph, &mu, 1.0, 1.0, 1.0, &[0.1]).is_err());
    }
}
