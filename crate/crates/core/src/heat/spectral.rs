use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::measure::DiscreteMeasure;

/// Heat kernel of the weighted graph Laplacian on `V_m` with respect to
/// `μ_m`: `p_t(x, y) = Σ_k e^{−λ_k t} ψ_k(x) ψ_k(y)`, the `ψ_k` being
/// `μ`-orthonormal eigenfunctions.
///
/// Every unordered pair inside a level-`m` cell gets weight `r^{−m}` with
/// `r = ρ^{β* − α}`, which puts `t` on the continuum clock (on the interval
/// the kernel approaches the Neumann heat kernel of `d²/dx²`).
#[derive(Clone, Debug, Serialize)]
pub struct SpectralKernel {
    pub level: usize,
    pub beta_star: f64,
    pub edge_weight: f64,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    psi: DMatrix<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
}

impl SpectralKernel {
    pub fn build(graph: &VertexGraph, measure: &DiscreteMeasure, beta_star: f64) -> Result<Self> {
        let m = measure.level();
        let n = graph.vertex_count(m);
        let ifs = graph.ifs();
        let r = ifs.rho_f64().powf(beta_star - ifs.alpha());
        let w = r.powi(-(m as i32));
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for cell in graph.cells(m).iter() {
            for (i, &a) in cell.iter().enumerate() {
                for &b in &cell[i + 1..] {
                    let (a, b) = (a as usize, b as usize);
                    lap[(a, b)] -= w;
                    lap[(b, a)] -= w;
                    lap[(a, a)] += w;
                    lap[(b, b)] += w;
                }
            }
        }
        let mu = measure.weights().to_vec();
        let s: Vec<f64> = mu.iter().map(|x| x.sqrt().recip()).collect();
        let a = DMatrix::from_fn(n, n, |i, j| s[i] * lap[(i, j)] * s[j]);
        let eig = SymmetricEigen::try_new(a, 1e-14, 0).ok_or_else(|| Error::Eigen("symmetric eigensolver failed".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let lmax = eigenvalues.last().copied().unwrap_or(0.0);
        if n > 1 && eigenvalues[1] <= 1e-12 * lmax {
            return Err(Error::Eigen("graph Laplacian has a repeated zero eigenvalue".into()));
        }
        let psi = DMatrix::from_fn(n, n, |x, k| s[x] * eig.eigenvectors[(x, order[k])]);
        Ok(SpectralKernel { level: m, beta_star, edge_weight: w, eigenvalues, psi, weights: mu })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `μ`-orthonormal eigenfunction `k` (ascending eigenvalue).
    pub fn eigenfunction(&self, k: usize) -> Vec<f64> {
        self.psi.column(k).iter().copied().collect()
    }

    pub fn density_matrix(&self, t: f64) -> DMatrix<f64> {
        let e = DVector::from_iterator(self.len(), self.eigenvalues.iter().map(|l| (-l * t).exp()));
        let scaled = DMatrix::from_fn(self.len(), self.len(), |x, k| self.psi[(x, k)] * e[k]);
        let mut out = &scaled * self.psi.transpose();
        out.fill_upper_triangle_with_lower_triangle();
        out
    }

    /// `P_t(x, y) = p_t(x, y) μ(y)`, the row-stochastic transition matrix.
    pub fn operator_matrix(&self, t: f64) -> DMatrix<f64> {
        let mut p = self.density_matrix(t);
        for (j, &w) in self.weights.iter().enumerate() {
            p.column_mut(j).scale_mut(w);
        }
        p
    }

    /// `μ`-coefficients `⟨f, ψ_k⟩` of `f`.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let g = DVector::from_iterator(self.len(), f.iter().zip(&self.weights).map(|(a, w)| a * w));
        (self.psi.transpose() * g).iter().copied().collect()
    }

    pub fn apply(&self, f: &[f64], t: f64) -> Vec<f64> {
        let c = self.coefficients(f);
        let c = DVector::from_iterator(self.len(), c.iter().zip(&self.eigenvalues).map(|(c, l)| c * (-l * t).exp()));
        (&self.psi * c).iter().copied().collect()
    }

    /// `∫∫ (u(x) − u(y))² p_t dμ dμ = 2 Σ_k (1 − e^{−λ_k t}) ⟨u, ψ_k⟩²`.
    pub fn quadratic_sum(&self, u: &[f64], t: f64) -> f64 {
        let c = self.coefficients(u);
        2.0 * c.iter().zip(&self.eigenvalues).map(|(c, l)| -(-l * t).exp_m1() * c * c).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    #[test]
    fn two_point_kernel_closed_form() {
        // V_0 of the interval: μ = (1/2, 1/2), one edge of weight 1
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 0).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let k = SpectralKernel::build(&g, &mu, 2.0).unwrap();
        assert!((k.eigenvalues[1] - 4.0).abs() < 1e-12);
        for t in [0.01, 0.3, 2.0] {
            let p = k.density_matrix(t);
            let e = (-4.0 * t).exp();
            assert!((p[(0, 0)] - (1.0 + e)).abs() < 1e-12);
            assert!((p[(0, 1)] - (1.0 - e)).abs() < 1e-12);
        }
    }

    #[test]
    fn stochastic_and_semigroup() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 3).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let k = SpectralKernel::build(&g, &mu, (5f64 / 3.0).log2() + 3f64.log2()).unwrap();
        let a = k.operator_matrix(0.01);
        let b = k.operator_matrix(0.02);
        for i in 0..k.len() {
            let row: f64 = a.row(i).iter().sum();
            assert!((row - 1.0).abs() < 1e-12);
        }
        assert!((&a * &a - &b).amax() < 1e-12);
        let u: Vec<f64> = (0..k.len()).map(|i| g.coord(i)[0]).collect();
        let dense = k.density_matrix(0.01);
        let w = mu.weights();
        let mut direct = 0.0;
        for x in 0..k.len() {
            for y in 0..k.len() {
                direct += (u[x] - u[y]).powi(2) * dense[(x, y)] * w[x] * w[y];
            }
        }
        assert!((direct - k.quadratic_sum(&u, 0.01)).abs() < 1e-12);
    }
}
