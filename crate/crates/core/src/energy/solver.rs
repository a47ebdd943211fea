//! Minimisation of convex edge sums `Σ_e w_e φ(x_a − x_b)`, `φ(d) = |d|^p`,
//! with some variables pinned.
//!
//! `p = 2` is a linear solve. Otherwise a damped Newton iteration with an
//! Armijo backtracking search is used, falling back to exact coordinate
//! descent if Newton stalls. For `1 < p < 2` the kernel is smoothed to
//! `(d² + δ²)^{p/2}` so the Hessian stays finite.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing width for `1 < p < 2`.
pub const SMOOTHING: f64 = 1e-14;

/// Steps below this (on data rescaled to `[0, 1]`) are below double
/// resolution; for `p < 2` the gradient floor there can exceed the target.
const STALL: f64 = 4.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the largest gradient entry falls below `tol · p · w · osc^{p−1}`.
    pub tol: f64,
    pub max_newton: usize,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-12, max_newton: 200, max_sweeps: 20_000 }
    }
}

/// Variables `0..n_free` are unknowns; `n_free..` are pinned to `fixed`.
#[derive(Clone, Debug)]
pub struct EdgeProblem {
    pub n_free: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl EdgeProblem {
    pub fn new(n_free: usize) -> Self {
        EdgeProblem { n_free, edges: Vec::new() }
    }

    pub fn add(&mut self, a: usize, b: usize, w: f64) {
        if a != b {
            self.edges.push((a, b, w));
        }
    }

    /// Merge parallel edges.
    pub fn compact(&mut self) {
        for e in self.edges.iter_mut() {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
        }
        self.edges.sort_by_key(|e| (e.0, e.1));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.edges.len());
        for &(a, b, w) in &self.edges {
            match out.last_mut() {
                Some(l) if l.0 == a && l.1 == b => l.2 += w,
                _ => out.push((a, b, w)),
            }
        }
        self.edges = out;
    }

    fn value_of(&self, x: &[f64], fixed: &[f64], i: usize) -> f64 {
        if i < self.n_free {
            x[i]
        } else {
            fixed[i - self.n_free]
        }
    }

    pub fn energy(&self, x: &[f64], fixed: &[f64], p: f64) -> f64 {
        self.energy_with(x, fixed, &Kernel::new(p))
    }

    fn energy_with(&self, x: &[f64], fixed: &[f64], k: &Kernel) -> f64 {
        let mut s = crate::sum::Kahan::new();
        for &(a, b, w) in &self.edges {
            s.add(w * k.phi(self.value_of(x, fixed, a) - self.value_of(x, fixed, b)));
        }
        s.value()
    }

    /// Dense Laplacian blocks `(L_ff, L_fb)`.
    pub fn laplacian(&self, n_fixed: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n_free;
        let mut lff = DMatrix::zeros(n, n);
        let mut lfb = DMatrix::zeros(n, n_fixed);
        for &(a, b, w) in &self.edges {
            for (i, j) in [(a, b), (b, a)] {
                if i < n {
                    lff[(i, i)] += w;
                    if j < n {
                        lff[(i, j)] -= w;
                    } else {
                        lfb[(i, j - n)] -= w;
                    }
                }
            }
        }
        (lff, lfb)
    }

    /// `−L_ff^{-1} L_fb`: the `p = 2` minimiser as a linear map of the pinned values.
    pub fn linear_extension(&self, n_fixed: usize) -> Result<DMatrix<f64>> {
        let (lff, lfb) = self.laplacian(n_fixed);
        if self.n_free == 0 {
            return Ok(DMatrix::zeros(0, n_fixed));
        }
        let chol = lff
            .cholesky()
            .ok_or_else(|| Error::Eigen("Laplacian block is not positive definite".into()))?;
        Ok(-chol.solve(&lfb))
    }

    pub fn solve(&self, fixed: &[f64], p: f64, init: Option<&[f64]>, opts: &SolverOptions) -> Result<Solution> {
        let n = self.n_free;
        if n == 0 {
            return Ok(Solution { x: vec![], iterations: 0, residual: 0.0 });
        }
        let lo = fixed.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fixed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let osc = hi - lo;
        if osc == 0.0 {
            return Ok(Solution { x: vec![lo; n], iterations: 0, residual: 0.0 });
        }
        if p == 2.0 {
            let (lff, lfb) = self.laplacian(fixed.len());
            let chol = lff
                .cholesky()
                .ok_or_else(|| Error::Eigen("Laplacian block is not positive definite".into()))?;
            let rhs = -(&lfb * DVector::from_column_slice(fixed));
            let x = chol.solve(&rhs);
            return Ok(Solution { x: x.as_slice().to_vec(), iterations: 1, residual: 0.0 });
        }
        // Work on data rescaled to [0, 1] so the tolerance does not fight
        // the absolute offset of the values.
        let norm: Vec<f64> = fixed.iter().map(|v| (v - lo) / osc).collect();
        let init = init.map(|v| v.iter().map(|t| ((t - lo) / osc).clamp(0.0, 1.0)).collect::<Vec<_>>());
        let mut sol = self.solve_unit(&norm, p, init, opts)?;
        for v in sol.x.iter_mut() {
            *v = lo + osc * *v;
        }
        Ok(sol)
    }

    fn solve_unit(&self, fixed: &[f64], p: f64, init: Option<Vec<f64>>, opts: &SolverOptions) -> Result<Solution> {
        let wmax = self.edges.iter().map(|e| e.2).fold(0.0, f64::max);
        let scale = p * wmax;
        let target = opts.tol * scale;
        let mut x: Vec<f64> = match init {
            Some(v) => v,
            None => {
                let ext = self.linear_extension(fixed.len())?;
                (ext * DVector::from_column_slice(fixed)).as_slice().to_vec()
            }
        };
        let mut total = 0;
        if p < 2.0 {
            // continuation in the smoothing width; Newton alone stalls at the
            // cusp of |d|^p when two values nearly coincide
            let mut delta = 1e-2;
            while delta > SMOOTHING {
                let (_, its, _) = self.newton(&mut x, fixed, &Kernel::smoothed(p, delta), target, opts);
                total += its;
                delta *= 1e-2;
            }
        }
        let k = Kernel::new(p);
        let (done, its, residual) = self.newton(&mut x, fixed, &k, target, opts);
        total += its;
        if done {
            return Ok(Solution { x, iterations: total, residual: residual / scale });
        }
        self.coordinate_descent(x, fixed, &k, target, scale, total, opts)
    }

    /// Damped Newton with Armijo backtracking. Returns whether it converged,
    /// the iteration count and the final gradient norm.
    fn newton(&self, x: &mut Vec<f64>, fixed: &[f64], k: &Kernel, target: f64, opts: &SolverOptions) -> (bool, usize, f64) {
        let mut lambda = 0.0;
        let mut residual = f64::INFINITY;
        for it in 0..opts.max_newton {
            let (g, h) = self.grad_hess(x, fixed, k);
            residual = g.amax();
            if residual <= target {
                return (true, it, residual);
            }
            let Some(step) = damped_step(&h, &g, &mut lambda) else { return (false, it, residual) };
            if step.amax() <= STALL {
                return (true, it, residual);
            }
            let f0 = self.energy_with(x, fixed, k);
            let slope = g.dot(&step);
            if slope >= 0.0 {
                return (false, it, residual);
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                let f1 = self.energy_with(&trial, fixed, k);
                if f1 <= f0 + 1e-4 * t * slope + 1e-15 * f0.abs() {
                    *x = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return (false, it, residual);
            }
            lambda *= 0.1;
        }
        (false, opts.max_newton, residual)
    }

    fn grad_hess(&self, x: &[f64], fixed: &[f64], k: &Kernel) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n_free;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for &(a, b, w) in &self.edges {
            let d = self.value_of(x, fixed, a) - self.value_of(x, fixed, b);
            let d1 = w * k.dphi(d);
            let d2 = w * k.ddphi(d);
            if a < n {
                g[a] += d1;
                h[(a, a)] += d2;
            }
            if b < n {
                g[b] -= d1;
                h[(b, b)] += d2;
            }
            if a < n && b < n {
                h[(a, b)] -= d2;
                h[(b, a)] -= d2;
            }
        }
        (g, h)
    }

    #[allow(clippy::too_many_arguments)]
    fn coordinate_descent(
        &self,
        mut x: Vec<f64>,
        fixed: &[f64],
        k: &Kernel,
        target: f64,
        scale: f64,
        newton_its: usize,
        opts: &SolverOptions,
    ) -> Result<Solution> {
        let n = self.n_free;
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(a, b, w) in &self.edges {
            if a < n {
                adj[a].push((b, w));
            }
            if b < n {
                adj[b].push((a, w));
            }
        }
        let mut residual = f64::INFINITY;
        for sweep in 0..opts.max_sweeps {
            residual = 0.0;
            let mut moved: f64 = 0.0;
            for i in 0..n {
                let nb: Vec<(f64, f64)> = adj[i].iter().map(|&(j, w)| (self.value_of(&x, fixed, j), w)).collect();
                let grad = |t: f64| nb.iter().map(|&(v, w)| w * k.dphi(t - v)).sum::<f64>();
                residual = f64::max(residual, grad(x[i]).abs());
                let t = root_1d(&nb, &grad);
                moved = moved.max((t - x[i]).abs());
                x[i] = t;
            }
            if residual <= target || moved <= STALL {
                return Ok(Solution { x, iterations: newton_its + sweep, residual: residual / scale });
            }
        }
        Err(Error::NoConvergence { iterations: newton_its + opts.max_sweeps, residual: residual / scale })
    }
}

/// Solve `(H + λ D) s = −g`, raising `λ` until the factorisation succeeds.
fn damped_step(h: &DMatrix<f64>, g: &DVector<f64>, lambda: &mut f64) -> Option<DVector<f64>> {
    let dmax = h.diagonal().amax().max(f64::MIN_POSITIVE);
    for _ in 0..30 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += *lambda * dmax + 1e-15 * dmax;
        }
        if let Some(c) = m.cholesky() {
            let s = -c.solve(g);
            if s.iter().all(|v| v.is_finite()) {
                return Some(s);
            }
        }
        *lambda = if *lambda == 0.0 { 1e-12 } else { *lambda * 100.0 };
    }
    None
}

/// Minimiser of `Σ w φ(t − v)`: the root of its monotone derivative,
/// bracketed by the neighbour values.
fn root_1d(nb: &[(f64, f64)], grad: &dyn Fn(f64) -> f64) -> f64 {
    let mut lo = nb.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
    let mut hi = nb.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if grad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Kernel {
    p: f64,
    smooth: bool,
    delta2: f64,
}

impl Kernel {
    pub(crate) fn new(p: f64) -> Self {
        Kernel::smoothed(p, SMOOTHING)
    }

    fn smoothed(p: f64, delta: f64) -> Self {
        Kernel { p, smooth: p < 2.0, delta2: delta * delta }
    }

    pub(crate) fn phi(&self, d: f64) -> f64 {
        if self.smooth {
            (d * d + self.delta2).powf(0.5 * self.p)
        } else {
            d.abs().powf(self.p)
        }
    }

    fn dphi(&self, d: f64) -> f64 {
        if self.smooth {
            self.p * d * (d * d + self.delta2).powf(0.5 * self.p - 1.0)
        } else {
            self.p * d.abs().powf(self.p - 2.0) * d
        }
    }

    fn ddphi(&self, d: f64) -> f64 {
        if self.smooth {
            let s = d * d + self.delta2;
            self.p * s.powf(0.5 * self.p - 2.0) * ((self.p - 1.0) * d * d + self.delta2)
        } else {
            self.p * (self.p - 1.0) * d.abs().powf(self.p - 2.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n_free: usize) -> EdgeProblem {
        // fixed 0 at index n_free, fixed 1 at n_free + 1
        let mut pr = EdgeProblem::new(n_free);
        pr.add(n_free, 0, 1.0);
        for i in 0..n_free - 1 {
            pr.add(i, i + 1, 1.0);
        }
        pr.add(n_free - 1, n_free + 1, 1.0);
        pr
    }

    #[test]
    fn path_is_linear_for_every_p() {
        let pr = path(5);
        for p in [1.3, 2.0, 3.0, 6.0] {
            let s = pr.solve(&[0.0, 1.0], p, None, &SolverOptions::default()).unwrap();
            for (i, v) in s.x.iter().enumerate() {
                assert!((v - (i + 1) as f64 / 6.0).abs() < 1e-8, "p={p}: {:?}", s.x);
            }
        }
    }

    #[test]
    fn star_median_for_p_near_one() {
        // centre joined to pinned 0, 0, 1: minimiser of 2|t|^p + |1 − t|^p
        let mut pr = EdgeProblem::new(1);
        pr.add(0, 1, 1.0);
        pr.add(0, 2, 1.0);
        pr.add(0, 3, 1.0);
        let p = 1.5;
        let s = pr.solve(&[0.0, 0.0, 1.0], p, None, &SolverOptions::default()).unwrap();
        // stationarity: 2 t^{p−1} = (1 − t)^{p−1}  ⇒  t = 1 / (1 + 2^{1/(p−1)})
        let expect = 1.0 / (1.0 + 2f64.powf(1.0 / (p - 1.0)));
        assert!((s.x[0] - expect).abs() < 1e-9);
    }

    #[test]
    fn coordinate_descent_agrees_with_newton() {
        let pr = path(4);
        let k = Kernel::new(3.0);
        let opts = SolverOptions::default();
        let s = pr.coordinate_descent(vec![0.5; 4], &[0.0, 1.0], &k, 1e-10, 3.0, 0, &opts).unwrap();
        for (i, v) in s.x.iter().enumerate() {
            assert!((v - (i + 1) as f64 / 5.0).abs() < 1e-6);
        }
    }
}
