use serde::{Deserialize, Serialize};

use super::balls::{ball_sums, phi_scale, BallNormalization};
use crate::energy::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::lab::{SweepRow, SweepTable};
use crate::measure::{DiscreteMeasure, Radius};
use crate::window::Window;

/// Levels beyond the last profiled radius that the graph must carry.
pub const RESOLUTION_MARGIN: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub normalization: BallNormalization,
    pub window: Window,
    /// Deepest resolved grid points used for the Korevaar–Schoen surrogate.
    pub ks_len: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { normalization: BallNormalization::AlphaRegular, window: Window::default(), ks_len: 2 }
    }
}

/// `σ`-independent ball sums on the grid `r = ρ^n`; [`BallSums::at_sigma`]
/// turns them into a profile for any `σ`.
#[derive(Clone, Debug, Serialize)]
pub struct BallSums {
    pub p: f64,
    pub rho: f64,
    pub alpha: f64,
    pub level: usize,
    pub normalization: BallNormalization,
    pub r: Vec<f64>,
    pub sums: Vec<f64>,
    pub resolved: Vec<bool>,
}

impl BallSums {
    pub fn compute(
        graph: &VertexGraph,
        measure: &DiscreteMeasure,
        u: &FunctionOnVertices,
        p: f64,
        n_max: usize,
        opts: &ProfileOptions,
    ) -> Result<Self> {
        let m = measure.level();
        if n_max + RESOLUTION_MARGIN > m {
            return Err(Error::LevelTooDeep { requested: n_max + RESOLUTION_MARGIN, built: m });
        }
        let rho = graph.ifs().rho();
        let radii: Vec<Radius> = (0..=n_max).map(|n| Radius::power(rho, n)).collect();
        let sums = ball_sums(graph, measure, u, p, &radii, opts.normalization)?;
        let rho_f = graph.ifs().rho_f64();
        Ok(BallSums {
            p,
            rho: rho_f,
            alpha: graph.ifs().alpha(),
            level: m,
            normalization: opts.normalization,
            r: radii.iter().map(|r| r.value()).collect(),
            sums,
            resolved: (0..=n_max)
                .map(|n| opts.window.resolved_fraction(rho_f, m, n) >= opts.window.min_resolved_fraction)
                .collect(),
        })
    }

    pub fn at_sigma(&self, sigma: f64, opts: &ProfileOptions) -> BesovProfile {
        let phi: Vec<f64> = self
            .r
            .iter()
            .zip(&self.sums)
            .map(|(&r, &s)| phi_scale(r, self.p, sigma, self.alpha, self.normalization) * s)
            .collect();
        BesovProfile::new(self, sigma, phi, opts)
    }
}

/// `Φ_u^σ(ρ^n)` for `n = 0..=n_max` with the derived norms.
#[derive(Clone, Debug, Serialize)]
pub struct BesovProfile {
    pub p: f64,
    pub sigma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub level: usize,
    pub normalization: BallNormalization,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub resolved: Vec<bool>,
    /// `[u]^p_{B_{p,∞}^σ}`: the grid sup.
    pub sup: f64,
    /// `[u]^p_{B_{p,p}^σ}`: the plain grid sum `Σ_n Φ(ρ^n)`.
    pub series: f64,
    /// Max over the deepest `ks_len` resolved points.
    pub ks: f64,
    pub window_min: f64,
    pub window_max: f64,
    pub window: Window,
}

impl BesovProfile {
    fn new(s: &BallSums, sigma: f64, phi: Vec<f64>, opts: &ProfileOptions) -> Self {
        let sup = phi.iter().cloned().fold(0.0, f64::max);
        let series = phi.iter().sum();
        let resolved_idx: Vec<usize> = (0..phi.len()).filter(|&n| s.resolved[n]).collect();
        let tail = |len: usize| -> &[usize] { &resolved_idx[resolved_idx.len().saturating_sub(len)..] };
        let fold = |idx: &[usize], init: f64, f: fn(f64, f64) -> f64| {
            if idx.is_empty() {
                f64::NAN
            } else {
                idx.iter().map(|&n| phi[n]).fold(init, f)
            }
        };
        let ks = fold(tail(opts.ks_len), f64::NEG_INFINITY, f64::max);
        let window_min = fold(tail(opts.window.len), f64::INFINITY, f64::min);
        let window_max = fold(tail(opts.window.len), f64::NEG_INFINITY, f64::max);
        BesovProfile {
            p: s.p,
            sigma,
            rho: s.rho,
            alpha: s.alpha,
            level: s.level,
            normalization: s.normalization,
            r: s.r.clone(),
            phi,
            resolved: s.resolved.clone(),
            sup,
            series,
            ks,
            window_min,
            window_max,
            window: opts.window,
        }
    }

    pub fn n_max(&self) -> usize {
        self.phi.len() - 1
    }

    /// The `dr/r` integral: `series · log(1/ρ)`.
    pub fn series_dr(&self) -> f64 {
        self.series * (1.0 / self.rho).ln()
    }

    pub fn resolved_max(&self) -> Option<usize> {
        self.resolved.iter().rposition(|&r| r)
    }

    pub fn to_table(&self) -> SweepTable {
        let mut t = SweepTable::new("besov_profile")
            .meta("p", self.p)
            .meta("sigma", self.sigma)
            .meta("level", self.level)
            .meta("window", self.window.describe())
            .meta("sup", self.sup)
            .meta("series", self.series)
            .meta("ks", self.ks);
        for (n, (&r, &phi)) in self.r.iter().zip(&self.phi).enumerate() {
            let mut row = SweepRow::new(format!("n{n}"))
                .param("n", n as f64)
                .param("r", r)
                .output("phi", phi)
                .output("scaled_ratio", if self.sup > 0.0 { phi / self.sup } else { f64::NAN });
            if !self.resolved[n] {
                row = row.flag("under_resolved");
            }
            t.push(row);
        }
        t
    }
}

/// Profile on `r = ρ^n`, `n = 0..=n_max`; the graph level must be at least
/// `n_max + 2`.
pub fn besov_profile(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    sigma: f64,
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<BesovProfile> {
    Ok(BallSums::compute(graph, measure, u, p, n_max, opts)?.at_sigma(sigma, opts))
}

/// Empirical (NE) constant `sup Φ / min_window Φ` and the (ÑE) variant
/// `max_window Φ / min_window Φ` for every function.
pub fn ne_report(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    family: &[(String, FunctionOnVertices)],
    p: f64,
    sigma: f64,
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<SweepTable> {
    let mut table = SweepTable::new("ne_report")
        .meta("p", p)
        .meta("sigma", sigma)
        .meta("window", opts.window.describe());
    let mut family_max: f64 = 0.0;
    for (name, u) in family {
        let prof = besov_profile(graph, measure, u, p, sigma, n_max, opts)?;
        let mut row = SweepRow::new(name.clone()).output("sup", prof.sup).output("window_min", prof.window_min);
        let (c, tilde) = if prof.sup == 0.0 {
            row = row.flag("vacuous");
            (f64::NAN, f64::NAN)
        } else if prof.window_min.is_nan() {
            row = row.flag("no_resolved_window");
            (f64::NAN, f64::NAN)
        } else if prof.window_min == 0.0 {
            row = row.flag("anomaly");
            (f64::INFINITY, f64::INFINITY)
        } else {
            (prof.sup / prof.window_min, prof.window_max / prof.window_min)
        };
        if c.is_finite() {
            family_max = family_max.max(c);
        }
        table.push(row.output("c_ne", c).output("c_ne_tilde", tilde));
    }
    table.set_meta("family_max_c_ne", family_max);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    fn interval(m: usize) -> VertexGraph {
        VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), m).unwrap()
    }

    #[test]
    fn interval_flat_profile_at_sigma_one() {
        let g = interval(12);
        let mu = DiscreteMeasure::mu_m(&g);
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let opts = ProfileOptions::default();
        let prof = besov_profile(&g, &mu, &u, 2.0, 1.0, 10, &opts).unwrap();
        assert_eq!(prof.resolved_max(), Some(8));
        // discretisation loss is about 1.5 h / r
        for n in 1..=6 {
            let oracle = 2.0 / 3.0 - 0.5 * prof.r[n];
            assert!((prof.phi[n] - oracle).abs() < 0.03 * oracle, "n={n}: {}", prof.phi[n]);
        }
        assert!(prof.sup >= prof.phi.iter().cloned().fold(0.0, f64::max));
        let ne = ne_report(&g, &mu, &[("x".into(), u)], 2.0, 1.0, 10, &opts).unwrap();
        let c = ne.rows[0].get("c_ne").unwrap();
        assert!((c - 1.0).abs() < 0.2, "{c}");
    }

    #[test]
    fn supercritical_sigma_grows() {
        let g = interval(10);
        let mu = DiscreteMeasure::mu_m(&g);
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let opts = ProfileOptions::default();
        let sums = BallSums::compute(&g, &mu, &u, 2.0, 6, &opts).unwrap();
        let a = sums.at_sigma(1.0, &opts);
        let b = sums.at_sigma(1.2, &opts);
        for n in 3..=6 {
            let slope = (b.phi[n] / a.phi[n]).ln() / n as f64;
            assert!((slope - 0.4 * 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_enforced() {
        let g = interval(6);
        let mu = DiscreteMeasure::mu_m(&g);
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        assert!(besov_profile(&g, &mu, &u, 2.0, 1.0, 5, &ProfileOptions::default()).is_err());
    }
}
