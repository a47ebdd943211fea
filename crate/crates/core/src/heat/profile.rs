use serde::Serialize;

use super::kernel::{KernelModel, RadialKernel};
use crate::besov::ProfileOptions;
use crate::besov::RESOLUTION_MARGIN;
use crate::energy::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::lab::{SweepRow, SweepTable};
use crate::measure::{BallIndex, DiscreteMeasure, Radius};
use crate::sum::{par_sum_bins, pow_p};
use crate::window::Window;

/// `t_n = ρ^{β* n}` for `n = 0..=n_max`, so that `t_n^{1/β*} = ρ^n`.
pub fn time_grid(rho: f64, beta_star: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| rho.powf(beta_star * n as f64)).collect()
}

fn check_len(graph: &VertexGraph, measure: &DiscreteMeasure, u: &FunctionOnVertices) -> Result<usize> {
    let count = graph.vertex_count(measure.level());
    if u.len() != count {
        return Err(Error::Length { expected: count, got: u.len() });
    }
    Ok(count)
}

/// `∫∫ |u(x) − u(y)|^p p_t(x, y) dμ(x) dμ(y)` for each `t`.
fn double_integrals(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    kernel: &KernelModel,
    times: &[f64],
) -> Result<Vec<f64>> {
    let count = check_len(graph, measure, u)?;
    let vals = u.values();
    let w = measure.weights();
    if let KernelModel::GraphSpectral(s) = kernel {
        if s.len() != count {
            return Err(Error::Length { expected: s.len(), got: count });
        }
        return Ok(times
            .iter()
            .map(|&t| {
                if p == 2.0 {
                    s.quadratic_sum(vals, t)
                } else {
                    let d = s.density_matrix(t);
                    crate::sum::par_sum(count, |x| {
                        (0..count).map(|y| w[x] * w[y] * pow_p((vals[x] - vals[y]).abs(), p) * d[(x, y)]).sum()
                    })
                }
            })
            .collect());
    }
    // radial kernels: visit pairs once, in order of decreasing cutoff
    let mut order: Vec<usize> = (0..times.len()).collect();
    let kernels: Vec<RadialKernel> =
        times.iter().map(|&t| Ok(kernel.radial(t)?.expect("radial kernel"))).collect::<Result<_>>()?;
    order.sort_by(|&a, &b| kernels[b].cutoff.total_cmp(&kernels[a].cutoff));
    let Some(&widest) = order.first() else { return Ok(Vec::new()) };
    let reach = Radius::new(kernels[widest].cutoff)?;
    let index = BallIndex::new(graph, count, kernels[widest].cutoff.min(1.0));
    let sums = par_sum_bins(count, times.len(), |x, acc| {
        let ux = vals[x];
        index.for_each_in_ball(x, &reach, |y, d2| {
            let diff = pow_p((ux - vals[y]).abs(), p);
            if diff == 0.0 {
                return;
            }
            let d = d2.sqrt();
            let wy = diff * w[x] * w[y];
            for &n in &order {
                let k = &kernels[n];
                if d >= k.cutoff {
                    break;
                }
                acc[n].add(wy * k.eval(d, d2));
            }
        });
    });
    Ok(sums)
}

/// `Ψ_u^σ(t) = t^{−pσ/β*} ∫∫ |u(x) − u(y)|^p p_t(x, y) dμ dμ`.
pub fn psi(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    sigma: f64,
    kernel: &KernelModel,
    t: f64,
) -> Result<f64> {
    let s = double_integrals(graph, measure, u, p, kernel, &[t])?;
    Ok(t.powf(-p * sigma / kernel.beta_star()) * s[0])
}

/// `σ`-independent heat double integrals on the grid `t_n = ρ^{β* n}`.
#[derive(Clone, Debug, Serialize)]
pub struct HeatSums {
    pub p: f64,
    pub rho: f64,
    pub beta_star: f64,
    pub level: usize,
    pub kernel: String,
    pub t: Vec<f64>,
    pub sums: Vec<f64>,
    pub resolved: Vec<bool>,
}

impl HeatSums {
    pub fn compute(
        graph: &VertexGraph,
        measure: &DiscreteMeasure,
        u: &FunctionOnVertices,
        p: f64,
        kernel: &KernelModel,
        n_max: usize,
        opts: &ProfileOptions,
    ) -> Result<Self> {
        let m = measure.level();
        if n_max + RESOLUTION_MARGIN > m {
            return Err(Error::LevelTooDeep { requested: n_max + RESOLUTION_MARGIN, built: m });
        }
        let rho = graph.ifs().rho_f64();
        let beta = kernel.beta_star();
        let t = time_grid(rho, beta, n_max);
        let sums = double_integrals(graph, measure, u, p, kernel, &t)?;
        Ok(HeatSums {
            p,
            rho,
            beta_star: beta,
            level: m,
            kernel: kernel.name().into(),
            t,
            sums,
            resolved: (0..=n_max)
                .map(|n| opts.window.resolved_fraction(rho, m, n) >= opts.window.min_resolved_fraction)
                .collect(),
        })
    }

    pub fn at_sigma(&self, sigma: f64, opts: &ProfileOptions) -> HeatProfile {
        let psi: Vec<f64> =
            self.t.iter().zip(&self.sums).map(|(&t, &s)| t.powf(-self.p * sigma / self.beta_star) * s).collect();
        let sup = psi.iter().cloned().fold(0.0, f64::max);
        let series = psi.iter().sum();
        let resolved_idx: Vec<usize> = (0..psi.len()).filter(|&n| self.resolved[n]).collect();
        let tail = |len: usize| -> &[usize] { &resolved_idx[resolved_idx.len().saturating_sub(len)..] };
        let fold = |idx: &[usize], init: f64, f: fn(f64, f64) -> f64| {
            if idx.is_empty() {
                f64::NAN
            } else {
                idx.iter().map(|&n| psi[n]).fold(init, f)
            }
        };
        HeatProfile {
            p: self.p,
            sigma,
            rho: self.rho,
            beta_star: self.beta_star,
            level: self.level,
            kernel: self.kernel.clone(),
            t: self.t.clone(),
            ks: fold(tail(opts.ks_len), f64::NEG_INFINITY, f64::max),
            window_min: fold(tail(opts.window.len), f64::INFINITY, f64::min),
            window_max: fold(tail(opts.window.len), f64::NEG_INFINITY, f64::max),
            psi,
            resolved: self.resolved.clone(),
            sup,
            series,
            window: opts.window,
        }
    }
}

/// `Ψ_u^σ(t_n)` for `n = 0..=n_max` with the derived heat norms.
#[derive(Clone, Debug, Serialize)]
pub struct HeatProfile {
    pub p: f64,
    pub sigma: f64,
    pub rho: f64,
    pub beta_star: f64,
    pub level: usize,
    pub kernel: String,
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub resolved: Vec<bool>,
    /// `E_{p,∞}^σ`: the grid sup.
    pub sup: f64,
    /// Plain grid sum `Σ_n Ψ(t_n)`.
    pub series: f64,
    pub ks: f64,
    pub window_min: f64,
    pub window_max: f64,
    pub window: Window,
}

impl HeatProfile {
    pub fn n_max(&self) -> usize {
        self.psi.len() - 1
    }

    /// The `dt/t` integral: `series · β* log(1/ρ)`.
    pub fn series_dt(&self) -> f64 {
        self.series * self.beta_star * (1.0 / self.rho).ln()
    }

    pub fn resolved_max(&self) -> Option<usize> {
        self.resolved.iter().rposition(|&r| r)
    }

    pub fn to_table(&self) -> SweepTable {
        let mut tab = SweepTable::new("heat_profile")
            .meta("kernel", &self.kernel)
            .meta("p", self.p)
            .meta("sigma", self.sigma)
            .meta("beta_star", self.beta_star)
            .meta("level", self.level)
            .meta("window", self.window.describe())
            .meta("sup", self.sup)
            .meta("series_dt", self.series_dt())
            .meta("ks", self.ks);
        for (n, (&t, &psi)) in self.t.iter().zip(&self.psi).enumerate() {
            let mut row = SweepRow::new(format!("n{n}"))
                .param("n", n as f64)
                .param("t", t)
                .output("psi", psi)
                .output("scaled_ratio", if self.sup > 0.0 { psi / self.sup } else { f64::NAN });
            if !self.resolved[n] {
                row = row.flag("under_resolved");
            }
            tab.push(row);
        }
        tab
    }
}

#[allow(clippy::too_many_arguments)]
pub fn heat_profile(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    sigma: f64,
    kernel: &KernelModel,
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<HeatProfile> {
    Ok(HeatSums::compute(graph, measure, u, p, kernel, n_max, opts)?.at_sigma(sigma, opts))
}

/// Heat analogue of the NE report: `sup Ψ / min_window Ψ` and
/// `max_window Ψ / min_window Ψ`.
#[allow(clippy::too_many_arguments)]
pub fn ke_report(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    family: &[(String, FunctionOnVertices)],
    p: f64,
    sigma: f64,
    kernel: &KernelModel,
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<SweepTable> {
    let mut table = SweepTable::new("ke_report")
        .meta("kernel", kernel.name())
        .meta("p", p)
        .meta("sigma", sigma)
        .meta("window", opts.window.describe());
    let mut family_max: f64 = 0.0;
    for (name, u) in family {
        let prof = heat_profile(graph, measure, u, p, sigma, kernel, n_max, opts)?;
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
        table.push(row.output("c_ke", c).output("c_ke_tilde", tilde));
    }
    table.set_meta("family_max_c_ke", family_max);
    Ok(table)
}
