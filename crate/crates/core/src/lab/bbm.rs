use crate::besov::{BallSums, ProfileOptions};
use crate::energy::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::heat::{HeatSums, KernelModel};
use crate::lab::{SweepRow, SweepTable};
use crate::measure::DiscreteMeasure;

/// Upper bounds carry this numerical margin.
pub const UPPER_MARGIN: f64 = 1.25;

fn check_gaps(gaps: &[f64], sigma_target: f64, alpha: f64, p: f64) -> Result<()> {
    for &g in gaps {
        let s = sigma_target - g;
        if !(g > 0.0) || !(s > alpha / p) {
            return Err(Error::InvalidParameter(format!("σ = {s} must lie in (α/p, σ_target)")));
        }
    }
    Ok(())
}

// Share of a flat profile's geometric series lost by stopping the grid at
// `n_max`: the summand decays like `ρ^(decay·n)`.
fn truncated_share(rho: f64, decay: f64, n_max: usize) -> f64 {
    rho.powf(decay * (n_max + 1) as f64)
}

struct Sweep {
    gap: f64,
    sigma: f64,
    value: f64,
    window_part: f64,
    unresolved_share: f64,
    truncated_share: f64,
}

fn finish(
    mut table: SweepTable,
    rows: Vec<Sweep>,
    reference: f64,
    ks: f64,
    upper: f64,
    lower: f64,
) -> SweepTable {
    let vacuous = reference == 0.0;
    let mut pass_upper = true;
    let mut pass_lower = true;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for r in &rows {
        let gap = r.gap;
        let mut row = SweepRow::new(format!("gap{gap}"))
            .param("sigma", r.sigma)
            .param("gap", gap)
            .output("value", r.value)
            .output("window_part", r.window_part)
            .output("unresolved_share", r.unresolved_share)
            .output("truncated_share", r.truncated_share)
            .output("ratio_to_reference", if vacuous { f64::NAN } else { r.value / reference });
        if vacuous {
            row = row.flag("vacuous");
        } else {
            lo = lo.min(r.value);
            hi = hi.max(r.value);
            if r.value > upper {
                pass_upper = false;
                row = row.flag("above_upper_bound");
            }
            if r.value < lower {
                pass_lower = false;
                row = row.flag("below_lower_bound");
            }
        }
        if r.unresolved_share > 0.5 || r.truncated_share > 0.5 {
            row = row.flag("under_resolved");
        }
        table.push(row);
    }
    table.set_meta("reference_sup", reference);
    table.set_meta("reference_ks", ks);
    table.set_meta("upper_bound", upper);
    table.set_meta("lower_bound", lower);
    table.set_meta("spread", if vacuous { f64::NAN } else { hi / lo });
    table.set_meta("pass_upper", pass_upper);
    table.set_meta("pass_lower", pass_lower);
    table
}

/// `(σ_target − σ)·[u]^p_{B_{p,p}^σ}` (grid sum times `log(1/ρ)`) for
/// `σ = σ_target − gap`. The reference is the grid sup at `σ_target`; the
/// upper bound is `(2/p)·sup·1.25` and the lower one `sup/(p·C_NE)`, with
/// `C_NE` the empirical constant of `u` at `σ_target`.
#[allow(clippy::too_many_arguments)]
pub fn bbm_sweep_besov(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    sigma_target: f64,
    gaps: &[f64],
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<SweepTable> {
    check_gaps(gaps, sigma_target, graph.ifs().alpha(), p)?;
    let sums = BallSums::compute(graph, measure, u, p, n_max, opts)?;
    let reference = sums.at_sigma(sigma_target, opts);
    let c_ne = reference.sup / reference.window_min;
    let ln = (1.0 / reference.rho).ln();
    let window: Vec<usize> = {
        let res: Vec<usize> = (0..=n_max).filter(|&n| reference.resolved[n]).collect();
        res[res.len().saturating_sub(opts.window.len)..].to_vec()
    };
    let rows = gaps
        .iter()
        .map(|&gap| {
            let prof = sums.at_sigma(sigma_target - gap, opts);
            let unresolved: f64 = (0..=n_max).filter(|&n| !prof.resolved[n]).map(|n| prof.phi[n]).sum();
            Sweep {
                gap,
                sigma: sigma_target - gap,
                value: gap * prof.series_dr(),
                window_part: gap * ln * window.iter().map(|&n| prof.phi[n]).sum::<f64>(),
                unresolved_share: if prof.series > 0.0 { unresolved / prof.series } else { 0.0 },
                truncated_share: truncated_share(reference.rho, p * gap, n_max),
            }
        })
        .collect();
    let table = SweepTable::new("bbm_besov")
        .meta("p", p)
        .meta("sigma_target", sigma_target)
        .meta("level", measure.level())
        .meta("window", opts.window.describe())
        .meta("c_ne", c_ne);
    let upper = 2.0 / p * reference.sup * UPPER_MARGIN;
    let lower = if c_ne.is_finite() { reference.sup / (p * c_ne) } else { 0.0 };
    Ok(finish(table, rows, reference.sup, reference.ks, upper, lower))
}

/// Heat version: `(σ̃ − σ)·E_{p,p}^σ` against `E_{p,∞}^{σ̃}`, upper bound
/// `(2β*/p)·sup·1.25`, lower bound `sup/(p·C_KE)`.
#[allow(clippy::too_many_arguments)]
pub fn bbm_sweep_heat(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    sigma_target: f64,
    gaps: &[f64],
    kernel: &KernelModel,
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<SweepTable> {
    check_gaps(gaps, sigma_target, graph.ifs().alpha(), p)?;
    let sums = HeatSums::compute(graph, measure, u, p, kernel, n_max, opts)?;
    let reference = sums.at_sigma(sigma_target, opts);
    let c_ke = reference.sup / reference.window_min;
    let beta = kernel.beta_star();
    let ln = beta * (1.0 / reference.rho).ln();
    let window: Vec<usize> = {
        let res: Vec<usize> = (0..=n_max).filter(|&n| reference.resolved[n]).collect();
        res[res.len().saturating_sub(opts.window.len)..].to_vec()
    };
    let rows = gaps
        .iter()
        .map(|&gap| {
            let prof = sums.at_sigma(sigma_target - gap, opts);
            let unresolved: f64 = (0..=n_max).filter(|&n| !prof.resolved[n]).map(|n| prof.psi[n]).sum();
            Sweep {
                gap,
                sigma: sigma_target - gap,
                value: gap * prof.series_dt(),
                window_part: gap * ln * window.iter().map(|&n| prof.psi[n]).sum::<f64>(),
                unresolved_share: if prof.series > 0.0 { unresolved / prof.series } else { 0.0 },
                truncated_share: truncated_share(reference.rho, p * gap, n_max),
            }
        })
        .collect();
    let table = SweepTable::new("bbm_heat")
        .meta("kernel", kernel.name())
        .meta("p", p)
        .meta("sigma_target", sigma_target)
        .meta("beta_star", beta)
        .meta("level", measure.level())
        .meta("window", opts.window.describe())
        .meta("c_ke", c_ke);
    let upper = 2.0 * beta / p * reference.sup * UPPER_MARGIN;
    let lower = if c_ke.is_finite() { reference.sup / (p * c_ke) } else { 0.0 };
    Ok(finish(table, rows, reference.sup, reference.ks, upper, lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;
    use crate::heat::GaussWeierstrass;

    fn interval(m: usize) -> (VertexGraph, DiscreteMeasure) {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), m).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        (g, mu)
    }

    #[test]
    fn constant_sweeps_vanish() {
        let (g, mu) = interval(8);
        let u = FunctionOnVertices::constant(&g, 1.0);
        let t = bbm_sweep_besov(&g, &mu, &u, 2.0, 1.0, &[0.1, 0.05], 5, &ProfileOptions::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.get("value") == Some(0.0) && r.has_flag("vacuous")));
        let k = KernelModel::GaussWeierstrass(GaussWeierstrass { dim: 1 });
        let t = bbm_sweep_heat(&g, &mu, &u, 2.0, 1.0, &[0.1], &k, 5, &ProfileOptions::default()).unwrap();
        assert_eq!(t.rows[0].get("value"), Some(0.0));
    }

    #[test]
    fn interval_besov_sweep_is_bounded() {
        let (g, mu) = interval(12);
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let t = bbm_sweep_besov(&g, &mu, &u, 2.0, 1.0, &[0.1, 0.05, 0.02], 8, &ProfileOptions::default()).unwrap();
        assert_eq!(t.metadata["pass_upper"], "true");
        assert_eq!(t.rows[0].id, "gap0.1");
        for r in &t.rows {
            assert!(r.get("window_part").unwrap() <= r.get("value").unwrap());
        }
    }

    #[test]
    fn rejects_sigma_below_alpha_over_p() {
        let (g, mu) = interval(6);
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        assert!(bbm_sweep_besov(&g, &mu, &u, 2.0, 1.0, &[0.6], 3, &ProfileOptions::default()).is_err());
    }
}
