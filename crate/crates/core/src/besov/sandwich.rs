use std::ops::RangeInclusive;

use super::balls::{ball_sums, BallNormalization};
use crate::energy::{EnergySequence, FunctionOnVertices};
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::lab::{SweepRow, SweepTable};
use crate::measure::{DiscreteMeasure, Radius};
use crate::window::Window;

fn spread(v: &[f64]) -> f64 {
    let f: Vec<f64> = v.iter().cloned().filter(|x| x.is_finite() && *x > 0.0).collect();
    if f.is_empty() {
        return f64::NAN;
    }
    f.iter().cloned().fold(0.0, f64::max) / f.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Compares vertex energies with ball energies in both directions:
/// `lower_n = ρ^{−n(pσ+α)} I_{m,n} / sup_{k≥n} 𝓔_k` and
/// `upper_n = 𝓔_n / sup_{k≥0} Φ(ρ^{n+k})`, where the sups run over the
/// built levels. `I_{∞,n}` is replaced by `I_{m,n}`; the `cauchy` column
/// is its relative change from `m − 1` to `m`.
pub fn sandwich_check_vertex_besov(
    graph: &VertexGraph,
    u: &FunctionOnVertices,
    p: f64,
    sigma: f64,
    n_range: RangeInclusive<usize>,
) -> Result<SweepTable> {
    let m = u.level().min(graph.level());
    if m < 2 {
        return Err(Error::LevelTooDeep { requested: 2, built: m });
    }
    if *n_range.end() >= m {
        return Err(Error::LevelTooDeep { requested: n_range.end() + 1, built: m });
    }
    let ifs = graph.ifs();
    let (rho, alpha) = (ifs.rho_f64(), ifs.alpha());
    let seq = EnergySequence::up_to(graph, u, p, sigma, m)?;
    let mu = DiscreteMeasure::at_level(graph, m)?;
    let mu_prev = DiscreteMeasure::at_level(graph, m - 1)?;
    let u_prev = u.restrict(graph, m - 1)?;
    let ns: Vec<usize> = n_range.clone().collect();
    let gap_radii: Vec<Radius> = ns.iter().map(|&n| Radius::scaled_power(&graph.gap().squared, ifs.rho(), n)).collect();
    let i_m = ball_sums(graph, &mu, u, p, &gap_radii, BallNormalization::AlphaRegular)?;
    let i_prev = ball_sums(graph, &mu_prev, &u_prev, p, &gap_radii, BallNormalization::AlphaRegular)?;
    let grid: Vec<Radius> = (0..m).map(|j| Radius::power(ifs.rho(), j)).collect();
    let grid_sums = ball_sums(graph, &mu, u, p, &grid, BallNormalization::AlphaRegular)?;
    let phi: Vec<f64> = grid_sums
        .iter()
        .enumerate()
        .map(|(j, s)| rho.powf(-(j as f64) * (p * sigma + alpha)) * s)
        .collect();
    let window = Window::default();
    let upper_valid = sigma > alpha / p;
    let mut table = SweepTable::new("sandwich_vertex_besov")
        .meta("p", p)
        .meta("sigma", sigma)
        .meta("level", m)
        .meta("gap_constant", graph.gap().value);
    let (mut lowers, mut uppers) = (Vec::new(), Vec::new());
    for (i, &n) in ns.iter().enumerate() {
        let e_sup = seq.scaled[n..].iter().cloned().fold(0.0, f64::max);
        let phi_sup = phi[n..].iter().cloned().fold(0.0, f64::max);
        let scaled_i = rho.powf(-(n as f64) * (p * sigma + alpha)) * i_m[i];
        let mut row = SweepRow::new(format!("n{n}")).param("n", n as f64);
        let lower = if e_sup > 0.0 { scaled_i / e_sup } else { f64::NAN };
        let upper = if phi_sup > 0.0 { seq.scaled[n] / phi_sup } else { f64::NAN };
        if e_sup == 0.0 && phi_sup == 0.0 {
            row = row.flag("vacuous");
        }
        if !upper_valid {
            row = row.flag("sigma_below_alpha_over_p");
        }
        if window.resolved_fraction(rho, m, n) < window.min_resolved_fraction {
            row = row.flag("under_resolved");
        }
        let cauchy = if i_m[i] > 0.0 { (i_m[i] - i_prev[i]).abs() / i_m[i] } else { 0.0 };
        lowers.push(lower);
        uppers.push(upper);
        table.push(
            row.output("ball_energy", i_m[i])
                .output("scaled_ball_energy", scaled_i)
                .output("sup_vertex_energy", e_sup)
                .output("sup_phi", phi_sup)
                .output("lower_ratio", lower)
                .output("upper_ratio", upper)
                .output("cauchy", cauchy),
        );
    }
    let fmax = |v: &[f64]| v.iter().cloned().filter(|x| x.is_finite()).fold(f64::NAN, f64::max);
    table.set_meta("max_lower_ratio", fmax(&lowers));
    table.set_meta("max_upper_ratio", fmax(&uppers));
    table.set_meta("spread_lower", spread(&lowers));
    table.set_meta("spread_upper", spread(&uppers));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    #[test]
    fn interval_linear_bounded() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 9).unwrap();
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let t = sandwich_check_vertex_besov(&g, &u, 2.0, 1.0, 1..=5).unwrap();
        let s1: f64 = t.metadata["spread_lower"].parse().unwrap();
        let s2: f64 = t.metadata["spread_upper"].parse().unwrap();
        assert!(s1 < 10.0 && s2 < 10.0, "{s1} {s2}");
    }

    #[test]
    fn constant_vacuous() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 4).unwrap();
        let u = FunctionOnVertices::constant(&g, 1.0);
        let t = sandwich_check_vertex_besov(&g, &u, 2.0, 1.2, 1..=2).unwrap();
        assert!(t.rows.iter().all(|r| r.has_flag("vacuous")));
    }
}
