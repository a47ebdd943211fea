use serde::{Deserialize, Serialize};

use crate::energy::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::measure::{shell_bins, BallIndex, DiscreteMeasure, Radius};
use crate::sum::{par_sum_bins, pow_p};
use crate::window::Window;

/// How the inner ball integral is normalised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallNormalization {
    /// Divide by `r^α` (the α-regular rewrite).
    #[default]
    AlphaRegular,
    /// Divide by the empirical mass `μ(B(x, r))`.
    Empirical,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhiValue {
    pub value: f64,
    pub resolved: bool,
}

fn check_inputs(graph: &VertexGraph, measure: &DiscreteMeasure, u: &FunctionOnVertices, p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p must be at least 1, got {p}")));
    }
    if u.level() < measure.level() {
        return Err(Error::LevelTooDeep { requested: measure.level(), built: u.level() });
    }
    if measure.level() > graph.level() {
        return Err(Error::LevelTooDeep { requested: measure.level(), built: graph.level() });
    }
    Ok(())
}

/// For each radius, `∫∫_{d(x,y)<r} |u(x) − u(y)|^p dμ(y) dμ(x)`; under
/// [`BallNormalization::Empirical`] the inner integral is divided by
/// `μ(B(x, r))`. The measure's level decides which vertices take part.
/// All radii are handled in one pass over pairs.
pub fn ball_sums(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    radii: &[Radius],
    normalization: BallNormalization,
) -> Result<Vec<f64>> {
    check_inputs(graph, measure, u, p)?;
    if radii.is_empty() {
        return Ok(vec![]);
    }
    // sort descending, remembering where every input radius went
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[b].value().total_cmp(&radii[a].value()));
    let mut sorted: Vec<Radius> = Vec::new();
    let mut slot = vec![0usize; radii.len()];
    for &i in &order {
        let same = sorted.last().is_some_and(|l: &Radius| match (l.squared(), radii[i].squared()) {
            (Some(a), Some(b)) => a == b,
            _ => l.value() == radii[i].value(),
        });
        if !same {
            sorted.push(radii[i].clone());
        }
        slot[i] = sorted.len() - 1;
    }
    let k = sorted.len();
    let count = graph.vertex_count(measure.level());
    let index = BallIndex::new(graph, count, 2.0 * graph.ifs().rho_f64().powi(measure.level() as i32));
    let vals = u.values();
    let w = measure.weights();
    let bins = par_sum_bins(count, k, |x, acc| {
        let mut diff = vec![0.0; k];
        let mut mass = vec![0.0; k];
        let ux = vals[x];
        shell_bins(&index, &sorted, x, |y, j, _| {
            diff[j] += w[y] * pow_p((ux - vals[y]).abs(), p);
            mass[j] += w[y];
        });
        // suffix sums: shell j feeds every ball j' ≤ j
        for j in (0..k - 1).rev() {
            diff[j] += diff[j + 1];
            mass[j] += mass[j + 1];
        }
        for j in 0..k {
            let inner = match normalization {
                BallNormalization::AlphaRegular => diff[j],
                BallNormalization::Empirical => diff[j] / mass[j],
            };
            acc[j].add(w[x] * inner);
        }
    });
    Ok(slot.iter().map(|&s| bins[s]).collect())
}

/// `Φ_u^σ(r) = r^{−pσ−α} ∫∫_{B(x,r)} |u(x) − u(y)|^p dμ dμ` (α-regular) or
/// `r^{−pσ} ∫ μ(B(x,r))^{-1} ∫_{B(x,r)} … dμ dμ` (empirical).
pub fn besov_phi(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    sigma: f64,
    r: &Radius,
    normalization: BallNormalization,
) -> Result<PhiValue> {
    let s = ball_sums(graph, measure, u, p, std::slice::from_ref(r), normalization)?[0];
    let rho = graph.ifs().rho_f64();
    let resolved = 1.0 - rho.powi(measure.level() as i32) / r.value() >= Window::default().min_resolved_fraction;
    Ok(PhiValue { value: phi_scale(r.value(), p, sigma, graph.ifs().alpha(), normalization) * s, resolved })
}

pub(crate) fn phi_scale(r: f64, p: f64, sigma: f64, alpha: f64, normalization: BallNormalization) -> f64 {
    match normalization {
        BallNormalization::AlphaRegular => r.powf(-(p * sigma + alpha)),
        BallNormalization::Empirical => r.powf(-p * sigma),
    }
}

/// `I_{m,n}^F(u)`: the ball sum at radius `C_H ρ^n` under `μ_m`, with `m`
/// the measure's level.
pub fn ball_energy(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    n: usize,
) -> Result<f64> {
    if n > measure.level() {
        return Err(Error::LevelTooDeep { requested: n, built: measure.level() });
    }
    let r = Radius::scaled_power(&graph.gap().squared, graph.ifs().rho(), n);
    Ok(ball_sums(graph, measure, u, p, &[r], BallNormalization::AlphaRegular)?[0])
}

/// `I_n^F(u)`: pairs with `ρ^{n+1} ≤ d(x, y) < ρ^n`.
pub fn ring_energy(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    u: &FunctionOnVertices,
    p: f64,
    n: usize,
) -> Result<f64> {
    if n >= measure.level() {
        return Err(Error::LevelTooDeep { requested: n + 1, built: measure.level() });
    }
    let rho = graph.ifs().rho();
    let radii = [Radius::power(rho, n), Radius::power(rho, n + 1)];
    let s = ball_sums(graph, measure, u, p, &radii, BallNormalization::AlphaRegular)?;
    Ok(s[0] - s[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    #[test]
    fn interval_linear_phi_oracle() {
        let rho = IfsSpec::catalog("interval").unwrap();
        // brute force over all vertex pairs
        let brute = |m: usize, r: f64| {
            let n = (1usize << m) + 1;
            let w = 1.0 / n as f64;
            let h = 1.0 / (n - 1) as f64;
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let d = (i as f64 - j as f64).abs() * h;
                    if d < r {
                        s += w * w * d * d;
                    }
                }
            }
            s / r.powi(3)
        };
        for m in [8, 12] {
            let g = VertexGraph::single(&rho, m).unwrap();
            let mu = DiscreteMeasure::mu_m(&g);
            let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
            let r = Radius::power(g.ifs().rho(), 3);
            let phi = besov_phi(&g, &mu, &u, 2.0, 1.0, &r, BallNormalization::AlphaRegular).unwrap();
            let b = brute(m, 0.125);
            assert!((phi.value - b).abs() < 1e-10 * b, "{} vs {b}", phi.value);
            assert!(phi.resolved);
        }
        // continuum value with the boundary loss, 2/3 − r/2, reached as m grows
        let g = VertexGraph::single(&rho, 12).unwrap();
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let r = Radius::power(g.ifs().rho(), 3);
        let phi = besov_phi(&g, &DiscreteMeasure::mu_m(&g), &u, 2.0, 1.0, &r, BallNormalization::AlphaRegular).unwrap();
        let oracle = 2.0 / 3.0 - 0.5 * 0.125;
        assert!((phi.value - oracle).abs() < 0.01 * oracle, "{}", phi.value);
    }

    #[test]
    fn constant_is_zero() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 3).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let u = FunctionOnVertices::constant(&g, 3.0);
        let r = Radius::new(0.3).unwrap();
        for norm in [BallNormalization::AlphaRegular, BallNormalization::Empirical] {
            assert_eq!(besov_phi(&g, &mu, &u, 2.0, 1.0, &r, norm).unwrap().value, 0.0);
        }
    }

    #[test]
    fn rings_telescope_to_balls() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 4).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let u = FunctionOnVertices::from_fn(&g, |x| x[0] * x[0] - 2.0 * x[1]);
        let rho = g.ifs().rho();
        let ball = ball_sums(&g, &mu, &u, 3.0, &[Radius::power(rho, 1)], BallNormalization::AlphaRegular).unwrap()[0];
        let rings: f64 = (1..4).map(|n| ring_energy(&g, &mu, &u, 3.0, n).unwrap()).sum();
        // pairs closer than ρ^4 = spacing are only the diagonal
        let tail = ball_sums(&g, &mu, &u, 3.0, &[Radius::power(rho, 4)], BallNormalization::AlphaRegular).unwrap()[0];
        assert_eq!(tail, 0.0);
        assert!((ball - rings).abs() < 1e-13 * ball);
    }

    #[test]
    fn batched_equals_single() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 4).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let u = FunctionOnVertices::from_fn(&g, |x| (3.0 * x[0]).sin() + x[1]);
        let radii: Vec<Radius> = vec![Radius::new(0.2).unwrap(), Radius::power(g.ifs().rho(), 1), Radius::new(0.01).unwrap()];
        for norm in [BallNormalization::AlphaRegular, BallNormalization::Empirical] {
            let all = ball_sums(&g, &mu, &u, 2.0, &radii, norm).unwrap();
            for (r, v) in radii.iter().zip(&all) {
                let one = ball_sums(&g, &mu, &u, 2.0, std::slice::from_ref(r), norm).unwrap()[0];
                assert!((one - v).abs() <= 1e-14 * one.abs().max(1e-300));
            }
        }
    }
}
