use serde::Serialize;

use crate::energy::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::measure::{BallIndex, Radius};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MorreyOptions {
    /// Localisation radius; pairs with `d ≥ r0 / 3` are ignored.
    pub r0: f64,
    /// Vertex level whose pairs are sampled (defaults to the function's level).
    pub sample_level: Option<usize>,
}

impl Default for MorreyOptions {
    fn default() -> Self {
        MorreyOptions { r0: 1.0, sample_level: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MorreyFit {
    /// Fitted exponent of the upper envelope `|u(x) − u(y)| ≲ C d^s`.
    pub slope: f64,
    /// `log C`.
    pub intercept: f64,
    /// `(pσ − α)/p`.
    pub expected: f64,
    /// Per distance shell `ρ^{j+1} ≤ d < ρ^j`: `(j, d, max |Δu|)` at the maximising pair.
    pub envelope: Vec<(usize, f64, f64)>,
    pub pairs: usize,
    pub vacuous: bool,
}

/// Least-squares fit of the log upper envelope of `|u(x) − u(y)|` against
/// `log d(x, y)`, one point per `ρ`-adic distance shell.
pub fn morrey_check(
    graph: &VertexGraph,
    u: &FunctionOnVertices,
    p: f64,
    sigma: f64,
    opts: &MorreyOptions,
) -> Result<MorreyFit> {
    let alpha = graph.ifs().alpha();
    if !(sigma > alpha / p) {
        return Err(Error::InvalidParameter(format!("sigma must exceed alpha/p = {}", alpha / p)));
    }
    let level = opts.sample_level.unwrap_or(u.level()).min(u.level());
    let count = graph.vertex_count(level);
    let rho = graph.ifs().rho_f64();
    let index = BallIndex::new(graph, count, 2.0 * rho.powi(level as i32));
    let cut = Radius::new(opts.r0 / 3.0)?;
    let vals = u.values();
    let mut best: Vec<Option<(f64, f64)>> = Vec::new();
    let mut pairs = 0usize;
    for x in 0..count {
        index.for_each_in_ball(x, &cut, |y, d2| {
            if y <= x {
                return;
            }
            pairs += 1;
            let d = d2.sqrt();
            let j = ((d.ln() / rho.ln()).floor().max(0.0)) as usize;
            if best.len() <= j {
                best.resize(j + 1, None);
            }
            let diff = (vals[x] - vals[y]).abs();
            if best[j].is_none_or(|(_, b)| diff > b) {
                best[j] = Some((d, diff));
            }
        });
    }
    let envelope: Vec<(usize, f64, f64)> = best
        .iter()
        .enumerate()
        .filter_map(|(j, b)| b.filter(|&(_, v)| v > 0.0).map(|(d, v)| (j, d, v)))
        .collect();
    let expected = (p * sigma - alpha) / p;
    if envelope.len() < 2 {
        return Ok(MorreyFit { slope: f64::NAN, intercept: f64::NAN, expected, envelope, pairs, vacuous: true });
    }
    let pts: Vec<(f64, f64)> = envelope.iter().map(|&(_, d, v)| (d.ln(), v.ln())).collect();
    let (slope, intercept) = least_squares(&pts);
    Ok(MorreyFit { slope, intercept, expected, envelope, pairs, vacuous: false })
}

pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    #[test]
    fn linear_function_is_lipschitz() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 8).unwrap();
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let fit = morrey_check(&g, &u, 2.0, 1.0, &MorreyOptions::default()).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!((fit.expected - 0.5).abs() < 1e-15);
        assert!(fit.slope >= fit.expected);
    }

    #[test]
    fn constant_vacuous() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 4).unwrap();
        let u = FunctionOnVertices::constant(&g, 1.0);
        assert!(morrey_check(&g, &u, 2.0, 1.0, &MorreyOptions::default()).unwrap().vacuous);
    }
}
