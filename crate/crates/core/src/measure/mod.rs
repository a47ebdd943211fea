//! Discrete measures `μ_m^F`, exact-boundary ball queries and α-regularity
//! diagnostics.

mod ball;
mod pairs;

pub use ball::{BallIndex, Radius};
pub use pairs::shell_bins;

use num::BigRational;

use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::lab::{SweepRow, SweepTable};

/// `μ_k^F = Σ_f |V_k|^{-1} Σ_{a∈V_k} δ_{f(a)}`: a vertex weighs its tile
/// multiplicity over `|V_k|`.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    level: usize,
    denominator: usize,
    multiplicity: Vec<u32>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn mu_m(graph: &VertexGraph) -> Self {
        Self::at_level(graph, graph.level()).expect("graph level is always valid")
    }

    /// The measure on `V_k^F` for `k ≤ m`.
    pub fn at_level(graph: &VertexGraph, k: usize) -> Result<Self> {
        if k > graph.level() {
            return Err(Error::LevelTooDeep { requested: k, built: graph.level() });
        }
        let count = graph.vertex_count(k);
        let denominator = graph.tile_vertex_count(k);
        let multiplicity = graph.multiplicity()[..count].to_vec();
        let weights = multiplicity.iter().map(|&m| m as f64 / denominator as f64).collect();
        Ok(DiscreteMeasure { level: k, denominator, multiplicity, weights })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.weights[id]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_exact(&self, id: usize) -> BigRational {
        BigRational::new(self.multiplicity[id].into(), self.denominator.into())
    }

    pub fn total_mass_exact(&self) -> BigRational {
        let total: u64 = self.multiplicity.iter().map(|&m| m as u64).sum();
        BigRational::new(total.into(), self.denominator.into())
    }

    pub fn total_mass(&self) -> f64 {
        crate::fractal::rational_to_f64(&self.total_mass_exact())
    }

    /// `(Σ w |u|^p)^{1/p}`; `p = ∞` gives the max over the support.
    pub fn lp_norm(&self, u: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return u[..self.len()].iter().fold(0.0, |m, x| m.max(x.abs()));
        }
        let s = crate::sum::kahan_sum(self.weights.iter().zip(u).map(|(w, x)| w * x.abs().powf(p)));
        s.powf(1.0 / p)
    }
}

/// `μ(B(x, r)) / r^α` over sampled centers, one row per radius. The table
/// metadata carries the overall spread `max/min`, the empirical `C²`.
pub fn alpha_regularity_report(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    radii: &[f64],
    max_centers: usize,
) -> Result<SweepTable> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("radii must be positive and finite".into()));
    }
    let alpha = graph.ifs().alpha();
    let count = measure.len();
    let index = BallIndex::for_level(graph, measure.level());
    let stride = count.div_ceil(max_centers.max(1)).max(1);
    let centers: Vec<usize> = (0..count).step_by(stride).collect();
    let mut table = SweepTable::new("alpha_regularity")
        .meta("fractal", graph.name())
        .meta("level", measure.level())
        .meta("alpha", alpha)
        .meta("centers", centers.len());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &r in radii {
        let radius = Radius::new(r)?;
        let (mut rmin, mut rmax, mut under) = (f64::INFINITY, 0.0f64, 0usize);
        for &x in &centers {
            let mut mass = 0.0;
            let mut hits = 0usize;
            index.for_each_in_ball(x, &radius, |y, _| {
                mass += measure.weight(y);
                hits += 1;
            });
            if hits <= 1 {
                under += 1;
                continue;
            }
            let ratio = mass / r.powf(alpha);
            rmin = rmin.min(ratio);
            rmax = rmax.max(ratio);
        }
        let mut row = SweepRow::new(format!("r={r}"))
            .param("r", r)
            .output("min_ratio", rmin)
            .output("max_ratio", rmax)
            .output("spread", rmax / rmin)
            .output("under_resolved", under as f64);
        if under > 0 {
            row = row.flag("under-resolved");
        }
        if rmin.is_finite() {
            lo = lo.min(rmin);
            hi = hi.max(rmax);
        }
        table.push(row);
    }
    table.set_meta("spread", hi / lo);
    Ok(table)
}
