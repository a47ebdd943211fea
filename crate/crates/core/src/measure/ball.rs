use num::BigRational;

use crate::error::{Error, Result};
use crate::fractal::{rational_to_f64, Point, VertexGraph};

/// Distances this close to the radius are decided in exact arithmetic.
const GUARD: f64 = 1.0 / (1u64 << 40) as f64;

/// An open-ball radius, optionally with its exact square.
#[derive(Clone, Debug)]
pub struct Radius {
    value: f64,
    squared: Option<BigRational>,
}

impl Radius {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
        }
        Ok(Radius { value: r, squared: None })
    }

    /// The radius `√r2` for an exact positive rational `r2`.
    pub fn from_squared(r2: BigRational) -> Self {
        Radius { value: rational_to_f64(&r2).sqrt(), squared: Some(r2) }
    }

    /// `c · ρ^n` given `c²` exactly.
    pub fn scaled_power(c2: &BigRational, rho: &BigRational, n: usize) -> Self {
        let rho2 = rho * rho;
        Self::from_squared(c2 * num::pow(rho2, n))
    }

    /// `ρ^n`.
    pub fn power(rho: &BigRational, n: usize) -> Self {
        Self::from_squared(num::pow(rho * rho, n))
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn squared(&self) -> Option<&BigRational> {
        self.squared.as_ref()
    }

    /// `d < r` for a pair at float distance² `d2`; `exact` supplies the
    /// exact distance² when the comparison falls inside the guard band.
    #[inline]
    pub fn contains(&self, d2: f64, exact: impl FnOnce() -> Option<BigRational>) -> bool {
        self.contains_dist(d2.sqrt(), d2, exact)
    }

    /// As [`Self::contains`] with `d = √d2` already known.
    #[inline]
    pub fn contains_dist(&self, d: f64, d2: f64, exact: impl FnOnce() -> Option<BigRational>) -> bool {
        if (d - self.value).abs() >= GUARD {
            return d < self.value;
        }
        match (&self.squared, exact()) {
            (Some(r2), Some(e)) => e < *r2,
            _ => d2 < self.value * self.value,
        }
    }
}

/// Uniform bucket grid over the first `count` vertices of a graph.
#[derive(Clone, Debug)]
pub struct BallIndex<'g> {
    graph: &'g VertexGraph,
    count: usize,
    h: f64,
    origin: Vec<f64>,
    shape: Vec<usize>,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl<'g> BallIndex<'g> {
    /// Index with bucket width about `h` (widened if the grid would be
    /// much larger than the point count).
    pub fn new(graph: &'g VertexGraph, count: usize, h: f64) -> Self {
        let d = graph.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for id in 0..count {
            for (j, x) in graph.coord(id).iter().enumerate() {
                lo[j] = lo[j].min(*x);
                hi[j] = hi[j].max(*x);
            }
        }
        let extent: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(0.0)).collect();
        let mut h = if h > 0.0 { h } else { 1.0 };
        let cap = 4 * count + 16;
        let shape_for = |h: f64| -> Vec<usize> { extent.iter().map(|e| (e / h).floor() as usize + 1).collect() };
        let mut shape = shape_for(h);
        while shape.iter().product::<usize>() > cap {
            h *= 2.0;
            shape = shape_for(h);
        }
        let ncell: usize = shape.iter().product();
        let mut counts = vec![0u32; ncell + 1];
        let flat: Vec<usize> = (0..count)
            .map(|id| {
                let c = flatten(&cell_index(graph.coord(id), &lo, h, &shape), &shape);
                counts[c + 1] += 1;
                c
            })
            .collect();
        for i in 0..ncell {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0u32; count];
        for (id, &c) in flat.iter().enumerate() {
            items[fill[c] as usize] = id as u32;
            fill[c] += 1;
        }
        BallIndex { graph, count, h, origin: lo, shape, starts, items }
    }

    /// Index over `V_k^F` with buckets about two level-`k` cells wide.
    pub fn for_level(graph: &'g VertexGraph, k: usize) -> Self {
        let h = 2.0 * graph.ifs().rho_f64().powi(k as i32);
        Self::new(graph, graph.vertex_count(k), h)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn graph(&self) -> &'g VertexGraph {
        self.graph
    }

    /// Calls `f(y, d²)` for every indexed `y` with `|x − y| < r`, where `x` is
    /// a vertex of the graph (exact boundary decisions).
    pub fn for_each_in_ball<F: FnMut(usize, f64)>(&self, x: usize, r: &Radius, f: F) {
        let px = self.graph.point(x);
        self.scan(self.graph.coord(x), Some(px), r, f)
    }

    /// As [`Self::for_each_in_ball`] for an arbitrary float centre.
    pub fn for_each_near_point<F: FnMut(usize, f64)>(&self, x: &[f64], r: &Radius, f: F) {
        self.scan(x, None, r, f)
    }

    pub fn query_vertex(&self, x: usize, r: &Radius) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in_ball(x, r, |y, _| out.push(y));
        out.sort_unstable();
        out
    }

    pub fn query_point(&self, x: &[f64], r: &Radius) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_near_point(x, r, |y, _| out.push(y));
        out.sort_unstable();
        out
    }

    /// Candidate buckets, then exact-guarded filtering.
    fn scan<F: FnMut(usize, f64)>(&self, x: &[f64], exact: Option<&Point>, r: &Radius, mut f: F) {
        let d = x.len();
        let rv = r.value() + GUARD;
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        for j in 0..d {
            let a = ((x[j] - rv - self.origin[j]) / self.h).floor();
            let b = ((x[j] + rv - self.origin[j]) / self.h).floor();
            if b < 0.0 || a > (self.shape[j] - 1) as f64 {
                return;
            }
            lo[j] = a.max(0.0) as usize;
            hi[j] = (b as usize).min(self.shape[j] - 1);
        }
        let mut idx = lo.clone();
        loop {
            let c = flatten(&idx, &self.shape);
            for &y in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                let y = y as usize;
                let py = self.graph.coord(y);
                let d2: f64 = x.iter().zip(py).map(|(a, b)| (a - b) * (a - b)).sum();
                if r.contains(d2, || exact.map(|p| p.dist2(self.graph.point(y)))) {
                    f(y, d2);
                }
            }
            // odometer over the bucket box
            let mut j = 0;
            loop {
                if j == d {
                    return;
                }
                if idx[j] < hi[j] {
                    idx[j] += 1;
                    break;
                }
                idx[j] = lo[j];
                j += 1;
            }
        }
    }
}

fn cell_index(x: &[f64], origin: &[f64], h: f64, shape: &[usize]) -> Vec<usize> {
    x.iter()
        .zip(origin)
        .zip(shape)
        .map(|((x, o), s)| (((x - o) / h).floor().max(0.0) as usize).min(s - 1))
        .collect()
}

fn flatten(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).rev().fold(0, |acc, (i, s)| acc * s + i)
}
