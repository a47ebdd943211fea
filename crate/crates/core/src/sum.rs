//! Compensated summation and deterministic parallel reductions.
//!
//! Work is split into fixed-size chunks independent of the thread count;
//! each chunk is summed with Neumaier's variant of Kahan summation and the
//! chunk totals are combined sequentially in index order. The result is
//! therefore bit-identical for any number of worker threads.

use rayon::prelude::*;

/// Chunk length used by the parallel reductions.
pub const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for Kahan {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = Kahan::new();
        for x in iter {
            k.add(x);
        }
        k
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<Kahan>().value()
}

/// `x^p` with the common integer cases unrolled.
#[inline]
pub fn pow_p(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 3.0 {
        x * x * x
    } else if p == 1.0 {
        x
    } else {
        x.powf(p)
    }
}

/// Σ_{i<n} f(i), deterministic regardless of the rayon pool size.
pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).collect::<Kahan>().value()
        })
        .collect();
    kahan_sum(chunks)
}

/// Vector-valued version of [`par_sum`]: `f(i, acc)` adds item `i`'s
/// contribution into `bins` accumulators.
pub fn par_sum_bins<F>(n: usize, bins: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [Kahan]) + Sync,
{
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut acc = vec![Kahan::new(); bins];
            for i in lo..hi {
                f(i, &mut acc);
            }
            acc.iter().map(Kahan::value).collect()
        })
        .collect();
    let mut total = vec![Kahan::new(); bins];
    for chunk in &chunks {
        for (t, v) in total.iter_mut().zip(chunk) {
            t.add(*v);
        }
    }
    total.iter().map(Kahan::value).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = Kahan::new();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn par_sum_matches_across_pools() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let a = par_sum(10_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| par_sum(10_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
