//! The finite stand-in for liminf/limsup: min/max over the deepest
//! resolved grid levels.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// Number of deepest grid levels used.
    pub len: usize,
    /// A radius `r` is resolved on a level-`m` graph when
    /// `1 − ρ^m / r ≥ min_resolved_fraction`.
    pub min_resolved_fraction: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window { len: 3, min_resolved_fraction: 0.9 }
    }
}

impl Window {
    pub fn new(len: usize) -> Self {
        Window { len, ..Default::default() }
    }

    /// Largest grid index `n` with `ρ^n` resolved at graph level `m`, if any.
    pub fn resolved_max(&self, rho: f64, m: usize) -> Option<usize> {
        (0..=m).rev().find(|&n| self.resolved_fraction(rho, m, n) >= self.min_resolved_fraction)
    }

    pub fn resolved_fraction(&self, rho: f64, m: usize, n: usize) -> f64 {
        1.0 - rho.powi(m as i32 - n as i32)
    }

    /// The window's indices within `0..=n_last`.
    pub fn indices(&self, n_last: usize) -> std::ops::RangeInclusive<usize> {
        let start = (n_last + 1).saturating_sub(self.len);
        start..=n_last
    }

    pub fn describe(&self) -> String {
        format!(
            "last {} grid levels with resolved fraction >= {}",
            self.len, self.min_resolved_fraction
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_resolution_margin() {
        let w = Window::default();
        assert_eq!(w.resolved_max(0.5, 10), Some(6));
        assert_eq!(w.resolved_max(1.0 / 3.0, 10), Some(7));
        assert_eq!(w.resolved_max(0.5, 3), None);
        assert_eq!(w.indices(6), 4..=6);
        assert_eq!(w.indices(1), 0..=1);
    }
}
