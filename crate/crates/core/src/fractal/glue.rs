use std::collections::HashSet;

use num::{BigRational, One};

use super::ifs::IfsSpec;
use super::point::Point;
use super::word::Word;
use crate::error::{Error, Result};

/// A finite family of translations `x ↦ x + τ`; the tiles of `K^F` are
/// the translates `K + τ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlueSet {
    translations: Vec<Point>,
}

impl GlueSet {
    pub fn identity(dim: usize) -> Self {
        GlueSet { translations: vec![Point::zero(dim)] }
    }

    /// Deduplicates while keeping first-appearance order.
    pub fn new(translations: Vec<Point>) -> Result<Self> {
        if translations.is_empty() {
            return Err(Error::InvalidGlue("empty glue set".into()));
        }
        let dim = translations[0].dim();
        if translations.iter().any(|t| t.dim() != dim) {
            return Err(Error::InvalidGlue("translations of mixed dimension".into()));
        }
        let mut seen = HashSet::new();
        let translations = translations.into_iter().filter(|t| seen.insert(t.clone())).collect();
        Ok(GlueSet { translations })
    }

    /// Translations of the level-`l` blow-up `K_l = ρ^{−l} K`:
    /// `Σ_{j=1..l} ρ^{−j} (1 − ρ) b_{c_j}` over all choices of centers.
    /// The word `1…1` comes first, so tile 0 is `K` itself.
    pub fn blowup(ifs: &IfsSpec, l: usize) -> Result<Self> {
        if !ifs.maps()[0].center().is_origin() {
            return Err(Error::BlowupOrigin);
        }
        let inv = BigRational::one() / ifs.rho();
        let taus: Vec<Point> = ifs.maps().iter().map(|m| m.translation()).collect();
        let mut out = Vec::new();
        for w in Word::all(l, ifs.n_maps()) {
            let mut acc = Point::zero(ifs.dim());
            let mut scale = BigRational::one();
            for &c in w.letters() {
                scale *= &inv;
                acc = taus[c as usize - 1].scale_add(&scale, &acc);
            }
            out.push(acc);
        }
        GlueSet::new(out)
    }

    pub fn translations(&self) -> &[Point] {
        &self.translations
    }

    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.translations[0].dim()
    }
}
