use std::collections::{HashMap, HashSet};

use num::{BigRational, One, Signed};
use serde::{Deserialize, Serialize};

use super::point::{format_rational, parse_rational, rational_to_f64, Point};
use super::word::Word;
use crate::error::{Error, Result};

/// Default depth of the finite-level p.c.f. check.
pub const PCF_CHECK_LEVEL: usize = 3;

/// `x ↦ ρ(x − b) + b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Similitude {
    ratio: BigRational,
    center: Point,
}

impl Similitude {
    pub fn new(ratio: BigRational, center: Point) -> Result<Self> {
        if !ratio.is_positive() || ratio > BigRational::one() {
            return Err(Error::InvalidIfs(format!(
                "ratio {} outside (0, 1]",
                format_rational(&ratio)
            )));
        }
        Ok(Similitude { ratio, center })
    }

    pub fn ratio(&self) -> &BigRational {
        &self.ratio
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    /// The translation part `(1 − ρ) b`.
    pub fn translation(&self) -> Point {
        self.center.scale(&(BigRational::one() - &self.ratio))
    }

    pub fn apply(&self, x: &Point) -> Point {
        x.sub(&self.center).scale_add(&self.ratio, &self.center)
    }
}

/// The one-step refinement pattern of a cell: the points of `V_1` (with
/// `V_0` first, in boundary order) and, for each map `i`, the template
/// indices of `φ_i(V_0)`.
#[derive(Clone, Debug)]
pub struct Template {
    pub points: Vec<Point>,
    pub children: Vec<Vec<usize>>,
    /// For every template index `t ≥ |V_0|`, one `(child, slot)` realising it.
    pub interior_source: Vec<(usize, usize)>,
}

impl Template {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A validated homogeneous p.c.f. iterated function system.
#[derive(Clone, Debug)]
pub struct IfsSpec {
    name: String,
    maps: Vec<Similitude>,
    boundary: Vec<Point>,
    rho: BigRational,
    alpha: f64,
    template: Template,
}

/// Serialised form of an [`IfsSpec`]; rationals are written as `"p/q"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IfsDescription {
    pub name: String,
    pub maps: Vec<MapDescription>,
    pub boundary: Vec<Point>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapDescription {
    pub ratio: String,
    pub center: Point,
}

impl IfsSpec {
    pub const CATALOG: [&'static str; 3] = ["interval", "sierpinski", "vicsek"];

    pub fn new(name: impl Into<String>, maps: Vec<Similitude>, boundary: Vec<Point>) -> Result<Self> {
        Self::with_check_level(name, maps, boundary, PCF_CHECK_LEVEL)
    }

    pub fn with_check_level(
        name: impl Into<String>,
        maps: Vec<Similitude>,
        boundary: Vec<Point>,
        check_level: usize,
    ) -> Result<Self> {
        let name = name.into();
        if maps.len() < 2 {
            return Err(Error::InvalidIfs(format!("need N ≥ 2 maps, got {}", maps.len())));
        }
        if boundary.is_empty() {
            return Err(Error::InvalidIfs("boundary V_0 is empty".into()));
        }
        let dim = maps[0].center.dim();
        if dim == 0
            || maps.iter().any(|m| m.center.dim() != dim)
            || boundary.iter().any(|b| b.dim() != dim)
        {
            return Err(Error::InvalidIfs("inconsistent dimensions".into()));
        }
        let rho = maps[0].ratio.clone();
        if maps.iter().any(|m| m.ratio != rho) {
            let rs: Vec<String> = maps.iter().map(|m| format_rational(&m.ratio)).collect();
            return Err(Error::Homogeneity(rs.join(", ")));
        }
        if rho >= BigRational::one() {
            return Err(Error::InvalidIfs("ratio must be < 1".into()));
        }
        let distinct: HashSet<&Point> = boundary.iter().collect();
        if distinct.len() != boundary.len() {
            return Err(Error::InvalidIfs("repeated boundary point".into()));
        }
        let template = build_template(&maps, &boundary)?;
        let rho_f = rational_to_f64(&rho);
        let alpha = -(maps.len() as f64).ln() / rho_f.ln();
        let spec = IfsSpec { name, maps, boundary, rho, alpha, template };
        spec.check_pcf(check_level)?;
        Ok(spec)
    }

    pub fn catalog(name: &str) -> Result<Self> {
        let half = BigRational::new(1.into(), 2.into());
        let third = BigRational::new(1.into(), 3.into());
        let sim = |r: &BigRational, c: &[i64]| Similitude::new(r.clone(), Point::from_ints(c));
        match name {
            "interval" => IfsSpec::new(
                "interval",
                vec![sim(&half, &[0])?, sim(&half, &[1])?],
                vec![Point::from_ints(&[0]), Point::from_ints(&[1])],
            ),
            "sierpinski" => {
                let corners = [[0, 0], [1, 0], [0, 1]];
                IfsSpec::new(
                    "sierpinski",
                    corners.iter().map(|c| sim(&half, c)).collect::<Result<_>>()?,
                    corners.iter().map(|c| Point::from_ints(c)).collect(),
                )
            }
            "vicsek" => {
                let corners = [[0, 0], [1, 0], [1, 1], [0, 1]];
                let mut maps: Vec<Similitude> =
                    corners.iter().map(|c| sim(&third, c)).collect::<Result<_>>()?;
                maps.push(Similitude::new(third.clone(), Point::parse(&["1/2", "1/2"])?)?);
                IfsSpec::new("vicsek", maps, corners.iter().map(|c| Point::from_ints(c)).collect())
            }
            other => Err(Error::UnknownFractal(other.to_string())),
        }
    }

    pub fn from_description(d: &IfsDescription) -> Result<Self> {
        let maps = d
            .maps
            .iter()
            .map(|m| Similitude::new(parse_rational(&m.ratio)?, m.center.clone()))
            .collect::<Result<_>>()?;
        IfsSpec::new(d.name.clone(), maps, d.boundary.clone())
    }

    pub fn description(&self) -> IfsDescription {
        IfsDescription {
            name: self.name.clone(),
            maps: self
                .maps
                .iter()
                .map(|m| MapDescription { ratio: format_rational(&m.ratio), center: m.center.clone() })
                .collect(),
            boundary: self.boundary.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn dim(&self) -> usize {
        self.boundary[0].dim()
    }

    pub fn rho(&self) -> &BigRational {
        &self.rho
    }

    pub fn rho_f64(&self) -> f64 {
        rational_to_f64(&self.rho)
    }

    /// Hausdorff dimension `α = −log N / log ρ`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    /// `F_w(x) = φ_{w_1} ∘ … ∘ φ_{w_n}(x)`.
    pub fn apply_word(&self, w: &Word, x: &Point) -> Point {
        w.letters()
            .iter()
            .rev()
            .fold(x.clone(), |acc, &l| self.maps[l as usize - 1].apply(&acc))
    }

    /// `V_L = ∪_{|w|=L} F_w(V_0)` in first-appearance order (V_0 first).
    pub fn level_points(&self, level: usize) -> Vec<Point> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for k in 0..=level {
            for w in Word::all(k, self.n_maps()) {
                for b in &self.boundary {
                    let p = self.apply_word(&w, b);
                    if seen.insert(p.clone()) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// For `i ≠ j`: `φ_i(V_L) ∩ φ_j(V_L) ⊆ φ_i(V_0) ∩ φ_j(V_0)`.
    pub fn check_pcf(&self, level: usize) -> Result<()> {
        let vl = self.level_points(level);
        let images: Vec<HashSet<Point>> = self
            .maps
            .iter()
            .map(|m| vl.iter().map(|p| m.apply(p)).collect())
            .collect();
        let bimages: Vec<HashSet<Point>> = self
            .maps
            .iter()
            .map(|m| self.boundary.iter().map(|p| m.apply(p)).collect())
            .collect();
        for i in 0..self.n_maps() {
            for j in i + 1..self.n_maps() {
                for p in images[i].intersection(&images[j]) {
                    if !(bimages[i].contains(p) && bimages[j].contains(p)) {
                        return Err(Error::Pcf(format!(
                            "cells {} and {} share {:?}, which is not a boundary image of both",
                            i + 1,
                            j + 1,
                            p
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn build_template(maps: &[Similitude], boundary: &[Point]) -> Result<Template> {
    let mut index: HashMap<Point, usize> = HashMap::new();
    let mut points = Vec::new();
    for b in boundary {
        index.insert(b.clone(), points.len());
        points.push(b.clone());
    }
    let mut children = Vec::with_capacity(maps.len());
    for m in maps {
        let mut slots = Vec::with_capacity(boundary.len());
        for b in boundary {
            let p = m.apply(b);
            let next = points.len();
            let t = *index.entry(p.clone()).or_insert_with(|| {
                points.push(p);
                next
            });
            slots.push(t);
        }
        children.push(slots);
    }
    // V_0 ⊂ V_1: every boundary point must be an image of a boundary point
    for (t, b) in boundary.iter().enumerate() {
        let hit = children.iter().any(|slots| slots.contains(&t));
        if !hit {
            return Err(Error::Pcf(format!(
                "boundary point {b:?} has no symbolic preimage (V_0 ⊄ V_1)"
            )));
        }
    }
    let mut interior_source = Vec::new();
    for t in boundary.len()..points.len() {
        let src = children
            .iter()
            .enumerate()
            .find_map(|(i, slots)| slots.iter().position(|&s| s == t).map(|j| (i, j)))
            .expect("every template point comes from some child");
        interior_source.push(src);
    }
    Ok(Template { points, children, interior_source })
}
