use std::collections::HashMap;
use std::ops::Range;

use num::{BigRational, One};
use serde::Serialize;

use super::glue::GlueSet;
use super::ifs::IfsSpec;
use super::point::{format_rational, rational_to_f64, Point};
use super::word::Word;
use crate::error::{Error, Result};

/// Deepest cell level used when estimating `C_H`.
const GAP_DEPTH: usize = 3;
/// Extra refinement levels used to sample each cell's point set.
const GAP_REFINE: usize = 2;

/// Cells `f(F_w(V_0))` of one level, stored flat: cell `c` occupies
/// `vertices[c·|V_0| .. (c+1)·|V_0|]`. Cells are ordered tile-major and
/// lexicographically by word, so the children of cell `c` at the next
/// level are `c·N .. c·N + N`.
#[derive(Clone, Debug)]
pub struct CellLevel {
    stride: usize,
    tiles: Vec<u32>,
    vertices: Vec<u32>,
}

impl CellLevel {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn cell(&self, c: usize) -> &[u32] {
        &self.vertices[c * self.stride..(c + 1) * self.stride]
    }

    pub fn tile(&self, c: usize) -> usize {
        self.tiles[c] as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.vertices.chunks_exact(self.stride)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JointStats {
    pub level: usize,
    pub max_cells_per_vertex: usize,
    pub max_neighbours_per_cell: usize,
}

/// Empirical separation constant of condition (H).
#[derive(Clone, Debug, Serialize)]
pub struct GapEstimate {
    /// `C_H²` as used by the ball energies (exact).
    #[serde(serialize_with = "ser_rational")]
    pub squared: BigRational,
    pub value: f64,
    /// Smallest scaled gap found, before clamping; `None` when no two
    /// cells of any examined level are disjoint.
    pub measured: Option<f64>,
    pub clamped: bool,
    /// `(level, scaled gap)` for every examined level.
    pub per_level: Vec<(usize, f64)>,
}

fn ser_rational<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

/// The vertex cloud `V_m^F = ∪_{f∈F} f(V_m)` with cell incidence for every
/// level `0..=m`. Ids are assigned level by level, so `V_k^F` is exactly the
/// id range `0..vertex_count(k)`.
#[derive(Clone, Debug)]
pub struct VertexGraph {
    ifs: IfsSpec,
    glue: GlueSet,
    level: usize,
    vertices: Vec<Point>,
    index: HashMap<Point, u32>,
    coords: Vec<f64>,
    level_counts: Vec<usize>,
    tile_vertex_counts: Vec<usize>,
    cells: Vec<CellLevel>,
    multiplicity: Vec<u32>,
    gap: GapEstimate,
    joint: Vec<JointStats>,
}

impl VertexGraph {
    pub fn single(ifs: &IfsSpec, m: usize) -> Result<Self> {
        Self::build(ifs, &GlueSet::identity(ifs.dim()), m)
    }

    pub fn build(ifs: &IfsSpec, glue: &GlueSet, m: usize) -> Result<Self> {
        if glue.dim() != ifs.dim() {
            return Err(Error::InvalidGlue(format!(
                "glue set lives in dimension {}, fractal in {}",
                glue.dim(),
                ifs.dim()
            )));
        }
        let n = ifs.n_maps();
        let v0 = ifs.boundary();
        let stride = v0.len();
        let taus: Vec<Point> = ifs.maps().iter().map(|s| s.translation()).collect();

        let mut index: HashMap<Point, u32> = HashMap::new();
        let mut vertices: Vec<Point> = Vec::new();
        let mut level_counts = Vec::with_capacity(m + 1);
        let mut cells = Vec::with_capacity(m + 1);
        let mut offsets: Vec<Point> = glue.translations().to_vec();
        let mut scale = BigRational::one();
        for k in 0..=m {
            let per_tile = n.pow(k as u32);
            let mut tiles = Vec::with_capacity(offsets.len());
            let mut verts = Vec::with_capacity(offsets.len() * stride);
            for (c, off) in offsets.iter().enumerate() {
                tiles.push((c / per_tile) as u32);
                for b in v0 {
                    let p = b.scale_add(&scale, off);
                    let id = match index.get(&p) {
                        Some(&id) => id,
                        None => {
                            let id = vertices.len() as u32;
                            index.insert(p.clone(), id);
                            vertices.push(p);
                            id
                        }
                    };
                    verts.push(id);
                }
            }
            level_counts.push(vertices.len());
            cells.push(CellLevel { stride, tiles, vertices: verts });
            if k < m {
                let mut next = Vec::with_capacity(offsets.len() * n);
                for off in &offsets {
                    for tau in &taus {
                        next.push(tau.scale_add(&scale, off));
                    }
                }
                offsets = next;
                scale *= ifs.rho();
            }
        }
        let coords: Vec<f64> = vertices.iter().flat_map(|p| p.to_f64()).collect();

        let nv = vertices.len();
        let mut multiplicity = vec![0u32; nv];
        let mut last_tile = vec![u32::MAX; nv];
        let top = &cells[m];
        for c in 0..top.len() {
            let t = top.tiles[c];
            for &v in top.cell(c) {
                if last_tile[v as usize] != t {
                    last_tile[v as usize] = t;
                    multiplicity[v as usize] += 1;
                }
            }
        }
        let mut tile_boundary = vec![0u32; nv];
        for cell in cells[0].iter() {
            for &v in cell {
                tile_boundary[v as usize] += 1;
            }
        }
        for v in 0..nv {
            if multiplicity[v] >= 2 && multiplicity[v] != tile_boundary[v] {
                return Err(Error::JustTouching(format!(
                    "vertex {:?} lies in {} tiles but on the boundary of only {}",
                    vertices[v], multiplicity[v], tile_boundary[v]
                )));
            }
        }

        let mut stamp = vec![usize::MAX; nv];
        let tile_vertex_counts = (0..=m)
            .map(|k| {
                let mut count = 0;
                for c in 0..n.pow(k as u32) {
                    for &v in cells[k].cell(c) {
                        if stamp[v as usize] != k {
                            stamp[v as usize] = k;
                            count += 1;
                        }
                    }
                }
                count
            })
            .collect();

        let components = count_components(nv, &cells[m]);
        if components != 1 {
            return Err(Error::Disconnected { components });
        }

        let joint = (0..=m)
            .map(|k| {
                let mut count = vec![0usize; level_counts[k]];
                for cell in cells[k].iter() {
                    for &v in cell {
                        count[v as usize] += 1;
                    }
                }
                let max_nb = cells[k]
                    .iter()
                    .map(|cell| cell.iter().map(|&v| count[v as usize] - 1).sum::<usize>())
                    .max()
                    .unwrap_or(0);
                JointStats {
                    level: k,
                    max_cells_per_vertex: count.iter().copied().max().unwrap_or(0),
                    max_neighbours_per_cell: max_nb,
                }
            })
            .collect();

        let mut graph = VertexGraph {
            ifs: ifs.clone(),
            glue: glue.clone(),
            level: m,
            vertices,
            index,
            coords,
            level_counts,
            tile_vertex_counts,
            cells,
            multiplicity,
            gap: GapEstimate {
                squared: BigRational::one(),
                value: 1.0,
                measured: None,
                clamped: true,
                per_level: vec![],
            },
            joint,
        };
        graph.gap = graph.estimate_gap();
        Ok(graph)
    }

    pub fn ifs(&self) -> &IfsSpec {
        &self.ifs
    }

    pub fn glue(&self) -> &GlueSet {
        &self.glue
    }

    pub fn name(&self) -> &str {
        self.ifs.name()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.ifs.dim()
    }

    pub fn tile_count(&self) -> usize {
        self.glue.len()
    }

    /// Total number of vertices, i.e. `|V_m^F|`.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `|V_k^F|`; the level-`k` vertices are the ids below this count.
    pub fn vertex_count(&self, k: usize) -> usize {
        self.level_counts[k]
    }

    /// `|V_k|` of a single tile.
    pub fn tile_vertex_count(&self, k: usize) -> usize {
        self.tile_vertex_counts[k]
    }

    pub fn point(&self, id: usize) -> &Point {
        &self.vertices[id]
    }

    pub fn points(&self) -> &[Point] {
        &self.vertices
    }

    pub fn coord(&self, id: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[id * d..(id + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn find(&self, p: &Point) -> Option<usize> {
        self.index.get(p).map(|&i| i as usize)
    }

    pub fn cells(&self, k: usize) -> &CellLevel {
        &self.cells[k]
    }

    pub fn cell_word(&self, k: usize, c: usize) -> Word {
        let per_tile = self.ifs.n_maps().pow(k as u32);
        Word::from_index(c % per_tile, k, self.ifs.n_maps())
    }

    /// Cell indices at level `k+1` refining cell `c` of level `k`.
    pub fn children(&self, c: usize) -> Range<usize> {
        let n = self.ifs.n_maps();
        c * n..(c + 1) * n
    }

    /// Sorted ids of the level-`level` vertices inside cell `c` of level `k`.
    pub fn descendant_vertices(&self, k: usize, c: usize, level: usize) -> Vec<u32> {
        assert!(k <= level && level <= self.level);
        let span = self.ifs.n_maps().pow((level - k) as u32);
        let mut out: Vec<u32> = (c * span..(c + 1) * span)
            .flat_map(|d| self.cells[level].cell(d).iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Number of tiles containing each vertex.
    pub fn multiplicity(&self) -> &[u32] {
        &self.multiplicity
    }

    pub fn gap(&self) -> &GapEstimate {
        &self.gap
    }

    pub fn joint_stats(&self) -> &[JointStats] {
        &self.joint
    }

    pub fn boundary_ids(&self) -> Range<usize> {
        0..self.level_counts[0]
    }

    /// `ρ^m`, the relative size of a level-`m` cell.
    pub fn spacing(&self) -> f64 {
        self.ifs.rho_f64().powi(self.level as i32)
    }

    /// Checks that distinct level-`k` cells meet only in vertices that are
    /// boundary vertices of both, examining all level-`m` vertices.
    pub fn check_just_touching(&self, k: usize) -> Result<()> {
        let mut owners: Vec<Vec<u32>> = vec![Vec::new(); self.len()];
        for c in 0..self.cells[k].len() {
            for v in self.descendant_vertices(k, c, self.level) {
                owners[v as usize].push(c as u32);
            }
        }
        for (v, cs) in owners.iter().enumerate() {
            if cs.len() < 2 {
                continue;
            }
            for &c in cs {
                if !self.cells[k].cell(c as usize).contains(&(v as u32)) {
                    return Err(Error::JustTouching(format!(
                        "level-{k} cells {cs:?} share vertex {:?}, interior to cell {c}",
                        self.vertices[v]
                    )));
                }
            }
        }
        Ok(())
    }

    fn estimate_gap(&self) -> GapEstimate {
        let d = self.dim();
        let rho = self.ifs.rho();
        let mut per_level = Vec::new();
        let mut best: Option<BigRational> = None;
        let mut rho_k2 = BigRational::one();
        for k in 0..=self.level.min(GAP_DEPTH) {
            if k > 0 {
                rho_k2 = &rho_k2 * rho * rho;
            }
            if k == 0 && self.tile_count() == 1 {
                continue;
            }
            let l = (k + GAP_REFINE).min(self.level);
            let level = &self.cells[k];
            let pts: Vec<Vec<u32>> = (0..level.len()).map(|c| self.descendant_vertices(k, c, l)).collect();
            let boxes: Vec<(Vec<f64>, Vec<f64>)> = pts
                .iter()
                .map(|ids| {
                    let mut lo = vec![f64::INFINITY; d];
                    let mut hi = vec![f64::NEG_INFINITY; d];
                    for &v in ids {
                        for (j, x) in self.coord(v as usize).iter().enumerate() {
                            lo[j] = lo[j].min(*x);
                            hi[j] = hi[j].max(*x);
                        }
                    }
                    (lo, hi)
                })
                .collect();
            let mut cur = f64::INFINITY;
            let mut cands: Vec<(u32, u32)> = Vec::new();
            for a in 0..level.len() {
                for b in a + 1..level.len() {
                    let ca = level.cell(a);
                    if level.cell(b).iter().any(|v| ca.contains(v)) {
                        continue;
                    }
                    let lb: f64 = (0..d)
                        .map(|j| {
                            let g = (boxes[a].0[j] - boxes[b].1[j]).max(boxes[b].0[j] - boxes[a].1[j]).max(0.0);
                            g * g
                        })
                        .sum();
                    if lb > cur * (1.0 + 1e-9) {
                        continue;
                    }
                    for &x in &pts[a] {
                        let px = self.coord(x as usize);
                        for &y in &pts[b] {
                            let py = self.coord(y as usize);
                            let d2: f64 = px.iter().zip(py).map(|(u, v)| (u - v) * (u - v)).sum();
                            if d2 < cur * (1.0 - 1e-9) {
                                cur = d2;
                                cands.clear();
                                cands.push((x, y));
                            } else if d2 <= cur * (1.0 + 1e-9) {
                                cands.push((x, y));
                            }
                        }
                    }
                }
            }
            if let Some(exact) = cands
                .iter()
                .map(|&(x, y)| self.vertices[x as usize].dist2(&self.vertices[y as usize]))
                .min()
            {
                let scaled = exact / &rho_k2;
                per_level.push((k, rational_to_f64(&scaled).sqrt()));
                if best.as_ref().is_none_or(|b| scaled < *b) {
                    best = Some(scaled);
                }
            }
        }
        let measured = best.as_ref().map(|b| rational_to_f64(b).sqrt());
        match best {
            Some(b) if b < BigRational::one() => GapEstimate {
                value: rational_to_f64(&b).sqrt(),
                squared: b,
                measured,
                clamped: false,
                per_level,
            },
            _ => {
                // C_H must lie in (0, 1); any value not above the measured gap works
                let squared = BigRational::new(1.into(), 4.into());
                GapEstimate { squared, value: 0.5, measured, clamped: true, per_level }
            }
        }
    }

    pub fn document(&self) -> GraphDocument {
        let mut cells = Vec::new();
        for k in 0..=self.level {
            for c in 0..self.cells[k].len() {
                cells.push(CellDocument {
                    level: k,
                    tile: self.cells[k].tile(c),
                    word: self.cell_word(k, c).to_string(),
                    vertices: self.cells[k].cell(c).to_vec(),
                });
            }
        }
        GraphDocument {
            name: self.name().to_string(),
            level: self.level,
            rho: format_rational(self.ifs.rho()),
            alpha: self.ifs.alpha(),
            tiles: self.glue.translations().iter().map(Point::to_strings).collect(),
            vertices: self.vertices.iter().map(Point::to_strings).collect(),
            level_counts: self.level_counts.clone(),
            cells,
            boundary_ids: self.boundary_ids().map(|i| i as u32).collect(),
            multiplicity: self.multiplicity.clone(),
            gap_constant: self.gap.clone(),
            joint: self.joint.clone(),
        }
    }
}

fn count_components(nv: usize, cells: &CellLevel) -> usize {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for cell in cells.iter() {
        let a = root(&mut parent, cell[0] as usize);
        for &v in &cell[1..] {
            let b = root(&mut parent, v as usize);
            if a != b {
                parent[b] = a;
            }
        }
    }
    (0..nv).filter(|&v| root(&mut parent, v) == v).count()
}

/// JSON form of a [`VertexGraph`].
#[derive(Clone, Debug, Serialize)]
pub struct GraphDocument {
    pub name: String,
    pub level: usize,
    pub rho: String,
    pub alpha: f64,
    pub tiles: Vec<Vec<String>>,
    pub vertices: Vec<Vec<String>>,
    pub level_counts: Vec<usize>,
    pub cells: Vec<CellDocument>,
    pub boundary_ids: Vec<u32>,
    pub multiplicity: Vec<u32>,
    pub gap_constant: GapEstimate,
    pub joint: Vec<JointStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellDocument {
    pub level: usize,
    pub tile: usize,
    pub word: String,
    pub vertices: Vec<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gasket(m: usize) -> VertexGraph {
        VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), m).unwrap()
    }

    #[test]
    fn interval_level_one() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 1).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.cells(1).len(), 2);
        let mut xs: Vec<_> = g.points().to_vec();
        xs.sort();
        assert_eq!(xs, vec![Point::parse(&["0"]).unwrap(), Point::parse(&["1/2"]).unwrap(), Point::parse(&["1"]).unwrap()]);
    }

    #[test]
    fn gasket_counts_match_closed_form() {
        let g = gasket(6);
        for n in 0..=6 {
            assert_eq!(g.vertex_count(n), (3usize.pow(n as u32 + 1) + 3) / 2, "level {n}");
        }
        assert_eq!(g.cells(1).len(), 3);
        assert_eq!(g.vertex_count(1), 6);
    }

    #[test]
    fn cells_match_word_maps() {
        let g = gasket(3);
        let ifs = g.ifs().clone();
        for k in 0..=3 {
            for c in 0..g.cells(k).len() {
                let w = g.cell_word(k, c);
                for (j, &v) in g.cells(k).cell(c).iter().enumerate() {
                    assert_eq!(g.point(v as usize), &ifs.apply_word(&w, &ifs.boundary()[j]));
                }
            }
        }
    }

    #[test]
    fn gasket_gap_constant() {
        let g = gasket(5);
        let gap = g.gap();
        assert!(!gap.clamped);
        assert_eq!(gap.squared, BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn interval_gap_is_clamped() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 5).unwrap();
        assert!(g.gap().clamped);
        assert!((g.gap().measured.unwrap() - 1.0).abs() < 1e-12);
        assert!(g.gap().value > 0.0 && g.gap().value < 1.0);
    }

    #[test]
    fn just_touching_all_levels() {
        let g = gasket(4);
        for k in 0..=4 {
            g.check_just_touching(k).unwrap();
        }
    }

    #[test]
    fn disjoint_glue_rejected() {
        let ifs = IfsSpec::catalog("interval").unwrap();
        let glue = GlueSet::new(vec![Point::from_ints(&[0]), Point::from_ints(&[3])]).unwrap();
        assert!(matches!(VertexGraph::build(&ifs, &glue, 2), Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn overlapping_glue_rejected() {
        let ifs = IfsSpec::catalog("interval").unwrap();
        let glue = GlueSet::new(vec![Point::from_ints(&[0]), Point::parse(&["1/2"]).unwrap()]).unwrap();
        assert!(matches!(VertexGraph::build(&ifs, &glue, 2), Err(Error::JustTouching(_))));
    }
}
