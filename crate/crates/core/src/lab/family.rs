use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{harmonic_extension_of_boundary, p_harmonic_extension, FunctionOnVertices, SolverOptions};
use crate::error::Result;
use crate::fractal::VertexGraph;

/// How the members of a seeded test family are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilyKind {
    /// Independent uniform values in `[−1, 1]` at every vertex of the top level.
    VertexNoise,
    /// Uniform values on `V_coarse` extended to the top level by the
    /// 2-harmonic extension (piecewise linear on the interval).
    HarmonicNoise { coarse: usize },
}

fn member_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `count` functions drawn from `kind`; member `i` depends only on
/// `(seed, i)`.
pub fn seeded_family(
    graph: &VertexGraph,
    kind: FamilyKind,
    seed: u64,
    count: usize,
) -> Result<Vec<(String, FunctionOnVertices)>> {
    (0..count)
        .map(|i| {
            let mut rng = member_rng(seed, i);
            let u = match kind {
                FamilyKind::VertexNoise => {
                    let vals = (0..graph.len()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    FunctionOnVertices::on_graph(graph, vals)?
                }
                FamilyKind::HarmonicNoise { coarse } => {
                    let k = coarse.min(graph.level());
                    let vals = (0..graph.vertex_count(k)).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    let u = FunctionOnVertices::new(graph, k, vals)?;
                    p_harmonic_extension(graph, &u, graph.level(), 2.0, &SolverOptions::default())?
                }
            };
            Ok((format!("seeded{i}"), u))
        })
        .collect()
}

/// The standard test family: the first coordinate, the 2-harmonic
/// extension of `(1, 0, …, 0)` from `V_0`, and `seeded` harmonic-noise
/// members drawn from `V_2`.
pub fn standard_family(graph: &VertexGraph, seed: u64, seeded: usize) -> Result<Vec<(String, FunctionOnVertices)>> {
    let mut boundary = vec![0.0; graph.vertex_count(0)];
    boundary[0] = 1.0;
    let mut fam = vec![
        ("coordinate".to_string(), FunctionOnVertices::from_fn(graph, |x| x[0])),
        ("harmonic".to_string(), harmonic_extension_of_boundary(graph, &boundary, 2.0, &SolverOptions::default())?),
    ];
    fam.extend(seeded_family(graph, FamilyKind::HarmonicNoise { coarse: 2 }, seed, seeded)?);
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::IfsSpec;

    #[test]
    fn members_are_reproducible_and_distinct() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 4).unwrap();
        let a = seeded_family(&g, FamilyKind::HarmonicNoise { coarse: 2 }, 7, 3).unwrap();
        let b = seeded_family(&g, FamilyKind::HarmonicNoise { coarse: 2 }, 7, 5).unwrap();
        for i in 0..3 {
            assert_eq!(a[i].1.values(), b[i].1.values());
        }
        assert_ne!(a[0].1.values(), a[1].1.values());
        let c = seeded_family(&g, FamilyKind::VertexNoise, 8, 1).unwrap();
        assert!(c[0].1.values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn interval_harmonic_noise_is_piecewise_linear() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 6).unwrap();
        let u = &seeded_family(&g, FamilyKind::HarmonicNoise { coarse: 2 }, 1, 1).unwrap()[0].1;
        // midpoint of two neighbours on the same quarter cell
        let find = |x: f64| (0..g.len()).find(|&i| (g.coord(i)[0] - x).abs() < 1e-12).unwrap();
        let v = u.values();
        assert!((v[find(0.125)] - 0.5 * (v[find(0.0)] + v[find(0.25)])).abs() < 1e-12);
    }

    #[test]
    fn standard_family_shape() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 3).unwrap();
        let f = standard_family(&g, 1, 10).unwrap();
        assert_eq!(f.len(), 12);
        assert_eq!(f[1].1.values()[0], 1.0);
    }
}
