use super::ball::{BallIndex, Radius};

/// Visits every `y` with `d(x, y) < radii[0]` and reports its shell: the
/// largest `j` with `d(x, y) < radii[j]`. Radii must be strictly
/// decreasing, so shell `j` collects `radii[j+1] ≤ d < radii[j]` and
/// ball sums are suffix sums over shells.
pub fn shell_bins<F: FnMut(usize, usize, f64)>(index: &BallIndex<'_>, radii: &[Radius], x: usize, mut f: F) {
    debug_assert!(radii.windows(2).all(|w| w[0].value() > w[1].value()));
    let graph = index.graph();
    let px = graph.point(x);
    index.for_each_in_ball(x, &radii[0], |y, d2| {
        let d = d2.sqrt();
        // invariant: inside radii[lo], outside radii[hi] (hi = len means none)
        let (mut lo, mut hi) = (0usize, radii.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if radii[mid].contains_dist(d, d2, || Some(px.dist2(graph.point(y)))) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        f(y, lo, d2);
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{IfsSpec, VertexGraph};

    #[test]
    fn shells_partition_balls() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 4).unwrap();
        let idx = BallIndex::for_level(&g, 4);
        let radii: Vec<Radius> = (0..4).map(|n| Radius::power(g.ifs().rho(), n)).collect();
        for x in 0..g.len() {
            let mut counts = [0usize; 4];
            shell_bins(&idx, &radii, x, |_, j, _| counts[j] += 1);
            for j in 0..4 {
                let ball = idx.query_vertex(x, &radii[j]).len();
                assert_eq!(counts[j..].iter().sum::<usize>(), ball);
            }
        }
    }
}
