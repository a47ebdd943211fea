use super::discrete::{discrete_p_energy, EnergySequence};
use super::function::FunctionOnVertices;
use crate::error::{Error, Result};
use crate::fractal::VertexGraph;
use crate::lab::{SweepRow, SweepTable};
use crate::window::Window;

/// `|V_0|² |V_1|^{p−1}` for the underlying IFS.
pub fn monotonicity_constant(graph: &VertexGraph, p: f64) -> f64 {
    let ifs = graph.ifs();
    let v0 = ifs.boundary().len() as f64;
    let v1 = ifs.template().len() as f64;
    v0 * v0 * v1.powf(p - 1.0)
}

/// Rows `n = 0..=n_max` with `E_n / E_{n+1}` against the constant above.
pub fn energy_monotonicity_check(
    graph: &VertexGraph,
    u: &FunctionOnVertices,
    n_max: usize,
    p: f64,
) -> Result<SweepTable> {
    if n_max + 1 > u.level() {
        return Err(Error::LevelTooDeep { requested: n_max + 1, built: u.level() });
    }
    let c = monotonicity_constant(graph, p);
    let energies: Vec<f64> = (0..=n_max + 1)
        .map(|n| discrete_p_energy(graph, u, n, p))
        .collect::<Result<_>>()?;
    let mut table = SweepTable::new("energy_monotonicity").meta("bound", c.to_string()).meta("p", p.to_string());
    let mut pass = true;
    for n in 0..=n_max {
        let (a, b) = (energies[n], energies[n + 1]);
        let mut row = SweepRow::new(format!("n{n}")).param("n", n as f64).output("e_n", a).output("e_next", b);
        let ratio = if a == 0.0 && b == 0.0 {
            row = row.flag("vacuous");
            0.0
        } else if b == 0.0 {
            row = row.flag("violation");
            pass = false;
            f64::INFINITY
        } else {
            a / b
        };
        if ratio > c {
            pass = false;
            row = row.flag("exceeds_bound");
        }
        table.push(row.output("ratio", ratio).output("bound", c));
    }
    table.set_meta("pass", pass.to_string());
    Ok(table)
}

/// Empirical (VE) and (ṼE) constants of each function over levels `0..=m`,
/// with the window taken at the deepest levels.
pub fn ve_report(
    graph: &VertexGraph,
    family: &[(String, FunctionOnVertices)],
    p: f64,
    sigma: f64,
    window: &Window,
) -> Result<SweepTable> {
    let alpha = graph.ifs().alpha();
    if !(sigma > alpha / p) {
        return Err(Error::InvalidParameter(format!("sigma must exceed alpha/p = {}", alpha / p)));
    }
    if window.len < 2 {
        return Err(Error::InvalidParameter("window depth must be at least 2".into()));
    }
    let mut table = SweepTable::new("ve_report")
        .meta("p", p.to_string())
        .meta("sigma", sigma.to_string())
        .meta("window", window.describe());
    let mut family_max: f64 = 0.0;
    let mut family_tilde: f64 = 0.0;
    for (name, u) in family {
        let seq = EnergySequence::compute(graph, u, p, sigma)?;
        let last = seq.scaled.len() - 1;
        let tail: Vec<f64> = window.indices(last).map(|n| seq.scaled[n]).collect();
        let sup = seq.scaled.iter().cloned().fold(0.0, f64::max);
        let tail_min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        let tail_max = tail.iter().cloned().fold(0.0, f64::max);
        let mut row = SweepRow::new(name.clone());
        let (c_ve, c_tilde) = if sup == 0.0 {
            row = row.flag("vacuous");
            (f64::NAN, f64::NAN)
        } else if tail_min == 0.0 {
            row = row.flag("anomaly");
            (f64::INFINITY, f64::INFINITY)
        } else {
            let v = (sup / tail_min, tail_max / tail_min);
            family_max = family_max.max(v.0);
            family_tilde = family_tilde.max(v.1);
            v
        };
        table.push(row.output("sup", sup).output("tail_min", tail_min).output("c_ve", c_ve).output("c_ve_tilde", c_tilde));
    }
    table.set_meta("family_max_c_ve", family_max.to_string());
    table.set_meta("family_max_c_ve_tilde", family_tilde.to_string());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{harmonic_extension_of_boundary, SolverOptions};
    use crate::fractal::IfsSpec;

    #[test]
    fn interval_ratio_two() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 6).unwrap();
        let u = FunctionOnVertices::from_fn(&g, |x| x[0]);
        let t = energy_monotonicity_check(&g, &u, 5, 2.0).unwrap();
        assert_eq!(t.metadata["bound"], "12");
        assert_eq!(t.metadata["pass"], "true");
        for r in t.column("ratio") {
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_vacuous_pass() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 3).unwrap();
        let u = FunctionOnVertices::constant(&g, 1.0);
        let t = energy_monotonicity_check(&g, &u, 2, 3.0).unwrap();
        assert_eq!(t.metadata["pass"], "true");
        let ve = ve_report(&g, &[("c".into(), u)], 2.0, 1.0, &Window::new(2)).unwrap();
        assert!(ve.rows[0].has_flag("vacuous"));
    }

    #[test]
    fn harmonic_gasket_ve_is_one() {
        let ifs = IfsSpec::catalog("sierpinski").unwrap();
        let g = VertexGraph::single(&ifs, 6).unwrap();
        let u = harmonic_extension_of_boundary(&g, &[1.0, 0.0, 0.0], 2.0, &SolverOptions::default()).unwrap();
        let sigma = 5f64.log2() / 2.0;
        let t = ve_report(&g, &[("h".into(), u)], 2.0, sigma, &Window::new(3)).unwrap();
        assert!((t.rows[0].get("c_ve").unwrap() - 1.0).abs() < 1e-9);
    }
}
