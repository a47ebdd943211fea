use crate::besov::{besov_profile, ProfileOptions};
use crate::energy::{beta_star, FunctionOnVertices};
use crate::error::{Error, Result};
use crate::fractal::{GlueSet, IfsSpec, VertexGraph};
use crate::heat::{heat_profile, time_grid, KernelModel, SurrogateKernel};
use crate::lab::{SweepRow, SweepTable};
use crate::measure::DiscreteMeasure;

/// Exponent pairs closer than this count as `pσ = α`.
const CRITICAL_EPS: f64 = 1e-12;

/// `q = pα / (α − pσ)`; infinite or non-positive values are returned as is.
pub fn gn_exponent(p: f64, alpha: f64, sigma: f64) -> f64 {
    p * alpha / (alpha - p * sigma)
}

/// Gagliardo–Nirenberg ratios `‖f‖_r / ((‖f‖_p + [f]_{B_{p,∞}^σ})^θ ‖f‖_s^{1−θ})`
/// with `1/r = θ/q + (1−θ)/s`; `s` may be infinite. When `pσ = α` the power
/// form is replaced by `∫ exp((|f| / (‖f‖_p + [f]))^{p/(p−1)}) dμ`, reported
/// as `exp_integrability`.
#[allow(clippy::too_many_arguments)]
pub fn gn_check(
    graph: &VertexGraph,
    measure: &DiscreteMeasure,
    family: &[(String, FunctionOnVertices)],
    p: f64,
    sigma: f64,
    s: f64,
    theta: f64,
    n_max: usize,
    opts: &ProfileOptions,
) -> Result<SweepTable> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("θ must lie in [0, 1], got {theta}")));
    }
    if theta == 1.0 && s.is_infinite() {
        return Err(Error::InvalidParameter("θ = 1 with s = ∞ is excluded".into()));
    }
    let alpha = graph.ifs().alpha();
    let critical = (alpha - p * sigma).abs() < CRITICAL_EPS;
    let q = gn_exponent(p, alpha, sigma);
    let inv_r = if critical { f64::NAN } else { theta / q + (1.0 - theta) / s };
    let r = 1.0 / inv_r;
    let mut table = SweepTable::new("gn_check")
        .meta("p", p)
        .meta("sigma", sigma)
        .meta("q", q)
        .meta("r", r)
        .meta("s", s)
        .meta("theta", theta)
        .meta("variant", if critical { "exponential" } else { "power" });
    let mut family_max: f64 = 0.0;
    for (name, u) in family {
        let vals = u.values();
        let prof = besov_profile(graph, measure, u, p, sigma, n_max, opts)?;
        let semi = prof.sup.powf(1.0 / p);
        let lp = measure.lp_norm(vals, p);
        let ls = measure.lp_norm(vals, s);
        let mut row = SweepRow::new(name.clone()).output("lp", lp).output("besov", semi).output("ls", ls);
        let (ratio, expo, lr) = if critical {
            let scale = lp + semi;
            let e = if scale > 0.0 {
                let w = measure.weights();
                vals.iter().zip(w).map(|(v, w)| w * (v.abs() / scale).powf(p / (p - 1.0)).exp()).sum()
            } else {
                f64::NAN
            };
            (f64::NAN, e, f64::NAN)
        } else if !(inv_r >= 0.0) {
            row = row.flag("invalid_exponent");
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let lr = measure.lp_norm(vals, r);
            let rhs = (lp + semi).powf(theta) * ls.powf(1.0 - theta);
            if rhs == 0.0 {
                row = row.flag("vacuous");
                (f64::NAN, f64::NAN, lr)
            } else {
                (lr / rhs, f64::NAN, lr)
            }
        };
        if ratio.is_finite() {
            family_max = family_max.max(ratio);
        }
        table.push(row.output("lr", lr).output("ratio", ratio).output("exp_integrability", expo));
    }
    table.set_meta("family_max_ratio", family_max);
    Ok(table)
}

/// The two candidate Sobolev exponents: `pα/(α − pσβ*)` as stated for the
/// unbounded case and `pα/(α − pσ)` as in the Gagliardo–Nirenberg inequality.
pub fn sobolev_exponents(p: f64, alpha: f64, sigma: f64, beta: f64) -> (f64, f64) {
    (p * alpha / (alpha - p * sigma * beta), gn_exponent(p, alpha, sigma))
}

/// `‖u‖_q / (E_{p,∞}^σ(u))^{1/p}` on blow-up truncations `K_l`, using the
/// sub-Gaussian surrogate fitted on each truncation. `q` is the first
/// positive one of the two candidates, otherwise `∞`. `family` builds the
/// test functions on each truncation.
#[allow(clippy::too_many_arguments)]
pub fn sobolev_check<F>(
    ifs: &IfsSpec,
    ls: &[usize],
    level: usize,
    p: f64,
    sigma: f64,
    n_max: usize,
    opts: &ProfileOptions,
    family: F,
) -> Result<SweepTable>
where
    F: Fn(&VertexGraph) -> Result<Vec<(String, FunctionOnVertices)>>,
{
    let alpha = ifs.alpha();
    let beta = beta_star(ifs)?;
    let (q_stated, q_alt) = sobolev_exponents(p, alpha, sigma, beta);
    let q = if q_stated > 0.0 {
        q_stated
    } else if q_alt > 0.0 {
        q_alt
    } else {
        f64::INFINITY
    };
    let mut table = SweepTable::new("sobolev_check")
        .meta("p", p)
        .meta("sigma", sigma)
        .meta("beta_star", beta)
        .meta("q_stated", q_stated)
        .meta("q_gn", q_alt)
        .meta("q_used", q)
        .meta("exponent_question", "q_stated and q_gn differ; both reported");
    let mut by_name: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for &l in ls {
        let graph = VertexGraph::build(ifs, &GlueSet::blowup(ifs, l)?, level)?;
        let mu = DiscreteMeasure::mu_m(&graph);
        let times = time_grid(ifs.rho_f64(), beta, n_max);
        let kernel = KernelModel::SubGaussian(SurrogateKernel::fit(&graph, &mu, alpha, beta, 1.0, &times)?);
        for (name, u) in family(&graph)? {
            let prof = heat_profile(&graph, &mu, &u, p, sigma, &kernel, n_max, opts)?;
            let norm = mu.lp_norm(u.values(), q);
            let energy = prof.sup.powf(1.0 / p);
            let mut row = SweepRow::new(format!("l{l}_{name}"))
                .param("l", l as f64)
                .output("norm_q", norm)
                .output("energy", energy);
            if q_stated <= 0.0 {
                row = row.flag("q_stated_invalid");
            }
            if q_alt <= 0.0 {
                row = row.flag("q_gn_invalid");
            }
            let ratio = if energy == 0.0 {
                row = row.flag("vacuous");
                f64::NAN
            } else {
                norm / energy
            };
            if ratio.is_finite() {
                by_name.entry(name).or_default().push(ratio);
            }
            table.push(row.output("ratio", ratio));
        }
    }
    let mut worst: f64 = 1.0;
    for (name, r) in &by_name {
        let s = r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::INFINITY, f64::min);
        table.set_meta(&format!("stability_{name}"), s);
        worst = worst.max(s);
    }
    table.set_meta("stability_max", worst);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_zero_is_norm_identity() {
        let g = VertexGraph::single(&IfsSpec::catalog("sierpinski").unwrap(), 5).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let fam = vec![("x".to_string(), FunctionOnVertices::from_fn(&g, |x| x[0] + 0.5 * x[1]))];
        let t = gn_check(&g, &mu, &fam, 2.0, 1.0, 3.0, 0.0, 3, &ProfileOptions::default()).unwrap();
        assert!((t.rows[0].get("ratio").unwrap() - 1.0).abs() < 1e-12);
        assert!(gn_check(&g, &mu, &fam, 2.0, 1.0, f64::INFINITY, 1.0, 3, &ProfileOptions::default()).is_err());
    }

    #[test]
    fn critical_case_uses_exponential_form() {
        let g = VertexGraph::single(&IfsSpec::catalog("interval").unwrap(), 8).unwrap();
        let mu = DiscreteMeasure::mu_m(&g);
        let fam = vec![("x".to_string(), FunctionOnVertices::from_fn(&g, |x| x[0]))];
        let t = gn_check(&g, &mu, &fam, 2.0, 0.5, 2.0, 0.5, 5, &ProfileOptions::default()).unwrap();
        assert_eq!(t.metadata["variant"], "exponential");
        assert!(t.rows[0].get("exp_integrability").unwrap() > 1.0);
    }

    #[test]
    fn sobolev_scaling_invariant() {
        let ifs = IfsSpec::catalog("interval").unwrap();
        let tent = |c: f64| {
            move |g: &VertexGraph| -> Result<Vec<(String, FunctionOnVertices)>> {
                Ok(vec![("tent".into(), FunctionOnVertices::from_fn(g, |x| c * (1.0 - (2.0 * x[0] - 1.0).abs()).max(0.0)))])
            }
        };
        let opts = ProfileOptions::default();
        let a = sobolev_check(&ifs, &[1], 8, 2.0, 1.0, 5, &opts, tent(1.0)).unwrap();
        let b = sobolev_check(&ifs, &[1], 8, 2.0, 1.0, 5, &opts, tent(3.0)).unwrap();
        let (ra, rb) = (a.rows[0].get("ratio").unwrap(), b.rows[0].get("ratio").unwrap());
        assert!((ra - rb).abs() < 1e-12 * ra);
        assert!(a.rows[0].has_flag("q_gn_invalid"));
        assert_eq!(a.metadata["q_used"], "inf");
    }
}
