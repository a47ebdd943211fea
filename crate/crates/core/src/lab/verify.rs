use std::collections::BTreeMap;

use serde::Serialize;

use super::bbm::{bbm_sweep_besov, bbm_sweep_heat};
use super::family::{seeded_family, standard_family, FamilyKind};
use super::inequalities::{gn_check, sobolev_check};
use super::scaling::scaling_invariance_check;
use crate::besov::{morrey_check, sandwich_check_vertex_besov, MorreyOptions, ProfileOptions};
use crate::config::{ExperimentConfig, SigmaChoice};
use crate::energy::{
    beta_star, critical_exponent, energy_monotonicity_check, harmonic_extension_of_boundary, EnergySequence,
    FunctionOnVertices, RenormOptions, SolverOptions,
};
use crate::error::{Error, Result};
use crate::fractal::{GlueSet, Point, VertexGraph};
use crate::heat::{
    kernel_axioms_check, tail_check, heat_besov_equivalence_check, time_grid, AxiomOptions, GaussWeierstrass, HeatSums,
    KernelModel, SpectralKernel, SurrogateKernel,
};
use crate::lab::{SweepRow, SweepTable};
use crate::measure::DiscreteMeasure;
use crate::window::Window;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub fractal: String,
    pub level: usize,
    pub p: f64,
    pub sigma: f64,
    pub beta_star: f64,
    pub window: String,
    pub conventions: BTreeMap<String, String>,
    pub assertions: Vec<Assertion>,
    pub tables: Vec<SweepTable>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// Output conventions stamped into every artifact.
pub fn conventions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("discrete_energy".into(), "ordered pairs (each unordered pair counted twice)".into()),
        ("besov_normalization".into(), "alpha-regular rewrite: ball averages divided by r^alpha".into()),
        ("radius_grid".into(), "r_n = rho^n".into()),
        ("time_grid".into(), "t_n = rho^(beta* n)".into()),
    ])
}

struct Suite {
    assertions: Vec<Assertion>,
    tables: Vec<SweepTable>,
}

impl Suite {
    fn check(&mut self, name: &str, pass: bool, value: f64, bound: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), pass, value, bound: bound.into() });
    }

    fn meta(t: &SweepTable, key: &str) -> f64 {
        t.metadata.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
    }

    fn flag(t: &SweepTable, key: &str) -> bool {
        t.metadata.get(key).map(|v| v == "true").unwrap_or(false)
    }
}

/// Largest level `k ≤ m` whose vertex set has at most `cap` points.
fn level_for(graph: &VertexGraph, cap: usize) -> usize {
    (0..=graph.level()).rev().find(|&k| graph.vertex_count(k) <= cap).unwrap_or(0)
}

fn unit_vector(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

/// Runs the property suite for one configuration. Failed properties are
/// recorded as assertions; only invalid input or numerical breakdown
/// returns an error.
pub fn verify_suite(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let ifs = cfg.ifs()?;
    let p = cfg.p;
    let m = cfg.level;
    let graph = VertexGraph::single(&ifs, m)?;
    let rho = ifs.rho_f64();
    let alpha = ifs.alpha();
    let opts = ProfileOptions { window: cfg.window, ..ProfileOptions::default() };
    let mut s = Suite { assertions: Vec::new(), tables: Vec::new() };

    // critical exponent
    let renorm = RenormOptions::default();
    let sigma_crit = match critical_exponent(&ifs, p, &renorm) {
        Ok(ce) => {
            s.check("critical_exponent_property_e", ce.property_e && ce.r_p > 0.0 && ce.r_p < 1.0, ce.r_p, "0 < r_p < 1, sigma > alpha/p");
            match ifs.name() {
                "interval" => s.check("critical_exponent_interval_oracle", (ce.sigma - 1.0).abs() < 1e-9, ce.sigma, "|sigma - 1| < 1e-9"),
                "sierpinski" if p == 2.0 => {
                    s.check("renormalization_gasket_oracle", (ce.r_p - 0.6).abs() < 1e-9, ce.r_p, "|r_2 - 3/5| < 1e-9")
                }
                _ => {}
            }
            ce.sigma
        }
        Err(Error::RatioOscillation { ratios }) => {
            let r = *ratios.last().expect("at least one ratio");
            s.check("renormalization_converged", false, r, format!("ratios settle within {}", renorm.tol));
            (r.ln() / rho.ln() + alpha) / p
        }
        Err(e) => return Err(e),
    };
    let sigma = match cfg.sigma {
        SigmaChoice::Value(v) => v,
        SigmaChoice::Mode(_) => sigma_crit,
    };
    let beta = beta_star(&ifs)?;
    let sigma2 = beta / 2.0;

    let fam_level = level_for(&graph, 1200).min(m);
    let fam_graph = VertexGraph::single(&ifs, fam_level)?;
    let fam_mu = DiscreteMeasure::mu_m(&fam_graph);
    let e0 = unit_vector(ifs.boundary().len());
    let harmonic = harmonic_extension_of_boundary(&fam_graph, &e0, 2.0, &SolverOptions::default())?;

    // vertex energies of harmonic data are exactly constant at p = 2
    let seq = EnergySequence::compute(&fam_graph, &harmonic, 2.0, sigma2)?;
    let spread = seq.scaled.iter().cloned().fold(0.0, f64::max) / seq.scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    s.check("ve_harmonic_constant", spread - 1.0 < 1e-6, spread - 1.0, "relative spread < 1e-6");

    // level monotonicity
    let noise = seeded_family(&fam_graph, FamilyKind::VertexNoise, cfg.seed, cfg.grids.family_size)?;
    let mut worst = 0.0f64;
    let mut all = true;
    for (_, u) in &noise {
        let t = energy_monotonicity_check(&fam_graph, u, fam_level - 1, p)?;
        all &= Suite::flag(&t, "pass");
        worst = worst.max(t.column("ratio").iter().cloned().fold(0.0, f64::max));
    }
    let bound = crate::energy::monotonicity_constant(&fam_graph, p);
    s.check("energy_monotonicity", all, worst, format!("E_n / E_(n+1) <= {bound}"));

    // family used by the norm comparisons
    let family = standard_family(&fam_graph, cfg.seed, cfg.grids.family_size)?;
    let n_end = 5.min(fam_level - 1);
    // the spreads of seeded members depend on how rough the draw is, so they
    // are reported in the table and only the deterministic members are asserted
    let (mut lo_spread, mut up_spread) = (0.0f64, 0.0f64);
    let mut sand = SweepTable::new("sandwich_family").meta("n_range", format!("1..={n_end}"));
    for (name, u) in &family {
        let t = sandwich_check_vertex_besov(&fam_graph, u, p, sigma, 1..=n_end)?;
        let (lo, up) = (Suite::meta(&t, "spread_lower"), Suite::meta(&t, "spread_upper"));
        let upper_max = t.column("upper_ratio").iter().cloned().fold(0.0, f64::max);
        sand.push(
            SweepRow::new(name.clone())
                .output("spread_lower", lo)
                .output("spread_upper", up)
                .output("upper_ratio_max", upper_max),
        );
        if !name.starts_with("seeded") {
            lo_spread = lo_spread.max(lo);
            up_spread = up_spread.max(up);
        }
    }
    s.tables.push(sand);
    s.check("sandwich_lower_spread", lo_spread < 50.0, lo_spread, "< 50 (coordinate, harmonic)");
    s.check("sandwich_upper_spread", up_spread < 50.0, up_spread, "< 50 (coordinate, harmonic)");

    // spectral kernel
    let spec_level = cfg.grids.spectral_level.unwrap_or_else(|| level_for(&graph, 400)).min(m);
    let spec_graph = VertexGraph::single(&ifs, spec_level)?;
    let spec_mu = DiscreteMeasure::mu_m(&spec_graph);
    let spectral = KernelModel::GraphSpectral(Box::new(SpectralKernel::build(&spec_graph, &spec_mu, beta)?));
    let spec_n = grid_depth(&cfg.window, rho, spec_level);
    let spec_times = time_grid(rho, beta, spec_n);
    let t = kernel_axioms_check(&spec_graph, &spec_mu, &spectral, &spec_times, None, &AxiomOptions::default())?;
    s.check("spectral_symmetry", Suite::flag(&t, "pass_symmetry"), Suite::meta(&t, "symmetry_max"), "<= 1e-12");
    s.check("spectral_mass", Suite::flag(&t, "pass_mass"), Suite::meta(&t, "mass_max"), "<= 1 + 1e-8");
    s.check("spectral_semigroup", Suite::flag(&t, "pass_semigroup"), Suite::meta(&t, "semigroup_max"), "< 1e-10");
    s.tables.push(t);
    let spec_family = standard_family(&spec_graph, cfg.seed, cfg.grids.family_size)?;
    let mut worst_rise = f64::NEG_INFINITY;
    for (_, u) in &spec_family {
        let sums = HeatSums::compute(&spec_graph, &spec_mu, u, 2.0, &spectral, spec_n, &opts)?;
        let prof = sums.at_sigma(sigma2, &opts);
        // t decreases along the grid, so Ψ(t) non-increasing in t means non-decreasing in n
        for w in prof.psi.windows(2) {
            worst_rise = worst_rise.max((w[0] - w[1]) / w[0].abs().max(f64::MIN_POSITIVE));
        }
    }
    s.check("spectral_p2_monotone", worst_rise <= 1e-12, worst_rise, "relative increase <= 1e-12");

    // heat/Besov equivalence with the surrogate kernel
    let fam_n = grid_depth(&cfg.window, rho, fam_level);
    let fam_times = time_grid(rho, beta, fam_n);
    let surrogate = KernelModel::SubGaussian(SurrogateKernel::fit(&fam_graph, &fam_mu, alpha, beta, 1.0, &fam_times)?);
    let t = heat_besov_equivalence_check(&fam_graph, &fam_mu, &family, p, sigma, &surrogate, fam_n, &opts)?;
    for key in ["spread_inf", "spread_pp"] {
        let v = Suite::meta(&t, key);
        s.check(&format!("equivalence_{key}"), v < 50.0, v, "< 50");
    }
    s.check("equivalence_lower_bound", Suite::flag(&t, "lower_bound_holds"), Suite::meta(&t, "lower_constant"), "E_pp >= beta* c1 e^(-c2) B_pp");
    s.tables.push(t);

    // BBM sweeps
    let n_max = cfg.grids.n_max.unwrap_or_else(|| grid_depth(&cfg.window, rho, m));
    let mu = DiscreteMeasure::mu_m(&graph);
    let coord = FunctionOnVertices::from_fn(&graph, |x| x[0]);
    let t = bbm_sweep_besov(&graph, &mu, &coord, p, sigma, &cfg.grids.bbm_gaps, n_max, &opts)?;
    let (spread, reference) = (Suite::meta(&t, "spread"), Suite::meta(&t, "reference_sup"));
    s.check("bbm_besov_upper", Suite::flag(&t, "pass_upper"), Suite::meta(&t, "upper_bound"), "(2/p) sup x 1.25");
    let resolved: Vec<f64> = t.rows.iter().filter(|r| !r.has_flag("under_resolved")).filter_map(|r| r.get("value")).collect();
    let banded = !resolved.is_empty() && resolved.iter().all(|v| *v >= reference / 10.0 && *v <= 10.0 * reference);
    s.check("bbm_besov_band", banded, spread, "resolved values within [sup/10, 10 sup]");
    s.tables.push(t);
    let coord_f = FunctionOnVertices::from_fn(&fam_graph, |x| x[0]);
    let t = bbm_sweep_heat(&fam_graph, &fam_mu, &coord_f, p, sigma, &cfg.grids.bbm_gaps, &surrogate, fam_n, &opts)?;
    s.check("bbm_heat_upper", Suite::flag(&t, "pass_upper"), Suite::meta(&t, "upper_bound"), "(2 beta*/p) sup x 1.25");
    s.tables.push(t);

    // tails
    let center = (0..fam_graph.len())
        .min_by(|&a, &b| {
            let c = |i: usize| fam_graph.coord(i).iter().map(|x| (x - 0.4).powi(2)).sum::<f64>();
            c(a).total_cmp(&c(b))
        })
        .expect("non-empty graph");
    let gw = KernelModel::GaussWeierstrass(GaussWeierstrass { dim: ifs.dim() });
    let radii: Vec<f64> = (1..=12).map(|i| 0.05 * i as f64).collect();
    let (t, fit) = tail_check(&fam_graph, &fam_mu, &gw, &[center], &radii, &[1e-3, 3e-3])?;
    s.check("tail_gauss_weierstrass", (fit.gamma - 2.0).abs() < 0.1, fit.gamma, "|gamma - 2| < 5%");
    s.tables.push(t);
    // short times so the radii reach well into the decay, t^(1/β*) = ρ^3, ρ^4
    let tail_times: Vec<f64> = [3.0, 4.0].iter().map(|k| rho.powf(beta * k)).collect();
    let tail_kernel = KernelModel::SubGaussian(SurrogateKernel::fit(&fam_graph, &fam_mu, alpha, beta, 1.0, &tail_times)?);
    let (t, fit) = tail_check(&fam_graph, &fam_mu, &tail_kernel, &[center], &radii, &tail_times)?;
    let g = beta / (beta - 1.0);
    s.check("tail_surrogate", (fit.gamma - g).abs() < 0.1 * g, fit.gamma, format!("within 10% of {g}"));
    s.tables.push(t);

    // Hölder envelope of harmonic data: the embedding exponent is a lower bound
    let fit = morrey_check(&fam_graph, &harmonic, 2.0, sigma2, &MorreyOptions::default())?;
    s.check("morrey_holder_lower_bound", fit.slope >= 0.9 * fit.expected, fit.slope, format!(">= 0.9 x {}", fit.expected));

    // blow-ups: bump = harmonic data (1, 0, …) on the base tile, zero elsewhere
    let blow_level = (0..=m)
        .rev()
        .find(|&k| VertexGraph::single(&ifs, k).map(|g| g.len() * ifs.n_maps().pow(2) <= 6000).unwrap_or(false))
        .unwrap_or(0);
    let tile = VertexGraph::single(&ifs, blow_level)?;
    let bump_vals = harmonic_extension_of_boundary(&tile, &e0, 2.0, &SolverOptions::default())?;
    let bump = |pt: &Point| tile.find(pt).map(|i| bump_vals.values()[i]).unwrap_or(0.0);
    let blown = VertexGraph::build(&ifs, &GlueSet::blowup(&ifs, 2)?, blow_level)?;
    let blown_mu = DiscreteMeasure::mu_m(&blown);
    let k_max = grid_depth(&cfg.window, rho, blow_level.saturating_sub(1)).min(blow_level.saturating_sub(3));
    let t = scaling_invariance_check(&blown, &blown_mu, bump, p, sigma, &[0, 1], k_max, &opts)?;
    s.check("scaling_band", Suite::flag(&t, "pass"), Suite::meta(&t, "worst_ratio"), "ratios within [1/4, 4]");
    s.check("scaling_identity", Suite::flag(&t, "identity_exact"), 1.0, "n = 0 ratio exactly 1");
    s.tables.push(t);
    let sob_level = blow_level.saturating_sub(1).max(2);
    let sob_n = grid_depth(&cfg.window, rho, sob_level);
    let t = sobolev_check(&ifs, &[1, 2], sob_level, p, sigma, sob_n, &opts, |g| {
        let vals = (0..g.len()).map(|i| bump(g.point(i))).collect();
        Ok(vec![("bump".to_string(), FunctionOnVertices::on_graph(g, vals)?)])
    });
    match t {
        Ok(t) => s.tables.push(t),
        Err(e) if !e.is_numerical() => {}
        Err(e) => return Err(e),
    }
    let t = gn_check(&fam_graph, &fam_mu, &family, p, sigma, 2.0, 0.5, fam_n, &opts)?;
    s.tables.push(t);

    Ok(VerifyReport {
        config_hash: cfg.hash(),
        fractal: ifs.name().to_string(),
        level: m,
        p,
        sigma,
        beta_star: beta,
        window: cfg.window.describe(),
        conventions: conventions(),
        assertions: s.assertions,
        tables: s.tables,
    })
}

/// Deepest resolved grid index at a graph level, kept within the profile margin.
pub fn grid_depth(window: &Window, rho: f64, level: usize) -> usize {
    let margin = level.saturating_sub(crate::besov::RESOLUTION_MARGIN);
    window.resolved_max(rho, level).unwrap_or(0).min(margin)
}
