use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pcf_lab::besov::{besov_profile, ProfileOptions};
use pcf_lab::config::{KernelChoice, SigmaChoice};
use pcf_lab::energy::{beta_star, critical_exponent, harmonic_extension_of_boundary, RenormOptions, SolverOptions};
use pcf_lab::heat::{heat_profile, time_grid, GaussWeierstrass, SpectralKernel, SurrogateKernel};
use pcf_lab::lab::{bbm_sweep_besov, bbm_sweep_heat, conventions, grid_depth, standard_family, verify_suite};
use pcf_lab::{
    DiscreteMeasure, EnergySequence, ExperimentConfig, FunctionOnVertices, KernelModel, SweepRow, SweepTable,
    VertexGraph,
};

/// Caps the rayon pool when set to a positive integer.
const THREADS_ENV: &str = "PCF_LAB_THREADS";

#[derive(Parser)]
#[command(name = "pcf-lab", version, about = "p-energy experiments on p.c.f. fractals")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Catalog fractal name, used when no config is given.
    #[arg(long, global = true)]
    fractal: Option<String>,
    #[arg(long, global = true)]
    level: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; stdout when neither this nor the config sets one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Vertex graph as JSON.
    Build {
        /// Shorthand for --fractal.
        #[arg(value_name = "FRACTAL")]
        name: Option<String>,
    },
    /// p-harmonic extension of boundary data as JSON.
    Extend {
        /// Values on the boundary vertices, comma separated; default (1, 0, ...).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        boundary: Option<Vec<f64>>,
    },
    /// Discrete energies E_n and their scaled versions.
    Energy {
        /// Deepest level; defaults to the graph level.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "harmonic")]
        function: String,
    },
    /// Besov profile on the radius grid.
    Besov {
        #[arg(long, default_value = "harmonic")]
        function: String,
    },
    /// Heat-kernel profile on the time grid.
    Heat {
        #[arg(long, default_value = "harmonic")]
        function: String,
    },
    /// BBM sweep below the target exponent.
    Bbm {
        #[arg(long, default_value = "coordinate")]
        function: String,
        /// Sweep the heat functional instead of the Besov one.
        #[arg(long)]
        heat: bool,
    },
    /// Full property suite; exits 1 when an assertion fails.
    Verify,
}

enum Failure {
    Usage(String),
    Numerical(String),
    Assertion,
}

impl From<pcf_lab::Error> for Failure {
    fn from(e: pcf_lab::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(common: &Common, positional: Option<&str>) -> Outcome<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let name = positional
                .or(common.fractal.as_deref())
                .ok_or_else(|| Failure::Usage("give --config or --fractal".into()))?;
            ExperimentConfig::new(name, 4, 2.0)
        }
    };
    if common.config.is_some() {
        if let Some(name) = positional.or(common.fractal.as_deref()) {
            cfg.fractal = pcf_lab::config::FractalSource::Catalog(name.into());
        }
    }
    if let Some(l) = common.level {
        cfg.level = l;
    }
    if let Some(p) = common.p {
        cfg.p = p;
    }
    if let Some(s) = common.sigma {
        cfg.sigma = SigmaChoice::Value(s);
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.out.is_some() {
        cfg.outputs.dir = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome<()> {
    let positional = match &cli.cmd {
        Cmd::Build { name } => name.as_deref(),
        _ => None,
    };
    let cfg = load_config(&cli.common, positional)?;
    match &cli.cmd {
        Cmd::Build { .. } => {
            let graph = cfg.graph()?;
            #[derive(Serialize)]
            struct Doc {
                #[serde(flatten)]
                stamp: Stamp,
                graph: pcf_lab::fractal::GraphDocument,
            }
            let doc = Doc { stamp: Stamp::of(&cfg), graph: graph.document() };
            write_json(&cfg, "build", &doc)
        }
        Cmd::Extend { boundary } => {
            let graph = cfg.graph()?;
            let b = match boundary {
                Some(b) => b.clone(),
                None => unit_vector(graph.vertex_count(0)),
            };
            let u = harmonic_extension_of_boundary(&graph, &b, cfg.p, &SolverOptions::default())?;
            #[derive(Serialize)]
            struct Doc {
                #[serde(flatten)]
                stamp: Stamp,
                p: f64,
                level: usize,
                boundary: Vec<f64>,
                coords: Vec<Vec<f64>>,
                values: Vec<f64>,
            }
            let coords = (0..graph.len()).map(|i| graph.coord(i).to_vec()).collect();
            let doc = Doc { stamp: Stamp::of(&cfg), p: cfg.p, level: graph.level(), boundary: b, coords, values: u.into_values() };
            write_json(&cfg, "extend", &doc)
        }
        Cmd::Energy { n, function } => {
            let graph = cfg.graph()?;
            let n = n.unwrap_or(graph.level());
            if n > graph.level() {
                return Err(Failure::Usage(format!("level {n} exceeds built level {}", graph.level())));
            }
            let u = pick(&graph, &cfg, function)?;
            let sigma = sigma_of(&cfg)?;
            let seq = EnergySequence::up_to(&graph, &u, cfg.p, sigma, n)?;
            let mut t = SweepTable::new("energy").meta("p", cfg.p).meta("sigma", sigma).meta("function", function);
            for (k, (raw, scaled)) in seq.raw.iter().zip(&seq.scaled).enumerate() {
                t.push(SweepRow::new(format!("n{k}")).param("n", k as f64).output("energy", *raw).output("scaled", *scaled));
            }
            write_csv(&cfg, "energy", &t)
        }
        Cmd::Besov { function } => {
            let graph = cfg.graph()?;
            let mu = DiscreteMeasure::mu_m(&graph);
            let u = pick(&graph, &cfg, function)?;
            let opts = profile_options(&cfg);
            let prof = besov_profile(&graph, &mu, &u, cfg.p, sigma_of(&cfg)?, n_max(&cfg, &graph), &opts)?;
            write_csv(&cfg, "besov", &prof.to_table().meta("function", function))
        }
        Cmd::Heat { function } => {
            let graph = heat_graph(&cfg)?;
            let mu = DiscreteMeasure::mu_m(&graph);
            let u = pick(&graph, &cfg, function)?;
            let opts = profile_options(&cfg);
            let n = n_max(&cfg, &graph);
            let kernel = kernel(&cfg, &graph, &mu, n)?;
            let prof = heat_profile(&graph, &mu, &u, cfg.p, sigma_of(&cfg)?, &kernel, n, &opts)?;
            write_csv(&cfg, "heat", &prof.to_table().meta("function", function))
        }
        Cmd::Bbm { function, heat } => {
            let opts = profile_options(&cfg);
            let sigma = sigma_of(&cfg)?;
            let gaps = &cfg.grids.bbm_gaps;
            let t = if *heat {
                let graph = heat_graph(&cfg)?;
                let mu = DiscreteMeasure::mu_m(&graph);
                let u = pick(&graph, &cfg, function)?;
                let n = n_max(&cfg, &graph);
                let kernel = kernel(&cfg, &graph, &mu, n)?;
                bbm_sweep_heat(&graph, &mu, &u, cfg.p, sigma, gaps, &kernel, n, &opts)?
            } else {
                let graph = cfg.graph()?;
                let mu = DiscreteMeasure::mu_m(&graph);
                let u = pick(&graph, &cfg, function)?;
                bbm_sweep_besov(&graph, &mu, &u, cfg.p, sigma, gaps, n_max(&cfg, &graph), &opts)?
            };
            write_csv(&cfg, "bbm", &t.meta("function", function))
        }
        Cmd::Verify => {
            let report = verify_suite(&cfg)?;
            for a in &report.assertions {
                eprintln!("{} {:<34} {:>14} [{}]", if a.pass { "PASS" } else { "FAIL" }, a.name, a.value, a.bound);
            }
            write_json(&cfg, "verify", &report)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Assertion)
            }
        }
    }
}

/// Provenance block shared by every JSON artifact.
#[derive(Serialize)]
struct Stamp {
    config_hash: String,
    window: String,
    conventions: BTreeMap<String, String>,
}

impl Stamp {
    fn of(cfg: &ExperimentConfig) -> Self {
        Stamp { config_hash: cfg.hash(), window: cfg.window.describe(), conventions: conventions() }
    }
}

fn unit_vector(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    if let Some(x) = v.first_mut() {
        *x = 1.0;
    }
    v
}

fn profile_options(cfg: &ExperimentConfig) -> ProfileOptions {
    ProfileOptions { window: cfg.window, ..ProfileOptions::default() }
}

fn sigma_of(cfg: &ExperimentConfig) -> Outcome<f64> {
    Ok(match cfg.sigma {
        SigmaChoice::Value(s) => s,
        SigmaChoice::Mode(_) => critical_exponent(&cfg.ifs()?, cfg.p, &RenormOptions::default())?.sigma,
    })
}

fn n_max(cfg: &ExperimentConfig, graph: &VertexGraph) -> usize {
    cfg.grids.n_max.unwrap_or_else(|| grid_depth(&cfg.window, graph.ifs().rho_f64(), graph.level()))
}

// dense spectral work runs on a coarser copy when one is configured
fn heat_graph(cfg: &ExperimentConfig) -> Outcome<VertexGraph> {
    match (cfg.kernel, cfg.grids.spectral_level) {
        (KernelChoice::GraphSpectral, Some(l)) => {
            let ifs = cfg.ifs()?;
            Ok(VertexGraph::build(&ifs, &cfg.glue_set(&ifs)?, l.min(cfg.level))?)
        }
        _ => Ok(cfg.graph()?),
    }
}

fn kernel(cfg: &ExperimentConfig, graph: &VertexGraph, mu: &DiscreteMeasure, n: usize) -> Outcome<KernelModel> {
    let ifs = graph.ifs();
    Ok(match cfg.kernel {
        KernelChoice::GaussWeierstrass => KernelModel::GaussWeierstrass(GaussWeierstrass { dim: ifs.dim() }),
        KernelChoice::Subgaussian => {
            let beta = beta_star(ifs)?;
            let times = time_grid(ifs.rho_f64(), beta, n);
            KernelModel::SubGaussian(SurrogateKernel::fit(graph, mu, ifs.alpha(), beta, 1.0, &times)?)
        }
        KernelChoice::GraphSpectral => {
            KernelModel::GraphSpectral(Box::new(SpectralKernel::build(graph, mu, beta_star(ifs)?)?))
        }
    })
}

fn pick(graph: &VertexGraph, cfg: &ExperimentConfig, name: &str) -> Outcome<FunctionOnVertices> {
    let family = standard_family(graph, cfg.seed, cfg.grids.family_size)?;
    let names: Vec<&str> = family.iter().map(|(n, _)| n.as_str()).collect();
    let known = names.join(", ");
    family
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, u)| u)
        .ok_or_else(|| Failure::Usage(format!("unknown function {name:?}; expected one of {known}")))
}

fn sink(cfg: &ExperimentConfig, stem: &str, ext: &str) -> Outcome<Box<dyn Write>> {
    match &cfg.outputs.dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Box::new(io::BufWriter::new(File::create(artifact(dir, stem, ext))?)))
        }
        None => Ok(Box::new(io::BufWriter::new(io::stdout().lock()))),
    }
}

fn artifact(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}

fn write_json<T: Serialize>(cfg: &ExperimentConfig, stem: &str, value: &T) -> Outcome<()> {
    let mut w = sink(cfg, stem, "json")?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// CSV preceded by `#` lines carrying the config hash, window,
/// conventions and the table's metadata.
fn write_csv(cfg: &ExperimentConfig, stem: &str, table: &SweepTable) -> Outcome<()> {
    let mut w = sink(cfg, stem, "csv")?;
    writeln!(w, "# experiment={}", table.experiment)?;
    writeln!(w, "# config_hash={}", cfg.hash())?;
    writeln!(w, "# window={}", cfg.window.describe())?;
    for (k, v) in conventions() {
        writeln!(w, "# convention.{k}={v}")?;
    }
    for (k, v) in &table.metadata {
        writeln!(w, "# {k}={v}")?;
    }
    let (header, rows) = table.records();
    let mut csv = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Failure::Usage(e.to_string());
    csv.write_record(&header).map_err(err)?;
    for r in rows {
        csv.write_record(&r).map_err(err)?;
    }
    csv.flush()?;
    Ok(())
}
