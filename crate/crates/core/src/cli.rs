//! Command-line surface: simulate data, build constraint-based search
//! spaces, learn MAP structures with iterative space improvement, sample
//! DAGs by order or partition MCMC, and compare/evaluate runs.

use crate::bde::BdeScorer;
use crate::bge::BgeScorer;
use crate::data::{
    gaussian_stats, read_adjacency_csv, simulate, write_adjacency_csv, BgeHyper, DataKind,
    Dataset, GraphKind, SimConfig,
};
use crate::error::{Error, Result};
use crate::graph::{
    dag_to_cpdag, diagnostics, edge_posteriors, shd, threshold_consensus, tpr_fprn, Dag,
    DagSample, EdgePosterior, PosteriorMode,
};
use crate::order::{run_chain, ChainConfig, GammaSchedule, Mode};
use crate::partition::{run_partition_chain, PartitionConfig};
use crate::space::{improve_space, pc_skeleton, ImproveConfig, SearchSpace};
use crate::tables::{BuildOptions, Lattices, LocalScorer};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Worker-count override for multi-chain and lattice-building parallelism.
pub const WORKERS_ENV: &str = "BNSL_WORKERS";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "bnsl",
    about = "Bayesian-network structure learning by hybrid constraint-based/MCMC inference",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate a ground-truth DAG and linear-Gaussian data from it
    Simulate(SimulateArgs),
    /// Estimate a constraint-based skeleton (PC-stable)
    Space(SpaceArgs),
    /// MAP structure search with iterative search-space improvement
    Learn(LearnArgs),
    /// Posterior DAG sampling by order or partition MCMC
    Sample(SampleArgs),
    /// Convergence diagnostics (rho^2, RMSE) between two sampling runs
    Diagnose(DiagnoseArgs),
    /// Accuracy of an estimate against a ground-truth DAG
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
pub enum GraphKindArg {
    Uniform,
    Erdos,
    Powerlaw,
    Islands,
}

impl From<GraphKindArg> for GraphKind {
    fn from(g: GraphKindArg) -> Self {
        match g {
            GraphKindArg::Uniform => GraphKind::Uniform,
            GraphKindArg::Erdos => GraphKind::Erdos,
            GraphKindArg::Powerlaw => GraphKind::Powerlaw,
            GraphKindArg::Islands => GraphKind::Islands,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// number of variables
    #[arg(long)]
    pub n: usize,
    /// expected parents per node
    #[arg(long, default_value_t = 2.0)]
    pub avg_parents: f64,
    /// number of observations
    #[arg(long)]
    pub n_obs: usize,
    #[arg(long, value_enum, default_value_t = GraphKindArg::Erdos)]
    pub graph: GraphKindArg,
    /// edge-weight magnitude range
    #[arg(long, default_value_t = 0.4)]
    pub weight_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub weight_max: f64,
    /// draw weight signs uniformly at random
    #[arg(long, default_value_t = false)]
    pub random_sign: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
pub enum ScoreKind {
    /// BGe score over continuous data
    Bge,
    /// BDe score over binary data
    Bde,
}

/// Dataset + score selection shared by space/learn/sample.
#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// dataset CSV (header row of variable names, one row per observation)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ScoreKind::Bge)]
    pub score: ScoreKind,
    /// BDe equivalent sample size
    #[arg(long, default_value_t = 1.0)]
    pub chi: f64,
    /// BGe alpha_mu (default 1)
    #[arg(long)]
    pub alpha_mu: Option<f64>,
    /// BGe alpha_w (default n + 2)
    #[arg(long)]
    pub alpha_w: Option<f64>,
    /// BGe prior precision scale t (default alpha_mu(alpha_w - n - 1)/(alpha_mu + 1))
    #[arg(long)]
    pub t_scale: Option<f64>,
}

impl ScoreArgs {
    fn kind(&self) -> DataKind {
        match self.score {
            ScoreKind::Bge => DataKind::Continuous,
            ScoreKind::Bde => DataKind::Binary,
        }
    }

    fn load(&self) -> Result<Dataset> {
        Dataset::load_csv(&self.data, self.kind())
    }

    fn hyper(&self, n: usize) -> BgeHyper {
        let mut h = BgeHyper::default_for(n);
        if let Some(a) = self.alpha_mu {
            h.alpha_mu = a;
        }
        if let Some(a) = self.alpha_w {
            h.alpha_w = a;
        }
        if let Some(t) = self.t_scale {
            h.t_scale = t;
        }
        h
    }

    /// Runs `f` with the scorer matching the selected score kind.
    fn with_scorer<T>(
        &self,
        d: &Dataset,
        f: impl FnOnce(&dyn ErasedScorer) -> Result<T>,
    ) -> Result<T> {
        match self.score {
            ScoreKind::Bge => {
                let stats = gaussian_stats(d, self.hyper(d.n_vars))?;
                f(&BgeScorer::new(&stats)?)
            }
            ScoreKind::Bde => f(&BdeScorer::new(d, self.chi)?),
        }
    }
}

/// Object-safe view of a LocalScorer so one dispatch point serves both
/// score kinds.
trait ErasedScorer: Sync {
    fn build(&self, space: &[Vec<usize>], opts: &BuildOptions) -> Result<Lattices>;
    fn improve(
        &self,
        initial: &SearchSpace,
        cfg: &ImproveConfig,
    ) -> Result<(SearchSpace, DagSample, crate::space::IterationTrace)>;
}

impl<S: LocalScorer> ErasedScorer for S {
    fn build(&self, space: &[Vec<usize>], opts: &BuildOptions) -> Result<Lattices> {
        Lattices::build(self, space, opts)
    }
    fn improve(
        &self,
        initial: &SearchSpace,
        cfg: &ImproveConfig,
    ) -> Result<(SearchSpace, DagSample, crate::space::IterationTrace)> {
        improve_space(initial, self, cfg)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SpaceArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// significance level of the conditional-independence tests
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// initial search space CSV; PC skeleton when omitted
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// PC significance level when no space file is given
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// steps per chain per iteration; default ceil(c n^2 ln n)
    #[arg(long)]
    pub steps: Option<usize>,
    /// c in the default step budget
    #[arg(long, default_value_t = 20.0)]
    pub steps_factor: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iterations: usize,
    /// largest permissible parent-set size
    #[arg(long, default_value_t = 25)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
pub enum Sampler {
    Order,
    Partition,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum, Serialize)]
pub enum PosteriorModeArg {
    Dag,
    Cpdag,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    /// search space CSV (e.g. final_space.csv from `learn`); PC skeleton
    /// when omitted
    #[arg(long)]
    pub space: Option<PathBuf>,
    /// PC significance level when no space file is given
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Sampler::Partition)]
    pub sampler: Sampler,
    /// allow one additional parent from outside the space per node
    #[arg(long, default_value_t = false)]
    pub extension: bool,
    /// adjacency CSV of a DAG (e.g. map_dag.csv from `learn`) used as the
    /// chains' starting state; cold start when omitted
    #[arg(long)]
    pub init_dag: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    /// steps per chain; default ceil(c n^2 ln n)
    #[arg(long)]
    pub steps: Option<usize>,
    /// c in the default step budget
    #[arg(long, default_value_t = 20.0)]
    pub steps_factor: f64,
    /// sampling/trace period; 0 selects n
    #[arg(long, default_value_t = 0)]
    pub thin: usize,
    #[arg(long, default_value_t = 0.2)]
    pub burn_in: f64,
    /// base seed; chain i uses seed + i unless --seeds is given
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// explicit per-chain seeds, comma-separated
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// order-chain temperature: "fixed:<g>" or "adaptive:<c>"
    #[arg(long, default_value = "fixed:1")]
    pub gamma: String,
    #[arg(long, value_enum, default_value_t = PosteriorModeArg::Cpdag)]
    pub posterior_mode: PosteriorModeArg,
    #[arg(long, default_value_t = 25)]
    pub k_max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    /// output directory of the first `sample` run
    #[arg(long)]
    pub run_a: PathBuf,
    /// output directory of the second `sample` run
    #[arg(long)]
    pub run_b: PathBuf,
    /// inclusion threshold: edges above it in at least one run qualify
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    /// output JSON file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// edge-posterior CSV to threshold into a consensus graph
    #[arg(long, conflicts_with = "dag")]
    pub posterior: Option<PathBuf>,
    /// adjacency CSV of a point estimate
    #[arg(long)]
    pub dag: Option<PathBuf>,
    /// consensus threshold applied to --posterior
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// ground-truth adjacency CSV
    #[arg(long)]
    pub truth: PathBuf,
    /// output JSON file
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_gamma(s: &str) -> Result<GammaSchedule> {
    let (kind, val) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("invalid gamma schedule '{s}'")))?;
    let v: f64 = val
        .parse()
        .map_err(|_| Error::Config(format!("invalid gamma value '{val}'")))?;
    if v <= 0.0 {
        return Err(Error::Config("gamma parameter must be positive".into()));
    }
    match kind {
        "fixed" => Ok(GammaSchedule::Fixed(v)),
        "adaptive" => Ok(GammaSchedule::Adaptive { c: v }),
        _ => Err(Error::Config(format!(
            "gamma schedule must be fixed:<g> or adaptive:<c>, got '{s}'"
        ))),
    }
}

fn default_steps(n: usize, c: f64) -> usize {
    (c * (n * n) as f64 * (n.max(2) as f64).ln()).ceil() as usize
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serialization failed: {e}")))?;
    std::fs::write(path, body + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn echo_config<T: Serialize>(out_dir: &Path, args: &T) -> Result<()> {
    write_json(&out_dir.join("config.json"), args)
}

fn write_posterior_csv(path: &Path, post: &EdgePosterior, names: &[String]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    writeln!(f, "{}", names.join(",")).map_err(io_err)?;
    for u in 0..post.n {
        let row: Vec<String> = (0..post.n).map(|v| post.get(u, v).to_string()).collect();
        writeln!(f, "{}", row.join(",")).map_err(io_err)?;
    }
    Ok(())
}

fn read_posterior_csv(path: &Path) -> Result<EdgePosterior> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let bad = |msg: String| Error::Data(format!("{}: {msg}", path.display()));
    let n = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .len();
    let mut p = Vec::with_capacity(n * n);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for cell in rec.iter() {
            p.push(
                cell.parse::<f64>()
                    .map_err(|e| bad(format!("bad probability '{cell}': {e}")))?,
            );
        }
    }
    if p.len() != n * n {
        return Err(bad(format!(
            "expected {n}x{n} posterior matrix, got {} cells",
            p.len()
        )));
    }
    Ok(EdgePosterior { n, p })
}

fn write_dags_csv(path: &Path, samples: &[DagSample]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    writeln!(f, "chain,step,log_score,edges").map_err(io_err)?;
    for s in samples {
        let edges: Vec<String> = s
            .dag
            .edges()
            .into_iter()
            .map(|(u, v)| format!("{u}>{v}"))
            .collect();
        writeln!(f, "{},{},{},{}", s.chain, s.step, s.log_score, edges.join(";"))
            .map_err(io_err)?;
    }
    Ok(())
}

fn write_trace_csv(path: &Path, trace: &[(usize, f64)]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    writeln!(f, "step,log_score").map_err(io_err)?;
    for &(step, score) in trace {
        writeln!(f, "{step},{score}").map_err(io_err)?;
    }
    Ok(())
}

fn write_cpdag_csv(path: &Path, c: &crate::graph::Cpdag) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    writeln!(f, "from,to,direction").map_err(io_err)?;
    for (u, v) in c.directed_edges() {
        writeln!(f, "{u},{v},->").map_err(io_err)?;
    }
    for (u, v) in c.undirected_edges() {
        writeln!(f, "{u},{v},-").map_err(io_err)?;
    }
    Ok(())
}

fn load_truth(path: &Path) -> Result<Dag> {
    let adj = read_adjacency_csv(path)?;
    let n = adj.len();
    let adj = &adj;
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| adj[u][v]).map(move |v| (u, v)))
        .collect();
    Dag::from_edges(n, &edges)
}

fn initial_space(
    file: &Option<PathBuf>,
    alpha: f64,
    d: &Dataset,
) -> Result<SearchSpace> {
    match file {
        Some(p) => {
            let s = SearchSpace::read_csv(p)?;
            if s.n() != d.n_vars {
                return Err(Error::Data(format!(
                    "space has {} variables but the dataset has {}",
                    s.n(),
                    d.n_vars
                )));
            }
            Ok(s)
        }
        None => pc_skeleton(d, alpha),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    echo_config(&a.out, a)?;
    let cfg = SimConfig {
        n: a.n,
        avg_parents: a.avg_parents,
        weight_range: (a.weight_min, a.weight_max),
        n_obs: a.n_obs,
        graph_kind: a.graph.into(),
        seed: a.seed,
        random_sign: a.random_sign,
    };
    let (truth, data) = simulate(&cfg)?;
    data.write_csv(&a.out.join("data.csv"))?;
    truth.write_edge_list(&a.out.join("truth_edges.csv"))?;
    truth.write_adjacency(&a.out.join("truth_adj.csv"))?;
    println!(
        "simulated n={} N={} edges={} -> {}",
        a.n,
        a.n_obs,
        truth.dag.edge_count(),
        a.out.display()
    );
    Ok(())
}

fn cmd_space(a: &SpaceArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    echo_config(&a.out, a)?;
    let d = a.score.load()?;
    let s = pc_skeleton(&d, a.alpha)?;
    s.write_csv(&a.out.join("skeleton.csv"))?;
    println!(
        "skeleton: {} permissible edges over {} variables -> {}",
        s.permissible().iter().map(Vec::len).sum::<usize>(),
        s.n(),
        a.out.display()
    );
    Ok(())
}

fn cmd_learn(a: &LearnArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    echo_config(&a.out, a)?;
    let d = a.score.load()?;
    let n = d.n_vars;
    let init = initial_space(&a.space, a.alpha, &d)?;
    let mut cfg = ImproveConfig::new(n, a.seed);
    cfg.chains = a.chains;
    cfg.steps_per_chain = a.steps.unwrap_or_else(|| default_steps(n, a.steps_factor));
    cfg.max_iterations = a.max_iterations;
    cfg.k_max = a.k_max;
    let (space, best, trace) = a.score.with_scorer(&d, |sc| sc.improve(&init, &cfg))?;
    space.write_csv(&a.out.join("final_space.csv"))?;
    write_adjacency_csv(&best.dag, &a.out.join("map_dag.csv"))?;
    write_cpdag_csv(&a.out.join("map_cpdag.csv"), &dag_to_cpdag(&best.dag)?)?;
    write_json(&a.out.join("trace.json"), &trace)?;
    println!(
        "learn: {} iterations, MAP log score {:.6} -> {}",
        trace.iterations.len(),
        best.log_score,
        a.out.display()
    );
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    echo_config(&a.out, a)?;
    let d = a.score.load()?;
    let n = d.n_vars;
    let space = initial_space(&a.space, a.alpha, &d)?;
    let steps = a.steps.unwrap_or_else(|| default_steps(n, a.steps_factor));
    let gamma = parse_gamma(&a.gamma)?;
    if let Some(seeds) = &a.seeds {
        if seeds.len() != a.chains {
            return Err(Error::Config(format!(
                "--seeds lists {} values for {} chains",
                seeds.len(),
                a.chains
            )));
        }
    }
    let seed_of = |chain: usize| match &a.seeds {
        Some(seeds) => seeds[chain],
        None => a.seed.wrapping_add(chain as u64),
    };
    let opts = BuildOptions {
        with_max: false,
        with_restricted: a.sampler == Sampler::Partition,
        with_extended: a.extension,
        k_max: a.k_max,
        mem_cap_bytes: BuildOptions::default().mem_cap_bytes,
    };
    let (init_perm, init_partition) = match &a.init_dag {
        Some(p) => {
            let dag = load_truth(p)?;
            let perm = dag
                .topological_order()
                .ok_or_else(|| Error::Data("--init-dag is cyclic".into()))?;
            (Some(perm), Some(crate::partition::dag_to_partition(&dag)?))
        }
        None => (None, None),
    };
    let permissible = space.permissible();
    let per_chain = a.score.with_scorer(&d, |sc| {
        let lat = sc.build(&permissible, &opts)?;
        let per_chain: Result<Vec<(Vec<DagSample>, Vec<(usize, f64)>)>> = (0..a.chains)
            .into_par_iter()
            .map(|c| match a.sampler {
                Sampler::Order => {
                    let mut cfg = ChainConfig::new(steps, seed_of(c));
                    cfg.chain_id = c;
                    cfg.thin = a.thin;
                    cfg.burn_in_fraction = a.burn_in;
                    cfg.gamma = gamma;
                    cfg.use_extension = a.extension;
                    cfg.init = init_perm.clone();
                    let r = run_chain(&cfg, &lat, Mode::Sample)?;
                    Ok((r.samples, r.trace))
                }
                Sampler::Partition => {
                    let mut cfg = PartitionConfig::new(steps, seed_of(c));
                    cfg.chain_id = c;
                    cfg.thin = a.thin;
                    cfg.burn_in_fraction = a.burn_in;
                    cfg.use_extension = a.extension;
                    cfg.init = init_partition.clone();
                    let r = run_partition_chain(&cfg, &lat)?;
                    Ok((r.samples, r.trace))
                }
            })
            .collect();
        per_chain
    })?;
    let mut all = Vec::new();
    for (c, (chain_samples, trace)) in per_chain.into_iter().enumerate() {
        write_trace_csv(&a.out.join(format!("chain_{c}_trace.csv")), &trace)?;
        all.extend(chain_samples);
    }
    write_dags_csv(&a.out.join("dags.csv"), &all)?;
    let mode = match a.posterior_mode {
        PosteriorModeArg::Dag => PosteriorMode::Dag,
        PosteriorModeArg::Cpdag => PosteriorMode::Cpdag,
    };
    let post = edge_posteriors(&all, mode)?;
    write_posterior_csv(&a.out.join("edge_posteriors.csv"), &post, &d.var_names)?;
    println!(
        "sampled {} DAGs over {} chains ({} steps each) -> {}",
        all.len(),
        a.chains,
        steps,
        a.out.display()
    );
    Ok(())
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    let pa = read_posterior_csv(&a.run_a.join("edge_posteriors.csv"))?;
    let pb = read_posterior_csv(&a.run_b.join("edge_posteriors.csv"))?;
    let diag = diagnostics(&pa, &pb, a.threshold)?;
    write_json(&a.out, &diag)?;
    match (diag.rho_squared, diag.rmse) {
        (Some(r2), Some(rmse)) => {
            println!("rho^2 = {r2:.4}, rmse = {rmse:.4} over {} edges", diag.n_edges)
        }
        _ => println!(
            "diagnostic undefined: {} qualifying edges (need >= 2 with variance)",
            diag.n_edges
        ),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    tpr: Option<f64>,
    fprn: Option<f64>,
    tp: usize,
    fp: usize,
    p: usize,
    shd: usize,
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let truth = load_truth(&a.truth)?;
    let estimate = match (&a.posterior, &a.dag) {
        (Some(p), None) => threshold_consensus(&read_posterior_csv(p)?, a.threshold),
        (None, Some(p)) => dag_to_cpdag(&load_truth(p)?)?,
        _ => {
            return Err(Error::Config(
                "eval needs exactly one of --posterior or --dag".into(),
            ))
        }
    };
    let acc = tpr_fprn(&estimate, &truth)?;
    let dist = shd(&estimate, &dag_to_cpdag(&truth)?)?;
    let report = EvalReport {
        tpr: acc.tpr,
        fprn: acc.fprn,
        tp: acc.tp,
        fp: acc.fp,
        p: acc.p,
        shd: dist,
    };
    write_json(&a.out, &report)?;
    println!(
        "tpr = {}, fprn = {}, shd = {dist}",
        report.tpr.map_or("n/a".into(), |v| format!("{v:.4}")),
        report.fprn.map_or("n/a".into(), |v| format!("{v:.4}")),
    );
    Ok(())
}

fn configure_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let workers: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer")))?;
        if workers == 0 {
            return Err(Error::Config(format!("{WORKERS_ENV} must be positive")));
        }
        // ignore AlreadyInitialized: tests may dispatch repeatedly
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    configure_workers()?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Space(a) => cmd_space(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
