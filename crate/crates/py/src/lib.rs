//! Python bindings: a thin surface over simulation, skeleton estimation,
//! MAP learning, and posterior edge sampling.

use bnsl::bge::BgeScorer;
use bnsl::data::{gaussian_stats, simulate as sim, BgeHyper, DataKind, GraphKind, SimConfig};
use bnsl::graph::{edge_posteriors, PosteriorMode};
use bnsl::partition::{dag_to_partition, run_partition_chain, PartitionConfig};
use bnsl::space::{improve_space, pc_skeleton, ImproveConfig};
use bnsl::tables::{BuildOptions, Lattices};
use bnsl::Dataset;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: bnsl::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset(rows: Vec<Vec<f64>>, binary: bool) -> PyResult<Dataset> {
    let n_obs = rows.len();
    let n_vars = rows.first().map_or(0, Vec::len);
    if n_obs == 0 || n_vars == 0 || rows.iter().any(|r| r.len() != n_vars) {
        return Err(PyValueError::new_err(
            "data must be a non-empty list of equal-length rows",
        ));
    }
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let names = (0..n_vars).map(|i| format!("v{i}")).collect();
    let kind = if binary {
        DataKind::Binary
    } else {
        DataKind::Continuous
    };
    Dataset::new(kind, values, n_vars, names).map_err(err)
}

fn adjacency(dag: &bnsl::Dag) -> Vec<Vec<u8>> {
    let n = dag.n();
    (0..n)
        .map(|u| (0..n).map(|v| dag.has_edge(u, v) as u8).collect())
        .collect()
}

fn default_steps(n: usize) -> usize {
    (20.0 * (n * n) as f64 * (n.max(2) as f64).ln()).ceil() as usize
}

/// Simulates a random DAG and linear-Gaussian data; returns
/// (adjacency, data rows).
#[pyfunction]
#[pyo3(signature = (n, n_obs, avg_parents=2.0, seed=0))]
fn simulate(
    n: usize,
    n_obs: usize,
    avg_parents: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<u8>>, Vec<Vec<f64>>)> {
    let cfg = SimConfig {
        n,
        avg_parents,
        weight_range: (0.4, 2.0),
        n_obs,
        graph_kind: GraphKind::Erdos,
        seed,
        random_sign: false,
    };
    let (truth, data) = sim(&cfg).map_err(err)?;
    let rows = (0..n_obs)
        .map(|r| (0..n).map(|c| data.value(r, c)).collect())
        .collect();
    Ok((adjacency(&truth.dag), rows))
}

/// PC-stable skeleton as an allowed-parent boolean matrix
/// (entry [u][v]: u may be a parent of v).
#[pyfunction]
#[pyo3(signature = (data, alpha=0.05, binary=false))]
fn skeleton(data: Vec<Vec<f64>>, alpha: f64, binary: bool) -> PyResult<Vec<Vec<bool>>> {
    let d = dataset(data, binary)?;
    let space = pc_skeleton(&d, alpha).map_err(err)?;
    let n = space.n();
    Ok((0..n)
        .map(|u| (0..n).map(|v| space.allows(u, v)).collect())
        .collect())
}

/// MAP structure learning with iterative search-space improvement over the
/// BGe score; returns (map adjacency, log score).
#[pyfunction]
#[pyo3(signature = (data, alpha=0.05, seed=0, steps=None, chains=2))]
fn learn(
    data: Vec<Vec<f64>>,
    alpha: f64,
    seed: u64,
    steps: Option<usize>,
    chains: usize,
) -> PyResult<(Vec<Vec<u8>>, f64)> {
    let d = dataset(data, false)?;
    let space = pc_skeleton(&d, alpha).map_err(err)?;
    let stats = gaussian_stats(&d, BgeHyper::default_for(d.n_vars)).map_err(err)?;
    let scorer = BgeScorer::new(&stats).map_err(err)?;
    let mut cfg = ImproveConfig::new(d.n_vars, seed);
    cfg.chains = chains;
    if let Some(s) = steps {
        cfg.steps_per_chain = s;
    }
    let (_space, best, _trace) = improve_space(&space, &scorer, &cfg).map_err(err)?;
    Ok((adjacency(&best.dag), best.log_score))
}

/// Posterior edge probabilities (CPDAG space) from partition MCMC on the
/// iteratively improved search space, warm-started at the MAP DAG.
#[pyfunction]
#[pyo3(signature = (data, alpha=0.05, seed=0, steps=None, chains=2))]
fn edge_posterior(
    data: Vec<Vec<f64>>,
    alpha: f64,
    seed: u64,
    steps: Option<usize>,
    chains: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let d = dataset(data, false)?;
    let n = d.n_vars;
    let space = pc_skeleton(&d, alpha).map_err(err)?;
    let stats = gaussian_stats(&d, BgeHyper::default_for(n)).map_err(err)?;
    let scorer = BgeScorer::new(&stats).map_err(err)?;
    let mut cfg = ImproveConfig::new(n, seed);
    cfg.chains = chains;
    let (final_space, best, _trace) = improve_space(&space, &scorer, &cfg).map_err(err)?;
    let lat = Lattices::build(
        &scorer,
        &final_space.permissible(),
        &BuildOptions {
            with_restricted: true,
            ..BuildOptions::default()
        },
    )
    .map_err(err)?;
    let init = dag_to_partition(&best.dag).map_err(err)?;
    let mut samples = Vec::new();
    for c in 0..chains {
        let mut pcfg = PartitionConfig::new(steps.unwrap_or_else(|| default_steps(n)), seed);
        pcfg.chain_id = c;
        pcfg.init = Some(init.clone());
        samples.extend(run_partition_chain(&pcfg, &lat).map_err(err)?.samples);
    }
    let post = edge_posteriors(&samples, PosteriorMode::Cpdag).map_err(err)?;
    Ok((0..n)
        .map(|u| (0..n).map(|v| post.get(u, v)).collect())
        .collect())
}

#[pymodule]
fn bnsl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(skeleton, m)?)?;
    m.add_function(wrap_pyfunction!(learn, m)?)?;
    m.add_function(wrap_pyfunction!(edge_posterior, m)?)?;
    Ok(())
}
