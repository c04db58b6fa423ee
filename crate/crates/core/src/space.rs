//! Search space: the permissibility graph H, its PC-style skeleton
//! estimation, CSV import/export, and the iterative improvement loop
//! H_{i+1} = H ∪ G*_i.

use crate::data::{DataKind, Dataset};
use crate::error::{Error, Result};
use crate::graph::{dag_to_cpdag, Cpdag, DagSample};
use crate::math::spd_inverse;
use crate::order::{run_chain, ChainConfig, GammaSchedule, Mode};
use crate::tables::{BuildOptions, Lattices, LocalScorer, K_MAX_DEFAULT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::path::Path;

/// Directed permissibility graph: `allows(j, i)` means j may parent i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpace {
    n: usize,
    /// row-major, h[j*n+i] = permissible j → i; zero diagonal
    h: Vec<bool>,
    pub extension_enabled: bool,
}

impl SearchSpace {
    pub fn empty(n: usize) -> Self {
        SearchSpace {
            n,
            h: vec![false; n * n],
            extension_enabled: true,
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = SearchSpace::empty(n);
        for j in 0..n {
            for i in 0..n {
                s.h[j * n + i] = j != i;
            }
        }
        s
    }

    pub fn from_matrix(m: &[Vec<bool>]) -> Result<Self> {
        let n = m.len();
        let mut s = SearchSpace::empty(n);
        for (j, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Space("permissibility matrix not square".into()));
            }
            for (i, &v) in row.iter().enumerate() {
                if v && i == j {
                    return Err(Error::Space(format!("self-loop at node {i}")));
                }
                s.h[j * n + i] = v;
            }
        }
        Ok(s)
    }

    /// Symmetric space from undirected skeleton pairs.
    pub fn from_skeleton(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut s = SearchSpace::empty(n);
        for &(a, b) in pairs {
            if a == b || a >= n || b >= n {
                return Err(Error::Space(format!("invalid skeleton pair ({a},{b})")));
            }
            s.h[a * n + b] = true;
            s.h[b * n + a] = true;
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn allows(&self, parent: usize, child: usize) -> bool {
        self.h[parent * self.n + child]
    }

    pub fn allow(&mut self, parent: usize, child: usize) {
        if parent != child {
            self.h[parent * self.n + child] = true;
        }
    }

    /// Ordered permissible-parent lists h^i.
    pub fn permissible(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.allows(j, i)).collect())
            .collect()
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.allows(j, i)).count())
            .max()
            .unwrap_or(0)
    }

    pub fn hash(&self) -> u64 {
        crate::tables::space_hash(&self.permissible())
    }

    /// True when every edge of the CPDAG is permissible (undirected edges in
    /// both directions).
    pub fn contains_cpdag(&self, c: &Cpdag) -> bool {
        c.directed_edges().iter().all(|&(u, v)| self.allows(u, v))
            && c
                .undirected_edges()
                .iter()
                .all(|&(u, v)| self.allows(u, v) && self.allows(v, u))
    }

    /// Adds every CPDAG edge: parent direction for directed edges, both
    /// directions for undirected ones.
    pub fn union_cpdag(&mut self, c: &Cpdag) {
        for (u, v) in c.directed_edges() {
            self.allow(u, v);
        }
        for (u, v) in c.undirected_edges() {
            self.allow(u, v);
            self.allow(v, u);
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |e: csv::Error| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        let header: Vec<String> = (0..self.n).map(|i| format!("v{i}")).collect();
        w.write_record(&header).map_err(io_err)?;
        for j in 0..self.n {
            let row: Vec<&str> = (0..self.n)
                .map(|i| if self.allows(j, i) { "1" } else { "0" })
                .collect();
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let m = crate::data::read_adjacency_csv(path)?;
        SearchSpace::from_matrix(&m)
    }
}

/// PC-stable skeleton at significance `alpha`.
///
/// Continuous data: Fisher-z tests on partial correlations.  Binary data:
/// G² tests on 2×2 tables stratified by the conditioning configuration.
/// Pairs and conditioning subsets are processed lexicographically and edges
/// are removed only between levels, so the result is order-independent.
pub fn pc_skeleton(d: &Dataset, alpha: f64) -> Result<SearchSpace> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::Config("alpha must lie in (0, 1)".into()));
    }
    let n = d.n_vars;
    let tester: Box<dyn IndependenceTest> = match d.kind {
        DataKind::Continuous => Box::new(FisherZ::new(d)?),
        DataKind::Binary => Box::new(GSquared { d }),
    };
    let mut adj = vec![true; n * n];
    for i in 0..n {
        adj[i * n + i] = false;
    }
    let mut level = 0usize;
    loop {
        let snapshot = adj.clone();
        let neighbors = |v: usize| -> Vec<usize> {
            (0..n).filter(|&u| snapshot[v * n + u]).collect()
        };
        let mut any_candidate = false;
        let mut to_remove = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if !snapshot[i * n + j] {
                    continue;
                }
                let mut cands: Vec<usize> = neighbors(i);
                cands.retain(|&u| u != j);
                if cands.len() < level {
                    continue;
                }
                any_candidate = true;
                let mut removed = false;
                for s in subsets_of_size(&cands, level) {
                    if let Some(p) = tester.p_value(i, j, &s)? {
                        if p > alpha {
                            removed = true;
                            break;
                        }
                    }
                }
                if removed {
                    to_remove.push((i, j));
                }
            }
        }
        for (i, j) in to_remove {
            adj[i * n + j] = false;
            adj[j * n + i] = false;
        }
        if !any_candidate {
            break;
        }
        level += 1;
        if level >= n {
            break;
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| adj[i * n + j])
        .collect();
    SearchSpace::from_skeleton(n, &pairs)
}

/// Lexicographic subsets of fixed size.
fn subsets_of_size(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(size);
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..items.len() {
            cur.push(items[k]);
            rec(items, size, k + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, size, 0, &mut current, &mut out);
    out
}

trait IndependenceTest {
    /// p-value of the hypothesis i ⊥ j | s, or `None` when the test has no
    /// power (too few observations for the conditioning size).
    fn p_value(&self, i: usize, j: usize, s: &[usize]) -> Result<Option<f64>>;
}

struct FisherZ {
    n_obs: usize,
    n_vars: usize,
    corr: Vec<f64>,
}

impl FisherZ {
    fn new(d: &Dataset) -> Result<Self> {
        let stats = crate::data::gaussian_stats(d, crate::data::BgeHyper::default_for(d.n_vars))?;
        let n = d.n_vars;
        let mut corr = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let denom = (stats.scatter[i * n + i] * stats.scatter[j * n + j]).sqrt();
                corr[i * n + j] = if denom > 0.0 {
                    stats.scatter[i * n + j] / denom
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
            }
        }
        Ok(FisherZ {
            n_obs: d.n_obs,
            n_vars: n,
            corr,
        })
    }
}

impl IndependenceTest for FisherZ {
    fn p_value(&self, i: usize, j: usize, s: &[usize]) -> Result<Option<f64>> {
        let dof = self.n_obs as f64 - s.len() as f64 - 3.0;
        if dof <= 0.0 {
            return Ok(None);
        }
        // partial correlation from the inverse of the correlation submatrix
        let mut idx = vec![i, j];
        idx.extend_from_slice(s);
        let m = idx.len();
        let mut sub = vec![0.0; m * m];
        for (a, &x) in idx.iter().enumerate() {
            for (b, &y) in idx.iter().enumerate() {
                sub[a * m + b] = self.corr[x * self.n_vars + y];
            }
        }
        if !spd_inverse(&mut sub, m) {
            // numerically degenerate conditioning set: treat as dependent
            return Ok(Some(0.0));
        }
        let r = -sub[1] / (sub[0] * sub[m + 1]).sqrt();
        let r = r.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
        let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        let stat = dof.sqrt() * z.abs();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        Ok(Some(2.0 * (1.0 - normal.cdf(stat))))
    }
}

struct GSquared<'a> {
    d: &'a Dataset,
}

impl IndependenceTest for GSquared<'_> {
    fn p_value(&self, i: usize, j: usize, s: &[usize]) -> Result<Option<f64>> {
        let n_cfg = 1usize << s.len();
        let df = n_cfg as f64;
        if (self.d.n_obs as f64) < 10.0 * df {
            return Ok(None);
        }
        // counts[cfg][xi][xj]
        let mut counts = vec![[[0.0f64; 2]; 2]; n_cfg];
        for r in 0..self.d.n_obs {
            let mut cfg = 0usize;
            for (b, &v) in s.iter().enumerate() {
                if self.d.value(r, v) == 1.0 {
                    cfg |= 1 << b;
                }
            }
            let xi = self.d.value(r, i) as usize;
            let xj = self.d.value(r, j) as usize;
            counts[cfg][xi][xj] += 1.0;
        }
        let mut g2 = 0.0;
        for table in &counts {
            let total: f64 = table.iter().flatten().sum();
            if total == 0.0 {
                continue;
            }
            for a in 0..2 {
                for b in 0..2 {
                    let o = table[a][b];
                    if o == 0.0 {
                        continue;
                    }
                    let row: f64 = table[a][0] + table[a][1];
                    let col: f64 = table[0][b] + table[1][b];
                    let e = row * col / total;
                    g2 += 2.0 * o * (o / e).ln();
                }
            }
        }
        let chi = ChiSquared::new(df).map_err(|e| Error::Data(e.to_string()))?;
        Ok(Some(1.0 - chi.cdf(g2)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub space_hash: u64,
    pub best_log_score: f64,
    pub n_permissible_edges: usize,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterations: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct ImproveConfig {
    pub chains: usize,
    pub steps_per_chain: usize,
    pub seed: u64,
    pub gamma: GammaSchedule,
    pub max_iterations: usize,
    pub k_max: usize,
    pub mem_cap_bytes: usize,
}

impl ImproveConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        let nf = n.max(2) as f64;
        ImproveConfig {
            chains: 4,
            steps_per_chain: (20.0 * nf * nf * nf.ln()).ceil() as usize,
            seed,
            gamma: GammaSchedule::Adaptive { c: 1.0 },
            max_iterations: 20,
            k_max: K_MAX_DEFAULT,
            mem_cap_bytes: BuildOptions::default().mem_cap_bytes,
        }
    }
}

/// One MAP search over `space` extended by one outside parent: best DAG over
/// `chains` tempered order chains.
pub fn map_search<S: LocalScorer>(
    space: &SearchSpace,
    scorer: &S,
    cfg: &ImproveConfig,
    seed_offset: u64,
) -> Result<DagSample> {
    let opts = BuildOptions {
        with_max: true,
        with_restricted: false,
        with_extended: true,
        k_max: cfg.k_max,
        mem_cap_bytes: cfg.mem_cap_bytes,
    };
    let lat = Lattices::build(scorer, &space.permissible(), &opts)?;
    let results: Result<Vec<DagSample>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut ccfg = ChainConfig::new(cfg.steps_per_chain, cfg.seed.wrapping_add(seed_offset));
            ccfg.chain_id = c;
            ccfg.gamma = cfg.gamma;
            ccfg.use_extension = true;
            let res = run_chain(&ccfg, &lat, Mode::Map)?;
            res.best
                .ok_or_else(|| Error::Data("MAP chain returned no best DAG".into()))
        })
        .collect();
    let mut best: Option<DagSample> = None;
    for r in results? {
        if best.as_ref().is_none_or(|b| r.log_score > b.log_score) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::Config("improve_space needs at least one chain".into()))
}

/// Iterative search-space improvement: repeatedly MAP-search the extended
/// space, fold the best CPDAG's edges into the core, and stop once the best
/// CPDAG is contained in the core and the score stopped improving.
pub fn improve_space<S: LocalScorer>(
    initial: &SearchSpace,
    scorer: &S,
    cfg: &ImproveConfig,
) -> Result<(SearchSpace, DagSample, IterationTrace)> {
    let mut core = initial.clone();
    let mut trace = IterationTrace::default();
    let mut overall_best: Option<DagSample> = None;
    for iter in 0..cfg.max_iterations {
        let t0 = std::time::Instant::now();
        let best = map_search(&core, scorer, cfg, iter as u64)?;
        let improved = overall_best
            .as_ref()
            .is_none_or(|b| best.log_score > b.log_score + 1e-9);
        if improved {
            overall_best = Some(best.clone());
        }
        let cpdag = dag_to_cpdag(&best.dag)?;
        let contained = core.contains_cpdag(&cpdag);
        core.union_cpdag(&cpdag);
        // the trace reports the cumulative best, which is monotone
        let cum = overall_best.as_ref().expect("set above");
        trace.iterations.push(IterationRecord {
            iteration: iter,
            space_hash: core.hash(),
            best_log_score: cum.log_score,
            n_permissible_edges: core.permissible().iter().map(Vec::len).sum(),
            wall_secs: t0.elapsed().as_secs_f64(),
        });
        if contained && !improved {
            break;
        }
    }
    let best = overall_best.expect("max_iterations >= 1");
    Ok((core, best, trace))
}
