//! Data ingestion, sufficient statistics and synthetic benchmark generation.

use crate::error::{Error, Result};
use crate::graph::Dag;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Continuous,
    Binary,
}

/// Observation matrix: rows are observations, columns are variables.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub n_vars: usize,
    pub n_obs: usize,
    pub kind: DataKind,
    /// row-major `n_obs x n_vars`
    pub values: Vec<f64>,
    pub var_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        kind: DataKind,
        values: Vec<f64>,
        n_vars: usize,
        var_names: Vec<String>,
    ) -> Result<Self> {
        if n_vars == 0 || values.len() % n_vars != 0 {
            return Err(Error::Data("value matrix shape mismatch".into()));
        }
        let n_obs = values.len() / n_vars;
        if n_obs == 0 {
            return Err(Error::Data("dataset needs at least one observation".into()));
        }
        if var_names.len() != n_vars {
            return Err(Error::Data("variable name count mismatch".into()));
        }
        {
            let mut seen = std::collections::BTreeSet::new();
            for name in &var_names {
                if !seen.insert(name) {
                    return Err(Error::Data(format!("duplicate variable name `{name}`")));
                }
            }
        }
        let d = Dataset {
            n_vars,
            n_obs,
            kind,
            values,
            var_names,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        for r in 0..self.n_obs {
            for c in 0..self.n_vars {
                let v = self.value(r, c);
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: r + 1,
                        col: c + 1,
                        msg: "missing or non-finite value".into(),
                    });
                }
                if self.kind == DataKind::Binary && v != 0.0 && v != 1.0 {
                    return Err(Error::Parse {
                        row: r + 1,
                        col: c + 1,
                        msg: format!("binary dataset contains value {v}"),
                    });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, obs: usize, var: usize) -> f64 {
        self.values[obs * self.n_vars + var]
    }

    pub fn column(&self, var: usize) -> Vec<f64> {
        (0..self.n_obs).map(|r| self.value(r, var)).collect()
    }

    /// Loads a comma-separated file with a mandatory header row.
    pub fn load_csv(path: &Path, kind: DataKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            })?;
        let var_names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                col: 1,
                msg: e.to_string(),
            })?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let n_vars = var_names.len();
        let mut values = Vec::new();
        for (ri, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                row: ri + 2,
                col: 1,
                msg: e.to_string(),
            })?;
            if rec.len() != n_vars {
                return Err(Error::Parse {
                    row: ri + 2,
                    col: 1,
                    msg: format!("expected {n_vars} fields, found {}", rec.len()),
                });
            }
            for (ci, field) in rec.iter().enumerate() {
                let field = field.trim();
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: ri + 2,
                    col: ci + 1,
                    msg: format!("cannot parse `{field}` as a number"),
                })?;
                values.push(v);
            }
        }
        Dataset::new(kind, values, n_vars, var_names)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
        let io_err = |e: csv::Error| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        };
        w.write_record(&self.var_names).map_err(io_err)?;
        for r in 0..self.n_obs {
            let row: Vec<String> = (0..self.n_vars)
                .map(|c| format!("{}", self.value(r, c)))
                .collect();
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }

    /// Stable content hash, used to key the lattice cache.
    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.values.len() * 8 + 16);
        bytes.extend_from_slice(&(self.n_vars as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n_obs as u64).to_le_bytes());
        bytes.push(match self.kind {
            DataKind::Continuous => 0,
            DataKind::Binary => 1,
        });
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::math::fnv1a64(&bytes)
    }
}

/// BGe hyperparameters.  `alpha_w` must exceed `n + 1`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BgeHyper {
    pub alpha_mu: f64,
    pub alpha_w: f64,
    pub t_scale: f64,
}

impl BgeHyper {
    /// alpha_mu = 1, alpha_w = n + alpha_mu + 1 and the matching prior
    /// precision scale t = alpha_mu (alpha_w - n - 1) / (alpha_mu + 1).
    pub fn default_for(n_vars: usize) -> Self {
        let alpha_mu = 1.0;
        let alpha_w = n_vars as f64 + alpha_mu + 1.0;
        let t_scale = alpha_mu * (alpha_w - n_vars as f64 - 1.0) / (alpha_mu + 1.0);
        BgeHyper {
            alpha_mu,
            alpha_w,
            t_scale,
        }
    }

    pub fn validate(&self, n_vars: usize) -> Result<()> {
        if self.alpha_mu <= 0.0 || self.t_scale <= 0.0 {
            return Err(Error::Config("alpha_mu and t_scale must be positive".into()));
        }
        if self.alpha_w <= n_vars as f64 + 1.0 {
            return Err(Error::Config(format!(
                "alpha_w must exceed n + 1 = {}",
                n_vars + 1
            )));
        }
        Ok(())
    }
}

/// Sufficient statistics of a continuous dataset for the BGe score.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub n_obs: usize,
    pub n_vars: usize,
    /// centered cross-products, row-major `n x n`
    pub scatter: Vec<f64>,
    pub means: Vec<f64>,
    pub hyper: BgeHyper,
}

/// Computes mean vector and centered scatter matrix.
pub fn gaussian_stats(d: &Dataset, hyper: BgeHyper) -> Result<GaussianStats> {
    if d.kind != DataKind::Continuous {
        return Err(Error::Data("gaussian_stats requires continuous data".into()));
    }
    hyper.validate(d.n_vars)?;
    let (n, m) = (d.n_vars, d.n_obs);
    let mut means = vec![0.0; n];
    for r in 0..m {
        for c in 0..n {
            means[c] += d.value(r, c);
        }
    }
    means.iter_mut().for_each(|v| *v /= m as f64);
    let mut scatter = vec![0.0; n * n];
    for r in 0..m {
        for i in 0..n {
            let di = d.value(r, i) - means[i];
            for j in 0..=i {
                scatter[i * n + j] += di * (d.value(r, j) - means[j]);
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            scatter[i * n + j] = scatter[j * n + i];
        }
    }
    Ok(GaussianStats {
        n_obs: m,
        n_vars: n,
        scatter,
        means,
        hyper,
    })
}

/// A generating DAG with its linear-SEM edge weights.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub dag: Dag,
    /// weights[u*n+v] is nonzero exactly when u→v is an edge
    pub weights: Vec<f64>,
}

impl GroundTruth {
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let n = self.dag.n();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
        let io_err = |e: csv::Error| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        };
        w.write_record(["from", "to", "weight"]).map_err(io_err)?;
        for (u, v) in self.dag.edges() {
            w.write_record([
                u.to_string(),
                v.to_string(),
                format!("{}", self.weights[u * n + v]),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok(())
    }

    pub fn write_adjacency(&self, path: &Path) -> Result<()> {
        write_adjacency_csv(&self.dag, path)
    }
}

/// 0/1 adjacency CSV with a node-name header (v0..v{n-1}).
pub fn write_adjacency_csv(dag: &Dag, path: &Path) -> Result<()> {
    let n = dag.n();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    let header: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    w.write_record(&header).map_err(io_err)?;
    for u in 0..n {
        let row: Vec<&str> = (0..n)
            .map(|v| if dag.has_edge(u, v) { "1" } else { "0" })
            .collect();
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Reads a 0/1 adjacency CSV (header row ignored beyond its length).
pub fn read_adjacency_csv(path: &Path) -> Result<Vec<Vec<bool>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    let n = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            col: 1,
            msg: e.to_string(),
        })?
        .len();
    let mut rows = Vec::new();
    for (ri, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: ri + 2,
            col: 1,
            msg: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(n);
        for (ci, f) in rec.iter().enumerate() {
            match f.trim() {
                "0" => row.push(false),
                "1" => row.push(true),
                other => {
                    return Err(Error::Parse {
                        row: ri + 2,
                        col: ci + 1,
                        msg: format!("expected 0/1, found `{other}`"),
                    })
                }
            }
        }
        if row.len() != n {
            return Err(Error::Parse {
                row: ri + 2,
                col: 1,
                msg: "ragged adjacency row".into(),
            });
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::Data(format!(
            "adjacency matrix is {}x{n}, expected square",
            rows.len()
        )));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    /// lower-triangular random DAG with a fixed edge probability
    Uniform,
    /// Erdős–Rényi pairs oriented along a random node order
    Erdos,
    /// Barabási–Albert style preferential attachment
    Powerlaw,
    /// two Erdős–Rényi islands with sparse interconnections
    Islands,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub avg_parents: f64,
    pub weight_range: (f64, f64),
    pub n_obs: usize,
    pub graph_kind: GraphKind,
    pub seed: u64,
    /// draw each weight's sign uniformly at random (default keeps all
    /// weights positive, matching the usual benchmark convention)
    pub random_sign: bool,
}

/// Samples a ground-truth DAG and data from the linear-Gaussian structural
/// model with unit noise and zero intercepts.
pub fn simulate(cfg: &SimConfig) -> Result<(GroundTruth, Dataset)> {
    if cfg.n < 2 {
        return Err(Error::Config("simulate requires n >= 2".into()));
    }
    if cfg.avg_parents >= (cfg.n - 1) as f64 {
        return Err(Error::Config(format!(
            "avg_parents = {} is impossible for n = {}",
            cfg.avg_parents, cfg.n
        )));
    }
    let (lo, hi) = cfg.weight_range;
    if lo >= hi {
        return Err(Error::Config("weight range must satisfy lo < hi".into()));
    }
    if cfg.n_obs == 0 {
        return Err(Error::Config("n_obs must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;

    // Random topological labelling: position in `order` decides direction.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0usize; n];
    for (pos, &node) in order.iter().enumerate() {
        rank[node] = pos;
    }

    let p_edge = (2.0 * cfg.avg_parents / n as f64).min(1.0);
    let mut adj = vec![false; n * n];
    let set = |adj: &mut Vec<bool>, a: usize, b: usize| {
        // orient along the topological labelling
        if rank[a] < rank[b] {
            adj[a * n + b] = true;
        } else {
            adj[b * n + a] = true;
        }
    };
    match cfg.graph_kind {
        GraphKind::Uniform | GraphKind::Erdos => {
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.random::<f64>() < p_edge {
                        set(&mut adj, a, b);
                    }
                }
            }
        }
        GraphKind::Powerlaw => {
            // preferential attachment along the node order; each newcomer
            // draws ~avg_parents parents among earlier nodes, weight deg+1
            let m = cfg.avg_parents.round().max(1.0) as usize;
            let mut deg = vec![1.0f64; n];
            for pos in 1..n {
                let node = order[pos];
                let k = m.min(pos);
                for _ in 0..k {
                    let total: f64 = (0..pos).map(|q| deg[order[q]]).sum();
                    let mut t = rng.random::<f64>() * total;
                    let mut chosen = order[0];
                    for q in 0..pos {
                        t -= deg[order[q]];
                        if t <= 0.0 {
                            chosen = order[q];
                            break;
                        }
                    }
                    if !adj[chosen * n + node] {
                        adj[chosen * n + node] = true;
                        deg[chosen] += 1.0;
                        deg[node] += 1.0;
                    }
                }
            }
        }
        GraphKind::Islands => {
            let half = n / 2;
            // within-island density compensates the halved pair pool
            let p_within = (2.0 * p_edge).min(1.0);
            let p_cross = 0.1 * p_within;
            for a in 0..n {
                for b in (a + 1)..n {
                    let same = (a < half) == (b < half);
                    let p = if same { p_within } else { p_cross };
                    if rng.random::<f64>() < p {
                        set(&mut adj, a, b);
                    }
                }
            }
        }
    }

    let mut dag = Dag::empty(n);
    let mut weights = vec![0.0f64; n * n];
    for u in 0..n {
        for v in 0..n {
            if adj[u * n + v] {
                dag.set_edge(u, v, true);
                let mut w = lo + rng.random::<f64>() * (hi - lo);
                if cfg.random_sign && rng.random::<bool>() {
                    w = -w;
                }
                weights[u * n + v] = w;
            }
        }
    }
    debug_assert!(dag.is_acyclic());

    // X_i = sum_j w_ji X_j + eps, eps ~ N(0,1), filled in topological order
    let mut values = vec![0.0f64; cfg.n_obs * n];
    for r in 0..cfg.n_obs {
        for &node in &order {
            let mut x: f64 = rng.sample(StandardNormal);
            for p in 0..n {
                if adj[p * n + node] {
                    x += weights[p * n + node] * values[r * n + p];
                }
            }
            values[r * n + node] = x;
        }
    }
    let names = (0..n).map(|i| format!("v{i}")).collect();
    let data = Dataset::new(DataKind::Continuous, values, n, names)?;
    Ok((GroundTruth { dag, weights }, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_csv(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_continuous_csv() {
        let f = toy_csv("a,b,c\n1,2,3\n4,5,6\n");
        let d = Dataset::load_csv(f.path(), DataKind::Continuous).unwrap();
        assert_eq!(d.n_vars, 3);
        assert_eq!(d.n_obs, 2);
        assert_eq!(d.value(1, 2), 6.0);
    }

    #[test]
    fn na_cell_reports_location() {
        let f = toy_csv("a,b\n1,2\n3,NA\n");
        let err = Dataset::load_csv(f.path(), DataKind::Continuous).unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!((row, col), (3, 2));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn binary_domain_enforced() {
        let f = toy_csv("a,b\n0,1\n1,2\n");
        assert!(Dataset::load_csv(f.path(), DataKind::Binary).is_err());
    }

    #[test]
    fn scatter_hand_cases() {
        let hyper = BgeHyper::default_for(2);
        // single observation: zero scatter
        let d = Dataset::new(
            DataKind::Continuous,
            vec![3.0, -1.0],
            2,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let s = gaussian_stats(&d, hyper).unwrap();
        assert_eq!(s.scatter, vec![0.0; 4]);

        // (0,0) and (2,2): centered cross products are all 2
        let d = Dataset::new(
            DataKind::Continuous,
            vec![0.0, 0.0, 2.0, 2.0],
            2,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let s = gaussian_stats(&d, hyper).unwrap();
        for v in &s.scatter {
            assert!((v - 2.0).abs() < 1e-12);
        }

        // duplicated rows: zero scatter
        let d = Dataset::new(
            DataKind::Continuous,
            vec![1.5, -2.0, 1.5, -2.0, 1.5, -2.0],
            2,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let s = gaussian_stats(&d, hyper).unwrap();
        for v in &s.scatter {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_matches_brute_force() {
        let cfg = SimConfig {
            n: 5,
            avg_parents: 1.0,
            weight_range: (0.4, 2.0),
            n_obs: 10,
            graph_kind: GraphKind::Uniform,
            seed: 11,
            random_sign: false,
        };
        let (_, d) = simulate(&cfg).unwrap();
        let s = gaussian_stats(&d, BgeHyper::default_for(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let mut acc = 0.0;
                for r in 0..d.n_obs {
                    acc += (d.value(r, i) - s.means[i]) * (d.value(r, j) - s.means[j]);
                }
                let got = s.scatter[i * 5 + j];
                assert!(
                    (acc - got).abs() <= 1e-12 * acc.abs().max(1.0),
                    "({i},{j}): {acc} vs {got}"
                );
            }
        }
    }

    #[test]
    fn simulate_determinism_and_acyclicity() {
        let cfg = SimConfig {
            n: 12,
            avg_parents: 2.0,
            weight_range: (0.4, 2.0),
            n_obs: 25,
            graph_kind: GraphKind::Erdos,
            seed: 99,
            random_sign: false,
        };
        let (g1, d1) = simulate(&cfg).unwrap();
        let (g2, d2) = simulate(&cfg).unwrap();
        assert_eq!(g1.dag, g2.dag);
        assert_eq!(d1.values, d2.values);
        assert!(g1.dag.is_acyclic());
        for (u, v) in g1.dag.edges() {
            let w = g1.weights[u * 12 + v].abs();
            assert!((0.4..=2.0).contains(&w));
        }
    }

    #[test]
    fn simulate_expected_edge_count() {
        // average edge count over seeds should be near 2(n-1)
        let mut total = 0usize;
        let trials = 60;
        for seed in 0..trials {
            let cfg = SimConfig {
                n: 20,
                avg_parents: 2.0,
                weight_range: (0.4, 2.0),
                n_obs: 1,
                graph_kind: GraphKind::Uniform,
                seed,
                random_sign: false,
            };
            let (g, _) = simulate(&cfg).unwrap();
            total += g.dag.edge_count();
        }
        let avg = total as f64 / trials as f64;
        assert!((avg - 38.0).abs() < 4.0, "avg edges {avg}");
    }

    #[test]
    fn simulate_empty_graph() {
        let cfg = SimConfig {
            n: 6,
            avg_parents: 0.0,
            weight_range: (0.4, 2.0),
            n_obs: 500,
            graph_kind: GraphKind::Uniform,
            seed: 3,
            random_sign: false,
        };
        let (g, d) = simulate(&cfg).unwrap();
        assert_eq!(g.dag.edge_count(), 0);
        // columns should be roughly unit variance
        for c in 0..6 {
            let col = d.column(c);
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / col.len() as f64;
            assert!((v - 1.0).abs() < 0.3, "col {c} variance {v}");
        }
    }

    #[test]
    fn simulate_rejects_impossible_density() {
        let cfg = SimConfig {
            n: 4,
            avg_parents: 3.0,
            weight_range: (0.4, 2.0),
            n_obs: 10,
            graph_kind: GraphKind::Uniform,
            seed: 0,
            random_sign: false,
        };
        assert!(simulate(&cfg).is_err());
    }

    #[test]
    fn islands_and_powerlaw_are_acyclic() {
        for kind in [GraphKind::Islands, GraphKind::Powerlaw] {
            let cfg = SimConfig {
                n: 16,
                avg_parents: 2.0,
                weight_range: (0.4, 2.0),
                n_obs: 5,
                graph_kind: kind,
                seed: 17,
                random_sign: false,
            };
            let (g, _) = simulate(&cfg).unwrap();
            assert!(g.dag.is_acyclic());
            assert!(g.dag.edge_count() > 0);
        }
    }

    #[test]
    fn adjacency_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("adj.csv");
        let dag = Dag::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        write_adjacency_csv(&dag, &p).unwrap();
        let m = read_adjacency_csv(&p).unwrap();
        for u in 0..4 {
            for v in 0..4 {
                assert_eq!(m[u][v], dag.has_edge(u, v));
            }
        }
    }
}
