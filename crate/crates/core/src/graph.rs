//! DAG and CPDAG machinery: equivalence-class conversion, skeleton metrics,
//! edge posteriors and between-run convergence diagnostics.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Directed acyclic graph over `n` nodes, adjacency stored row-major with
/// `adj[parent * n + child]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    n: usize,
    adj: Vec<bool>,
}

impl Dag {
    pub fn empty(n: usize) -> Self {
        Dag {
            n,
            adj: vec![false; n * n],
        }
    }

    /// Builds from parent→child pairs, rejecting cycles and self-loops.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Dag::empty(n);
        for &(u, v) in edges {
            if u == v || u >= n || v >= n {
                return Err(Error::Data(format!("invalid edge {u}->{v} for n={n}")));
            }
            g.adj[u * n + v] = true;
        }
        if g.topological_order().is_none() {
            return Err(Error::Data("graph contains a directed cycle".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.adj[parent * self.n + child]
    }

    pub fn set_edge(&mut self, parent: usize, child: usize, present: bool) {
        self.adj[parent * self.n + child] = present;
    }

    pub fn parents(&self, child: usize) -> Vec<usize> {
        (0..self.n).filter(|&p| self.has_edge(p, child)).collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    /// Kahn peeling; `None` if the graph is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n;
        let mut indeg = vec![0usize; n];
        for v in 0..n {
            indeg[v] = self.parents(v).len();
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop() {
            order.push(v);
            for c in 0..n {
                if self.has_edge(v, c) {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        queue.push(c);
                    }
                }
            }
        }
        if order.len() == n {
            Some(order)
        } else {
            None
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub fn skeleton_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.has_edge(u, v) || self.has_edge(v, u) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// A DAG sample with its provenance in an MCMC run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagSample {
    pub dag: Dag,
    pub chain: usize,
    pub step: usize,
    pub log_score: f64,
}

/// Completed partially directed acyclic graph: the canonical representative
/// of a Markov equivalence class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpdag {
    n: usize,
    /// directed[u*n+v]: compelled edge u→v
    directed: Vec<bool>,
    /// und[u*n+v] == und[v*n+u]: reversible edge u–v
    und: Vec<bool>,
}

impl Cpdag {
    pub fn new(n: usize) -> Self {
        Cpdag {
            n,
            directed: vec![false; n * n],
            und: vec![false; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_directed(&self, u: usize, v: usize) -> bool {
        self.directed[u * self.n + v]
    }

    #[inline]
    pub fn has_undirected(&self, u: usize, v: usize) -> bool {
        self.und[u * self.n + v]
    }

    #[inline]
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.has_directed(u, v) || self.has_directed(v, u) || self.has_undirected(u, v)
    }

    pub fn set_directed(&mut self, u: usize, v: usize) {
        self.directed[u * self.n + v] = true;
        self.und[u * self.n + v] = false;
        self.und[v * self.n + u] = false;
    }

    pub fn set_undirected(&mut self, u: usize, v: usize) {
        self.und[u * self.n + v] = true;
        self.und[v * self.n + u] = true;
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                if self.has_directed(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.has_undirected(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn skeleton_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.adjacent(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}

/// Converts a DAG into the CPDAG of its Markov equivalence class.
///
/// V-structure edges are compelled first; the remaining compelled edges are
/// found by running the orientation rules R1-R3 to closure in a fixed
/// (lexicographic) sweep order, everything else stays undirected.
pub fn dag_to_cpdag(g: &Dag) -> Result<Cpdag> {
    if !g.is_acyclic() {
        return Err(Error::Data("dag_to_cpdag requires an acyclic input".into()));
    }
    let n = g.n();
    let mut c = Cpdag::new(n);
    for (u, v) in g.skeleton_pairs() {
        c.set_undirected(u, v);
    }
    // v-structures: a -> x <- b with a, b non-adjacent
    for x in 0..n {
        let ps = g.parents(x);
        for i in 0..ps.len() {
            for j in (i + 1)..ps.len() {
                let (a, b) = (ps[i], ps[j]);
                if !g.has_edge(a, b) && !g.has_edge(b, a) {
                    c.set_directed(a, x);
                    c.set_directed(b, x);
                }
            }
        }
    }
    meek_closure(&mut c);
    Ok(c)
}

/// Orientation-rule closure (Meek R1-R3).  An undirected edge is oriented to
/// match `u→v` only when the rule forces that direction.
fn meek_closure(c: &mut Cpdag) {
    let n = c.n;
    loop {
        let mut changed = false;
        for u in 0..n {
            for v in 0..n {
                if !c.has_undirected(u, v) || u == v {
                    continue;
                }
                // R1: a -> u, u - v, a and v non-adjacent  =>  u -> v
                let r1 = (0..n).any(|a| c.has_directed(a, u) && a != v && !c.adjacent(a, v));
                // R2: u -> w -> v with u - v  =>  u -> v
                let r2 = (0..n).any(|w| c.has_directed(u, w) && c.has_directed(w, v));
                // R3: u - a, u - b, a -> v, b -> v, a and b non-adjacent  =>  u -> v
                let mut r3 = false;
                for a in 0..n {
                    if !(c.has_undirected(u, a) && c.has_directed(a, v)) {
                        continue;
                    }
                    for b in (a + 1)..n {
                        if c.has_undirected(u, b) && c.has_directed(b, v) && !c.adjacent(a, b) {
                            r3 = true;
                            break;
                        }
                    }
                    if r3 {
                        break;
                    }
                }
                if r1 || r2 || r3 {
                    c.set_directed(u, v);
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PairState {
    None,
    Und,
    Fwd,
    Rev,
}

fn pair_state(c: &Cpdag, u: usize, v: usize) -> PairState {
    if c.has_undirected(u, v) {
        PairState::Und
    } else if c.has_directed(u, v) {
        PairState::Fwd
    } else if c.has_directed(v, u) {
        PairState::Rev
    } else {
        PairState::None
    }
}

/// Structural Hamming distance between CPDAGs.
///
/// Convention: each skeleton discrepancy counts 1 and each orientation
/// mismatch (including directed vs undirected) counts 1.
pub fn shd(a: &Cpdag, b: &Cpdag) -> Result<usize> {
    if a.n() != b.n() {
        return Err(Error::Data(format!(
            "shd size mismatch: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    let mut d = 0;
    for u in 0..a.n() {
        for v in (u + 1)..a.n() {
            if pair_state(a, u, v) != pair_state(b, u, v) {
                d += 1;
            }
        }
    }
    Ok(d)
}

/// Posterior edge-probability matrix (row = parent, column = child).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgePosterior {
    pub n: usize,
    /// p[u*n+v]: posterior of u→v (DAG space) or of u incident to v with
    /// that orientation mass (CPDAG space; undirected mass appears in both
    /// ordered cells).
    pub p: Vec<f64>,
}

impl EdgePosterior {
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.p[u * self.n + v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorMode {
    Dag,
    Cpdag,
}

/// Per-edge occurrence frequency over a stream of sampled DAGs.
pub fn edge_posteriors(samples: &[DagSample], mode: PosteriorMode) -> Result<EdgePosterior> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Data("edge_posteriors needs at least one sample".into()))?;
    let n = first.dag.n();
    let mut counts = vec![0.0f64; n * n];
    for s in samples {
        match mode {
            PosteriorMode::Dag => {
                for (u, v) in s.dag.edges() {
                    counts[u * n + v] += 1.0;
                }
            }
            PosteriorMode::Cpdag => {
                let c = dag_to_cpdag(&s.dag)?;
                for (u, v) in c.directed_edges() {
                    counts[u * n + v] += 1.0;
                }
                for (u, v) in c.undirected_edges() {
                    counts[u * n + v] += 1.0;
                    counts[v * n + u] += 1.0;
                }
            }
        }
    }
    let m = samples.len() as f64;
    counts.iter_mut().for_each(|c| *c /= m);
    Ok(EdgePosterior { n, p: counts })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Squared Pearson correlation across qualifying edges, `None` when
    /// undefined (fewer than two qualifying edges or zero variance).
    pub rho_squared: Option<f64>,
    pub rmse: Option<f64>,
    pub n_edges: usize,
}

/// ρ² and RMSE between two runs' edge posteriors over edges exceeding
/// `threshold` in at least one run.
pub fn diagnostics(a: &EdgePosterior, b: &EdgePosterior, threshold: f64) -> Result<Diagnostics> {
    if a.n != b.n {
        return Err(Error::Data("diagnostics size mismatch".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for u in 0..a.n {
        for v in 0..a.n {
            if u == v {
                continue;
            }
            let (x, y) = (a.get(u, v), b.get(u, v));
            if x > threshold || y > threshold {
                xs.push(x);
                ys.push(y);
            }
        }
    }
    let m = xs.len();
    if m < 2 {
        return Ok(Diagnostics {
            rho_squared: None,
            rmse: None,
            n_edges: m,
        });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut se = 0.0;
    for i in 0..m {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
        let d = xs[i] - ys[i];
        se += d * d;
    }
    let rho2 = if sxx > 0.0 && syy > 0.0 {
        Some((sxy * sxy) / (sxx * syy))
    } else if se == 0.0 {
        // identical degenerate runs: perfect agreement
        Some(1.0)
    } else {
        None
    };
    Ok(Diagnostics {
        rho_squared: rho2,
        rmse: Some((se / m as f64).sqrt()),
        n_edges: m,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonAccuracy {
    /// TP / P; `None` when the truth has no edges.
    pub tpr: Option<f64>,
    /// FP / P (false positives scaled by the true edge count).
    pub fprn: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub p: usize,
}

/// Skeleton-level TPR and FPRn of an estimate against a ground-truth DAG.
pub fn tpr_fprn(estimate: &Cpdag, truth: &Dag) -> Result<SkeletonAccuracy> {
    if estimate.n() != truth.n() {
        return Err(Error::Data("tpr_fprn size mismatch".into()));
    }
    let truth_pairs: std::collections::BTreeSet<_> = truth.skeleton_pairs().into_iter().collect();
    let est_pairs: std::collections::BTreeSet<_> = estimate.skeleton_pairs().into_iter().collect();
    let p = truth_pairs.len();
    let tp = est_pairs.intersection(&truth_pairs).count();
    let fp = est_pairs.difference(&truth_pairs).count();
    if p == 0 {
        return Ok(SkeletonAccuracy {
            tpr: None,
            fprn: None,
            tp,
            fp,
            p,
        });
    }
    Ok(SkeletonAccuracy {
        tpr: Some(tp as f64 / p as f64),
        fprn: Some(fp as f64 / p as f64),
        tp,
        fp,
        p,
    })
}

/// Consensus graph from thresholded CPDAG-space posteriors: a pair becomes an
/// edge when either ordered cell exceeds the threshold; it is undirected when
/// both do.
pub fn threshold_consensus(post: &EdgePosterior, threshold: f64) -> Cpdag {
    let n = post.n;
    let mut c = Cpdag::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            let fwd = post.get(u, v) > threshold;
            let rev = post.get(v, u) > threshold;
            match (fwd, rev) {
                (true, true) => c.set_undirected(u, v),
                (true, false) => c.set_directed(u, v),
                (false, true) => c.set_directed(v, u),
                (false, false) => {}
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collider_stays_directed() {
        let g = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let c = dag_to_cpdag(&g).unwrap();
        assert!(c.has_directed(0, 2));
        assert!(c.has_directed(1, 2));
        assert!(c.undirected_edges().is_empty());
    }

    #[test]
    fn chain_becomes_undirected() {
        let g = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = dag_to_cpdag(&g).unwrap();
        assert!(c.directed_edges().is_empty());
        assert!(c.has_undirected(0, 1));
        assert!(c.has_undirected(1, 2));
    }

    #[test]
    fn empty_dag_empty_cpdag() {
        let c = dag_to_cpdag(&Dag::empty(4)).unwrap();
        assert!(c.directed_edges().is_empty());
        assert!(c.undirected_edges().is_empty());
    }

    #[test]
    fn cyclic_input_rejected() {
        let mut g = Dag::empty(2);
        g.set_edge(0, 1, true);
        g.set_edge(1, 0, true);
        assert!(dag_to_cpdag(&g).is_err());
        assert!(Dag::from_edges(2, &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn shd_basic_conventions() {
        let a = dag_to_cpdag(&Dag::from_edges(3, &[(0, 1)]).unwrap()).unwrap();
        assert_eq!(shd(&a, &a).unwrap(), 0);
        // extra undirected edge counts one
        let mut b = a.clone();
        b.set_undirected(1, 2);
        assert_eq!(shd(&a, &b).unwrap(), 1);
        // directed vs undirected on the same pair counts one
        let mut c = Cpdag::new(3);
        c.set_directed(0, 1);
        assert_eq!(shd(&a, &c).unwrap(), 1);
    }

    #[test]
    fn shd_symmetry_and_triangle_spot_check() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let random_cpdag = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut edges = Vec::new();
            for u in 0..4usize {
                for v in (u + 1)..4 {
                    if rng.random::<f64>() < 0.5 {
                        edges.push((u, v));
                    }
                }
            }
            dag_to_cpdag(&Dag::from_edges(4, &edges).unwrap()).unwrap()
        };
        for _ in 0..50 {
            let (a, b, c) = (
                random_cpdag(&mut rng),
                random_cpdag(&mut rng),
                random_cpdag(&mut rng),
            );
            let (ab, ba) = (shd(&a, &b).unwrap(), shd(&b, &a).unwrap());
            assert_eq!(ab, ba);
            assert!(shd(&a, &c).unwrap() <= ab + shd(&b, &c).unwrap());
        }
    }

    #[test]
    fn edge_posteriors_frequencies() {
        let g1 = Dag::from_edges(3, &[(0, 1)]).unwrap();
        let g2 = Dag::empty(3);
        let mk = |dag: &Dag, step| DagSample {
            dag: dag.clone(),
            chain: 0,
            step,
            log_score: 0.0,
        };
        let same = edge_posteriors(&[mk(&g1, 0), mk(&g1, 1)], PosteriorMode::Dag).unwrap();
        assert_eq!(same.get(0, 1), 1.0);
        assert_eq!(same.get(1, 0), 0.0);
        let half = edge_posteriors(&[mk(&g1, 0), mk(&g2, 1)], PosteriorMode::Dag).unwrap();
        assert_eq!(half.get(0, 1), 0.5);
        assert!(edge_posteriors(&[], PosteriorMode::Dag).is_err());
    }

    #[test]
    fn diagnostics_identical_and_anticorrelated() {
        let a = EdgePosterior {
            n: 2,
            p: vec![0.0, 0.9, 0.3, 0.0],
        };
        let d = diagnostics(&a, &a, 0.05).unwrap();
        assert!((d.rho_squared.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(d.rmse.unwrap(), 0.0);

        // b = 1 - a on the two qualifying edges: rho^2 is still 1 while the
        // rmse is positive, which is why both are reported.
        let b = EdgePosterior {
            n: 2,
            p: vec![0.0, 0.1, 0.7, 0.0],
        };
        let d = diagnostics(&a, &b, 0.05).unwrap();
        assert!((d.rho_squared.unwrap() - 1.0).abs() < 1e-12);
        assert!(d.rmse.unwrap() > 0.0);
    }

    #[test]
    fn tpr_fprn_cases() {
        let truth = Dag::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        let perfect = dag_to_cpdag(&truth).unwrap();
        let acc = tpr_fprn(&perfect, &truth).unwrap();
        assert_eq!(acc.tpr, Some(1.0));
        assert_eq!(acc.fprn, Some(0.0));

        let half = dag_to_cpdag(&Dag::from_edges(4, &[(0, 1)]).unwrap()).unwrap();
        let acc = tpr_fprn(&half, &truth).unwrap();
        assert_eq!(acc.tpr, Some(0.5));
        assert_eq!(acc.fprn, Some(0.0));

        let empty_truth = Dag::empty(4);
        let acc = tpr_fprn(&half, &empty_truth).unwrap();
        assert!(acc.tpr.is_none());

        let empty_est = Cpdag::new(4);
        let acc = tpr_fprn(&empty_est, &truth).unwrap();
        assert_eq!(acc.tpr, Some(0.0));
        assert_eq!(acc.fprn, Some(0.0));
    }
}
