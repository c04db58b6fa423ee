//! Shared oracles for integration tests: exhaustive DAG enumeration and
//! exact posterior computation at small n.

use bnsl::graph::{Dag, DagSample};
use bnsl::math::logsumexp;

/// Every DAG on `n` nodes (n ≤ 4), by filtering all directed graphs.
pub fn all_dags(n: usize) -> Vec<Dag> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    assert!(pairs.len() <= 16, "enumeration oracle is for small n");
    let mut out = Vec::new();
    for mask in 0..(1u64 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &e)| e)
            .collect();
        if let Ok(d) = Dag::from_edges(n, &edges) {
            out.push(d);
        }
    }
    out
}

/// Exact DAG-space edge posterior under a decomposable score: p[u*n+v] is
/// the posterior probability of the edge u→v over all DAGs on n nodes.
pub fn exact_edge_posterior(n: usize, score: impl Fn(usize, &[usize]) -> f64) -> Vec<f64> {
    let dags = all_dags(n);
    let scores: Vec<f64> = dags
        .iter()
        .map(|d| (0..n).map(|v| score(v, &d.parents(v))).sum())
        .collect();
    let z = logsumexp(&scores);
    let mut p = vec![0.0f64; n * n];
    for (d, &s) in dags.iter().zip(&scores) {
        let w = (s - z).exp();
        for (u, v) in d.edges() {
            p[u * n + v] += w;
        }
    }
    p
}

/// Empirical DAG-space edge frequencies of a sample stream.
pub fn empirical_edge_posterior(n: usize, samples: &[DagSample]) -> Vec<f64> {
    let mut p = vec![0.0f64; n * n];
    for s in samples {
        for (u, v) in s.dag.edges() {
            p[u * n + v] += 1.0;
        }
    }
    for x in &mut p {
        *x /= samples.len() as f64;
    }
    p
}

/// Total variation distance between two distributions over the same support.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// All ordered set partitions of {0, …, n−1} with ascending labels inside
/// each element (13 for n = 3).
pub fn ordered_set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(rest: &[usize], acc: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if rest.is_empty() {
            out.push(acc.clone());
            return;
        }
        for mask in 1..(1usize << rest.len()) {
            let elem: Vec<usize> = rest
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect();
            let remaining: Vec<usize> = rest
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, &v)| v)
                .collect();
            acc.push(elem);
            rec(&remaining, acc, out);
            acc.pop();
        }
    }
    let nodes: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    rec(&nodes, &mut Vec::new(), &mut out);
    out
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}
