//! Partition MCMC: unbiased DAG posterior sampling through labelled ordered
//! partitions.
//!
//! Elements are ordered left to right and the rightmost element holds the
//! outpoints: a node's parents must lie in elements strictly to its right,
//! with at least one parent in the adjacent element.  Every DAG corresponds
//! to exactly one labelled partition, so averaging over partition samples is
//! free of the order-MCMC bias.

use crate::error::{Error, Result};
use crate::graph::{Dag, DagSample};
use crate::math::{logaddexp, logsumexp};
use crate::tables::{banned_index, ternary_index, Lattices, NodeLattice};
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    /// elems[e] = ascending node labels of element e; rightmost = outpoints
    pub elems: Vec<Vec<usize>>,
    /// element index of each node
    pub node_elem: Vec<usize>,
    pub contrib: Vec<f64>,
    pub total: f64,
    use_ext: bool,
}

impl PartitionState {
    pub fn new(elems: Vec<Vec<usize>>, lat: &Lattices, use_ext: bool) -> Result<Self> {
        let n = lat.n();
        let mut node_elem = vec![usize::MAX; n];
        let mut seen = 0usize;
        for (e, el) in elems.iter().enumerate() {
            if el.is_empty() {
                return Err(Error::Data("empty partition element".into()));
            }
            if el.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Data(
                    "partition elements must list nodes in ascending order".into(),
                ));
            }
            for &v in el {
                if v >= n || node_elem[v] != usize::MAX {
                    return Err(Error::Data("invalid partition element member".into()));
                }
                node_elem[v] = e;
                seen += 1;
            }
        }
        if seen != n {
            return Err(Error::Data("partition does not cover all nodes".into()));
        }
        let mut s = PartitionState {
            elems,
            node_elem,
            contrib: vec![0.0; n],
            total: 0.0,
            use_ext,
        };
        s.rescore_all(lat);
        Ok(s)
    }

    /// Single-element partition (the empty DAG's representation).
    pub fn single(lat: &Lattices, use_ext: bool) -> Self {
        let n = lat.n();
        Self::new(vec![(0..n).collect()], lat, use_ext).expect("valid by construction")
    }

    pub fn lambda(&self) -> Vec<usize> {
        self.elems.iter().map(Vec::len).collect()
    }

    pub fn perm(&self) -> Vec<usize> {
        self.elems.iter().flatten().copied().collect()
    }

    pub fn m(&self) -> usize {
        self.elems.len()
    }

    fn rescore_all(&mut self, lat: &Lattices) {
        for v in 0..self.contrib.len() {
            self.contrib[v] = self.node_contribution(lat, v);
        }
        self.total = self.contrib.iter().sum();
    }

    fn rescore_elements(&mut self, lat: &Lattices, lo: usize, hi: usize) {
        let hi = hi.min(self.m().saturating_sub(1));
        for e in lo..=hi {
            for i in 0..self.elems[e].len() {
                let v = self.elems[e][i];
                let new = self.node_contribution(lat, v);
                self.total += new - self.contrib[v];
                self.contrib[v] = new;
            }
        }
    }

    /// Banned and needed position masks of `v`'s permissible parents.
    fn masks(&self, nl: &NodeLattice, v: usize) -> (usize, usize) {
        let e = self.node_elem[v];
        let mut banned = 0usize;
        let mut needed = 0usize;
        for (b, &p) in nl.h.iter().enumerate() {
            let f = self.node_elem[p];
            if f <= e {
                banned |= 1 << b;
            } else if f == e + 1 {
                needed |= 1 << b;
            }
        }
        (banned, needed)
    }

    fn node_contribution(&self, lat: &Lattices, v: usize) -> f64 {
        let nl = &lat.nodes[v];
        let e = self.node_elem[v];
        if e == self.m() - 1 {
            // outpoints take no parents
            return nl.raw[0];
        }
        let k = nl.k();
        let (banned, needed) = self.masks(nl, v);
        let g = ternary_index(k, banned, needed).expect("disjoint by construction");
        let restricted = nl
            .restricted
            .as_ref()
            .expect("partition MCMC requires restricted tables");
        let mut acc = if needed != 0 {
            restricted[g]
        } else {
            f64::NEG_INFINITY
        };
        if self.use_ext {
            let allowed = banned_index(k, banned);
            for ext in &nl.ext {
                let f = self.node_elem[ext.j];
                if f == e + 1 {
                    // the outside parent alone satisfies the constraint
                    acc = logaddexp(acc, ext.summed[allowed]);
                } else if f > e + 1 {
                    let er = ext
                        .restricted
                        .as_ref()
                        .expect("partition MCMC requires restricted tables");
                    acc = logaddexp(acc, er[g]);
                }
            }
        }
        acc
    }

    pub fn full_rescore(&mut self, lat: &Lattices) {
        self.rescore_all(lat);
    }
}

/// Unique labelled ordered partition of a DAG by recursive outpoint peeling.
pub fn dag_to_partition(g: &Dag) -> Result<Vec<Vec<usize>>> {
    if !g.is_acyclic() {
        return Err(Error::Data("dag_to_partition requires an acyclic input".into()));
    }
    let n = g.n();
    let mut remaining: Vec<bool> = vec![true; n];
    let mut left = n;
    let mut peeled: Vec<Vec<usize>> = Vec::new();
    while left > 0 {
        let outpoints: Vec<usize> = (0..n)
            .filter(|&v| {
                remaining[v] && (0..n).all(|p| !remaining[p] || !g.has_edge(p, v))
            })
            .collect();
        debug_assert!(!outpoints.is_empty());
        for &v in &outpoints {
            remaining[v] = false;
        }
        left -= outpoints.len();
        peeled.push(outpoints);
    }
    peeled.reverse();
    Ok(peeled)
}

/// log P(Λ | D) of a labelled partition.
pub fn score_partition(elems: Vec<Vec<usize>>, lat: &Lattices, use_ext: bool) -> Result<f64> {
    Ok(PartitionState::new(elems, lat, use_ext)?.total)
}

/// Size of the split/join neighborhood: Σ_j (2^{λ_j} − 2) + (m − 1).
pub fn split_join_neighborhood(lambda: &[usize]) -> usize {
    lambda.iter().map(|&l| (1usize << l) - 2).sum::<usize>() + lambda.len() - 1
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn reindex(s: &mut PartitionState) {
    for (e, el) in s.elems.iter().enumerate() {
        for &v in el {
            s.node_elem[v] = e;
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PartitionMoveStats {
    pub split_join_proposed: usize,
    pub split_join_accepted: usize,
    pub adjacent_swap_proposed: usize,
    pub adjacent_swap_accepted: usize,
    pub global_swap_proposed: usize,
    pub global_swap_accepted: usize,
    pub relocations: usize,
}

/// Split/join move: uniform proposal from the neighborhood, accepted with
/// min{1, |nbd(Λ)| P(Λ′) / (|nbd(Λ′)| P(Λ))}.
pub fn move_split_join(s: &mut PartitionState, lat: &Lattices, rng: &mut impl Rng) -> bool {
    let lambda = s.lambda();
    let nbd = split_join_neighborhood(&lambda);
    if nbd == 0 {
        return false;
    }
    let pick = rng.random_range(0..nbd);
    let m = s.m();
    let mut prop = s.clone();
    if pick < m - 1 {
        // join elements pick and pick+1
        let e = pick;
        let right = prop.elems.remove(e + 1);
        prop.elems[e] = merge_sorted(&prop.elems[e], &right);
        reindex(&mut prop);
        prop.rescore_elements(lat, e.saturating_sub(1), e);
    } else {
        // split: locate the element and the proper nonempty subset
        let mut r = pick - (m - 1);
        let mut e = 0usize;
        loop {
            let options = (1usize << lambda[e]) - 2;
            if r < options {
                break;
            }
            r -= options;
            e += 1;
        }
        let subset_mask = r + 1; // 1 ..= 2^λ − 2
        let el = prop.elems[e].clone();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (b, &v) in el.iter().enumerate() {
            if subset_mask & (1 << b) != 0 {
                left.push(v);
            } else {
                right.push(v);
            }
        }
        prop.elems[e] = left;
        prop.elems.insert(e + 1, right);
        reindex(&mut prop);
        prop.rescore_elements(lat, e.saturating_sub(1), e + 1);
    }
    let nbd_new = split_join_neighborhood(&prop.lambda());
    let log_ratio = (nbd as f64).ln() - (nbd_new as f64).ln() + prop.total - s.total;
    if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
        *s = prop;
        true
    } else {
        false
    }
}

/// Swap of one node from element e with one from element e+1; Metropolis.
pub fn move_adjacent_swap(s: &mut PartitionState, lat: &Lattices, rng: &mut impl Rng) -> bool {
    let m = s.m();
    if m < 2 {
        return false;
    }
    let e = rng.random_range(0..m - 1);
    let iu = rng.random_range(0..s.elems[e].len());
    let iv = rng.random_range(0..s.elems[e + 1].len());
    let (u, v) = (s.elems[e][iu], s.elems[e + 1][iv]);
    let mut prop = s.clone();
    prop.elems[e].retain(|&x| x != u);
    prop.elems[e + 1].retain(|&x| x != v);
    let at = prop.elems[e].partition_point(|&x| x < v);
    prop.elems[e].insert(at, v);
    let at = prop.elems[e + 1].partition_point(|&x| x < u);
    prop.elems[e + 1].insert(at, u);
    prop.node_elem[u] = e + 1;
    prop.node_elem[v] = e;
    prop.rescore_elements(lat, e.saturating_sub(1), e + 1);
    let delta = prop.total - s.total;
    if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
        *s = prop;
        true
    } else {
        false
    }
}

/// Swap of two nodes from arbitrary distinct elements; Metropolis.
pub fn move_global_swap(s: &mut PartitionState, lat: &Lattices, rng: &mut impl Rng) -> bool {
    let n = s.contrib.len();
    if s.m() < 2 {
        return false;
    }
    let u = rng.random_range(0..n);
    let v = rng.random_range(0..n);
    let (eu, ev) = (s.node_elem[u], s.node_elem[v]);
    if eu == ev {
        return false;
    }
    let (lo, hi) = (eu.min(ev), eu.max(ev));
    let mut prop = s.clone();
    prop.elems[eu].retain(|&x| x != u);
    prop.elems[ev].retain(|&x| x != v);
    let at = prop.elems[eu].partition_point(|&x| x < v);
    prop.elems[eu].insert(at, v);
    let at = prop.elems[ev].partition_point(|&x| x < u);
    prop.elems[ev].insert(at, u);
    prop.node_elem[u] = ev;
    prop.node_elem[v] = eu;
    prop.rescore_elements(lat, lo.saturating_sub(1), hi);
    let delta = prop.total - s.total;
    if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
        *s = prop;
        true
    } else {
        false
    }
}

/// Gibbs relocation of a uniformly chosen node over the base partition
/// obtained by removing it: placements are every existing element and every
/// gap (2·m_b + 1 candidates), sampled proportionally to the partition
/// score; always accepted.
pub fn move_relocation(s: &mut PartitionState, lat: &Lattices, rng: &mut impl Rng) {
    let n = s.contrib.len();
    if n < 2 {
        return;
    }
    let node = rng.random_range(0..n);
    let mut base = s.clone();
    let e = base.node_elem[node];
    base.elems[e].retain(|&x| x != node);
    if base.elems[e].is_empty() {
        base.elems.remove(e);
    }
    reindex(&mut base);
    let mb = base.elems.len();

    // candidates left-to-right: gap 0, element 0, gap 1, element 1, ...
    let mut candidates: Vec<PartitionState> = Vec::with_capacity(2 * mb + 1);
    for slot in 0..=(2 * mb) {
        let mut cand = base.clone();
        if slot % 2 == 0 {
            cand.elems.insert(slot / 2, vec![node]);
        } else {
            let el = slot / 2;
            let at = cand.elems[el].partition_point(|&x| x < node);
            cand.elems[el].insert(at, node);
        }
        reindex(&mut cand);
        cand.rescore_all(lat);
        candidates.push(cand);
    }
    let totals: Vec<f64> = candidates.iter().map(|c| c.total).collect();
    let hi = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = totals.iter().map(|&t| (t - hi).exp()).collect();
    let sum: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * sum;
    let mut chosen = candidates.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            chosen = i;
            break;
        }
    }
    *s = candidates.swap_remove(chosen);
}

/// Draws a DAG compatible with the partition: each node's parent set is
/// sampled proportionally to exp(raw score) among sets that avoid its banned
/// parents and include at least one needed parent (or one adjacent outside
/// parent under extension).
pub fn sample_dag_given_partition(
    s: &PartitionState,
    lat: &Lattices,
    rng: &mut impl Rng,
) -> Result<Dag> {
    if s.total == f64::NEG_INFINITY {
        return Err(Error::Data(
            "cannot sample from a partition with no compatible DAG".into(),
        ));
    }
    let n = s.contrib.len();
    let m = s.m();
    let mut dag = Dag::empty(n);
    for v in 0..n {
        let e = s.node_elem[v];
        if e == m - 1 {
            continue; // outpoint: no parents
        }
        let nl = &lat.nodes[v];
        let k = nl.k();
        let (banned, needed) = s.masks(nl, v);
        let g = ternary_index(k, banned, needed)?;
        let allowed = banned_index(k, banned);
        let restricted = nl.restricted.as_ref().expect("restricted tables");

        // components: in-space sets, then one per usable outside parent
        let mut components: Vec<(Option<usize>, bool, f64)> = Vec::new();
        if needed != 0 {
            components.push((None, true, restricted[g]));
        }
        if s.use_ext {
            for ext in &nl.ext {
                let f = s.node_elem[ext.j];
                if f == e + 1 {
                    components.push((Some(ext.j), false, ext.summed[allowed]));
                } else if f > e + 1 {
                    let er = ext.restricted.as_ref().expect("restricted tables");
                    components.push((Some(ext.j), true, er[g]));
                }
            }
        }
        let vals: Vec<f64> = components.iter().map(|&(_, _, c)| c).collect();
        let total = logsumexp(&vals);
        let mut target = rng.random::<f64>().ln() + total;
        let mut chosen = components.len() - 1;
        let mut acc = f64::NEG_INFINITY;
        for (i, &c) in vals.iter().enumerate() {
            acc = logaddexp(acc, c);
            if acc >= target {
                chosen = i;
                break;
            }
        }
        let (outside, must_hit_needed, comp_total) = components[chosen];
        let raw: &[f64] = match outside {
            None => &nl.raw,
            Some(j) => &nl.ext_for(j).expect("ext table").raw,
        };
        // inverse CDF over the admissible submasks of `allowed`
        target = rng.random::<f64>().ln() + comp_total;
        acc = f64::NEG_INFINITY;
        let mut sub = allowed;
        let mut mask = None;
        loop {
            if !must_hit_needed || sub & needed != 0 {
                acc = logaddexp(acc, raw[sub]);
                mask = Some(sub);
                if acc >= target {
                    break;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & allowed;
        }
        let mask = mask.ok_or_else(|| Error::Data("no admissible parent set".into()))?;
        for p in nl.mask_to_parents(mask) {
            dag.set_edge(p, v, true);
        }
        if let Some(j) = outside {
            dag.set_edge(j, v, true);
        }
    }
    debug_assert!(dag.is_acyclic());
    Ok(dag)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub steps: usize,
    pub burn_in_fraction: f64,
    /// sampling/trace period; 0 selects max(1, n)
    pub thin: usize,
    /// probabilities of (split/join, adjacent swap, global swap, relocation);
    /// `None` selects the n-dependent default
    pub move_probs: Option<(f64, f64, f64, f64)>,
    pub seed: u64,
    pub chain_id: usize,
    pub validate_every: usize,
    pub use_extension: bool,
    /// initial labelled partition; the single-element partition when absent
    pub init: Option<Vec<Vec<usize>>>,
}

impl PartitionConfig {
    pub fn new(steps: usize, seed: u64) -> Self {
        PartitionConfig {
            steps,
            burn_in_fraction: 0.2,
            thin: 0,
            move_probs: None,
            seed,
            chain_id: 0,
            validate_every: 1000,
            use_extension: false,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config("burn_in_fraction must lie in [0, 1)".into()));
        }
        if let Some((a, b, c, d)) = self.move_probs {
            if a < 0.0 || b < 0.0 || c < 0.0 || d < 0.0 || (a + b + c + d - 1.0).abs() > 1e-9 {
                return Err(Error::Config("move_probs must be a distribution".into()));
            }
        }
        Ok(())
    }
}

/// Default mixture: split/join as the workhorse, swaps and relocation each
/// with probability ∝ 1/n; uniform for small n.
pub fn default_partition_probs(n: usize) -> (f64, f64, f64, f64) {
    if n > 6 {
        let nf = n as f64;
        (1.0 - 3.0 / nf, 1.0 / nf, 1.0 / nf, 1.0 / nf)
    } else {
        (0.25, 0.25, 0.25, 0.25)
    }
}

#[derive(Debug, Clone)]
pub struct PartitionChainResult {
    pub trace: Vec<(usize, f64)>,
    pub samples: Vec<DagSample>,
    pub stats: PartitionMoveStats,
    pub final_log_score: f64,
}

/// Runs one partition chain; starts from the single-element partition.
pub fn run_partition_chain(cfg: &PartitionConfig, lat: &Lattices) -> Result<PartitionChainResult> {
    cfg.validate()?;
    let n = lat.n();
    if n == 0 {
        return Err(Error::Config("empty lattice set".into()));
    }
    if !lat.has_restricted() {
        return Err(Error::Config(
            "partition MCMC requires restricted tables (with_restricted)".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed.wrapping_add(cfg.chain_id as u64));
    let mut s = match &cfg.init {
        Some(elems) => {
            let s = PartitionState::new(elems.clone(), lat, cfg.use_extension)?;
            if s.total == f64::NEG_INFINITY {
                return Err(Error::Config(
                    "initial partition admits no DAG in the search space".into(),
                ));
            }
            s
        }
        None => PartitionState::single(lat, cfg.use_extension),
    };
    let (p_sj, p_adj, p_glob, _) = cfg.move_probs.unwrap_or_else(|| default_partition_probs(n));
    let thin = if cfg.thin == 0 { n.max(1) } else { cfg.thin };
    let burn_in = (cfg.steps as f64 * cfg.burn_in_fraction) as usize;

    let mut stats = PartitionMoveStats::default();
    let mut trace = Vec::new();
    let mut samples = Vec::new();
    for step in 0..cfg.steps {
        let u = rng.random::<f64>();
        if u < p_sj {
            stats.split_join_proposed += 1;
            if move_split_join(&mut s, lat, &mut rng) {
                stats.split_join_accepted += 1;
            }
        } else if u < p_sj + p_adj {
            stats.adjacent_swap_proposed += 1;
            if move_adjacent_swap(&mut s, lat, &mut rng) {
                stats.adjacent_swap_accepted += 1;
            }
        } else if u < p_sj + p_adj + p_glob {
            stats.global_swap_proposed += 1;
            if move_global_swap(&mut s, lat, &mut rng) {
                stats.global_swap_accepted += 1;
            }
        } else {
            stats.relocations += 1;
            move_relocation(&mut s, lat, &mut rng);
        }

        if cfg.validate_every > 0 && (step + 1) % cfg.validate_every == 0 {
            let incremental = s.total;
            s.full_rescore(lat);
            if (incremental - s.total).abs() > 1e-6 {
                return Err(Error::Data(format!(
                    "incremental partition score drifted: {incremental} vs {}",
                    s.total
                )));
            }
        }

        if step >= burn_in && (step + 1 - burn_in) % thin == 0 {
            trace.push((step, s.total));
            let dag = sample_dag_given_partition(&s, lat, &mut rng)?;
            samples.push(DagSample {
                dag,
                chain: cfg.chain_id,
                step,
                log_score: s.total,
            });
        }
    }
    Ok(PartitionChainResult {
        trace,
        samples,
        stats,
        final_log_score: s.total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{BuildOptions, FnScorer, Lattices};

    fn full_space(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i).collect())
            .collect()
    }

    fn build(n: usize, f: impl Fn(usize, &[usize]) -> f64 + Sync) -> Lattices {
        let sc = FnScorer { n, f };
        Lattices::build(
            &sc,
            &full_space(n),
            &BuildOptions {
                with_restricted: true,
                with_extended: false,
                ..BuildOptions::default()
            },
        )
        .unwrap()
    }

    fn uniform(n: usize) -> Lattices {
        build(n, |_, _| 0.0)
    }

    /// All DAGs on n nodes (n small) by filtering directed graphs.
    fn all_dags(n: usize) -> Vec<Dag> {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
            .collect();
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

    #[test]
    fn five_node_reference_partition() {
        // 1-based edges 1→3, 5→4, 3→2
        let g = Dag::from_edges(5, &[(0, 2), (4, 3), (2, 1)]).unwrap();
        let elems = dag_to_partition(&g).unwrap();
        assert_eq!(elems, vec![vec![1], vec![2, 3], vec![0, 4]]);
    }

    #[test]
    fn hand_peeled_partitions() {
        let g = Dag::from_edges(3, &[(2, 0), (2, 1)]).unwrap();
        assert_eq!(dag_to_partition(&g).unwrap(), vec![vec![0, 1], vec![2]]);
        assert_eq!(
            dag_to_partition(&Dag::empty(4)).unwrap(),
            vec![vec![0, 1, 2, 3]]
        );
    }

    #[test]
    fn reference_partition_unit_scores_give_log_108() {
        let lat = uniform(5);
        let s = score_partition(vec![vec![1], vec![2, 3], vec![0, 4]], &lat, false).unwrap();
        assert!((s - 108f64.ln()).abs() < 1e-9, "{s}");
    }

    #[test]
    fn single_element_scores_empty_sets() {
        let lat = build(4, |node, ps: &[usize]| {
            if ps.is_empty() {
                -(node as f64)
            } else {
                5.0
            }
        });
        let s = score_partition(vec![vec![0, 1, 2, 3]], &lat, false).unwrap();
        assert!((s - (0.0 - 1.0 - 2.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn grouping_all_dags_reproduces_partition_scores() {
        // n = 3: sum of DAG scores within each labelled partition equals
        // score_partition, for every partition that occurs
        let f = |node: usize, ps: &[usize]| {
            let mut x = (node as f64 + 0.3).sin();
            for &p in ps {
                x += ((3 + node * 5 + p * 11) as f64).sin() * 0.8 - 0.2;
            }
            x
        };
        let lat = build(3, f);
        let dags = all_dags(3);
        assert_eq!(dags.len(), 25);
        let mut by_partition: std::collections::BTreeMap<Vec<Vec<usize>>, Vec<f64>> =
            Default::default();
        for d in &dags {
            let score: f64 = (0..3).map(|v| f(v, &d.parents(v))).sum();
            by_partition
                .entry(dag_to_partition(d).unwrap())
                .or_default()
                .push(score);
        }
        for (elems, scores) in by_partition {
            let want = crate::math::logsumexp(&scores);
            let got = score_partition(elems.clone(), &lat, false).unwrap();
            assert!(
                ((got - want) / want.abs().max(1.0)).abs() < 1e-8,
                "{elems:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn impossible_partition_scores_neg_infinity() {
        // node 0 alone in a non-rightmost element with an empty space: no
        // DAG has an edge into it from the right
        let sc = FnScorer {
            n: 2,
            f: |_, _: &[usize]| 0.0,
        };
        let lat = Lattices::build(
            &sc,
            &[vec![], vec![]],
            &BuildOptions {
                with_restricted: true,
                with_extended: false,
                ..BuildOptions::default()
            },
        )
        .unwrap();
        let s = score_partition(vec![vec![0], vec![1]], &lat, false).unwrap();
        assert_eq!(s, f64::NEG_INFINITY);
    }

    #[test]
    fn neighborhood_counts() {
        assert_eq!(split_join_neighborhood(&[2, 1]), 3);
        assert_eq!(split_join_neighborhood(&[3]), 6);
        assert_eq!(split_join_neighborhood(&[1, 1]), 1);
    }

    #[test]
    fn two_node_join_closed_form() {
        // Λ = [1,1] forces the edge 1→0; Λ = [2] forces the empty DAG
        let f = |node: usize, ps: &[usize]| {
            if node == 0 && ps == [1] {
                0.7
            } else {
                0.0
            }
        };
        let lat = build(2, f);
        let split = score_partition(vec![vec![0], vec![1]], &lat, false).unwrap();
        let joined = score_partition(vec![vec![0, 1]], &lat, false).unwrap();
        assert!((split - 0.7).abs() < 1e-12);
        assert!((joined - 0.0).abs() < 1e-12);
        // the two labelled partitions on 2 nodes cover exactly 3 DAGs
        let other = score_partition(vec![vec![1], vec![0]], &lat, false).unwrap();
        assert!((other - 0.0).abs() < 1e-12);
    }

    #[test]
    fn incremental_matches_full_after_move_storm() {
        let lat = build(6, |node, ps: &[usize]| {
            let mut x = 0.1 * node as f64;
            for &p in ps {
                x += ((node * 7 + p * 3) as f64).cos() - 0.3;
            }
            x
        });
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let mut s = PartitionState::single(&lat, false);
        for _ in 0..3000 {
            match rng.random_range(0..4) {
                0 => {
                    move_split_join(&mut s, &lat, &mut rng);
                }
                1 => {
                    move_adjacent_swap(&mut s, &lat, &mut rng);
                }
                2 => {
                    move_global_swap(&mut s, &lat, &mut rng);
                }
                _ => move_relocation(&mut s, &lat, &mut rng),
            }
            assert!(s.total.is_finite(), "moves must preserve reachability");
        }
        let incremental = s.total;
        s.full_rescore(&lat);
        assert!((incremental - s.total).abs() < 1e-6);
    }

    #[test]
    fn sampling_round_trip() {
        let lat = build(5, |node, ps: &[usize]| {
            0.2 * node as f64 - 0.1 * ps.len() as f64
        });
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let mut s = PartitionState::single(&lat, false);
        for _ in 0..200 {
            move_split_join(&mut s, &lat, &mut rng);
            move_relocation(&mut s, &lat, &mut rng);
        }
        for _ in 0..1000 {
            move_adjacent_swap(&mut s, &lat, &mut rng);
            let d = sample_dag_given_partition(&s, &lat, &mut rng).unwrap();
            assert_eq!(dag_to_partition(&d).unwrap(), s.elems);
        }
    }

    #[test]
    fn reference_partition_node1_has_12_uniform_parent_sets() {
        let lat = uniform(5);
        let s =
            PartitionState::new(vec![vec![1], vec![2, 3], vec![0, 4]], &lat, false).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut counts: std::collections::BTreeMap<Vec<usize>, usize> = Default::default();
        let draws = 60_000;
        for _ in 0..draws {
            let d = sample_dag_given_partition(&s, &lat, &mut rng).unwrap();
            *counts.entry(d.parents(1)).or_default() += 1;
        }
        assert_eq!(counts.len(), 12);
        let expect = draws as f64 / 12.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        assert!(chi2 < 35.0, "chi2 = {chi2}"); // df = 11
    }

    #[test]
    fn uniform_scores_sample_dags_uniformly() {
        let lat = uniform(3);
        let mut cfg = PartitionConfig::new(120_000, 8);
        cfg.thin = 1;
        cfg.burn_in_fraction = 0.1;
        let res = run_partition_chain(&cfg, &lat).unwrap();
        let mut counts: std::collections::BTreeMap<Vec<(usize, usize)>, usize> =
            Default::default();
        for s in &res.samples {
            *counts.entry(s.dag.edges()).or_default() += 1;
        }
        assert_eq!(counts.len(), 25);
        let total: usize = counts.values().sum();
        let expect = total as f64 / 25.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        // df = 24, generous bound: MCMC samples are autocorrelated
        assert!(chi2 < 120.0, "chi2 = {chi2}, {counts:?}");
    }

    #[test]
    fn average_element_size_near_one_and_a_half() {
        let lat = uniform(12);
        let mut cfg = PartitionConfig::new(60_000, 5);
        cfg.thin = 6;
        let res = run_partition_chain(&cfg, &lat).unwrap();
        let mut acc = 0.0;
        let mut cnt = 0usize;
        for s in &res.samples {
            let p = dag_to_partition(&s.dag).unwrap();
            acc += 12.0 / p.len() as f64;
            cnt += 1;
        }
        let avg = acc / cnt as f64;
        assert!((avg - 1.5).abs() < 0.2, "average element size {avg}");
    }
}
