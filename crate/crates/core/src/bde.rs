//! BDe local score for binary data, including the fast construction of a
//! whole score table from one pass over the observations followed by a
//! top-down collapse of count vectors through the parent-set poset.

use crate::data::{DataKind, Dataset};
use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Per-configuration counts of the child value for an ordered parent set.
#[derive(Debug, Clone)]
pub struct CountVectors {
    pub n1: Vec<u64>,
    pub n0: Vec<u64>,
}

/// log BDe contribution from count vectors of length 2^m, with pseudocount
/// chi/2^(m+1) in each cell.
pub fn bde_local(n1: &[u64], n0: &[u64], chi: f64) -> Result<f64> {
    if chi <= 0.0 {
        return Err(Error::Config("chi must be positive".into()));
    }
    let len = n1.len();
    if len == 0 || len != n0.len() || !len.is_power_of_two() {
        return Err(Error::Data(
            "count vectors must share a power-of-two length".into(),
        ));
    }
    let m = len.trailing_zeros() as f64;
    let cell = chi / 2f64.powf(m + 1.0);
    let config = chi / 2f64.powf(m);
    let base = ln_gamma(config) - 2.0 * ln_gamma(cell);
    let mut total = 0.0;
    for t in 0..len {
        let (a, b) = (n1[t] as f64, n0[t] as f64);
        total += base + ln_gamma(a + cell) + ln_gamma(b + cell) - ln_gamma(a + b + config);
    }
    Ok(total)
}

/// Index map used when a parent at (1-based) position `j` is marginalised
/// out of a configuration vector: v(t,j) = t + (ceil(t/2^(j-1)) - 1)·2^(j-1).
pub fn v_map(t: usize, j: usize) -> usize {
    let block = 1usize << (j - 1);
    t + (t.div_ceil(block) - 1) * block
}

/// Collapses count vectors by removing the parent at 1-based position `j`.
pub fn collapse(counts: &CountVectors, j: usize) -> CountVectors {
    let half = counts.n1.len() / 2;
    let block = 1usize << (j - 1);
    let mut n1 = Vec::with_capacity(half);
    let mut n0 = Vec::with_capacity(half);
    for t in 1..=half {
        let v = v_map(t, j);
        n1.push(counts.n1[v - 1] + counts.n1[v - 1 + block]);
        n0.push(counts.n0[v - 1] + counts.n0[v - 1 + block]);
    }
    CountVectors { n1, n0 }
}

/// Child-value counts for every configuration of the complete parent set.
pub fn full_counts(node: usize, h: &[usize], d: &Dataset) -> CountVectors {
    let k = h.len();
    let mut n1 = vec![0u64; 1 << k];
    let mut n0 = vec![0u64; 1 << k];
    for r in 0..d.n_obs {
        let mut cfg = 0usize;
        for (j, &p) in h.iter().enumerate() {
            if d.value(r, p) == 1.0 {
                cfg |= 1 << j;
            }
        }
        if d.value(r, node) == 1.0 {
            n1[cfg] += 1;
        } else {
            n0[cfg] += 1;
        }
    }
    CountVectors { n1, n0 }
}

/// Builds the full 2^K raw score table for a binary node: one O(KN) counting
/// pass for the complete parent set, then every subset's counts derived by
/// collapsing a larger set, removing elements in descending position so each
/// subset is visited exactly once.
pub fn binary_score_table(node: usize, h: &[usize], d: &Dataset, chi: f64) -> Result<Vec<f64>> {
    if d.kind != DataKind::Binary {
        return Err(Error::Data("binary_score_table requires binary data".into()));
    }
    let k = h.len();
    let mut table = vec![0.0f64; 1 << k];
    let full = full_counts(node, h, d);

    // mask bits refer to positions in h; `bound` caps which positions may
    // still be removed so the descent enumerates each subset once
    fn descend(
        mask: usize,
        counts: CountVectors,
        bound: usize,
        chi: f64,
        table: &mut [f64],
    ) -> Result<()> {
        table[mask] = bde_local(&counts.n1, &counts.n0, chi)?;
        let mut positions: Vec<usize> = (0..bound).filter(|&b| mask & (1 << b) != 0).collect();
        positions.reverse();
        for b in positions {
            // 1-based rank of position b among the set bits of mask
            let rank = (mask & ((1 << (b + 1)) - 1)).count_ones() as usize;
            let child = collapse(&counts, rank);
            descend(mask & !(1 << b), child, b, chi, table)?;
        }
        Ok(())
    }
    descend((1 << k) - 1, full, k, chi, &mut table)?;
    Ok(table)
}

/// BDe scorer over a borrowed binary dataset.
#[derive(Debug, Clone)]
pub struct BdeScorer<'a> {
    data: &'a Dataset,
    chi: f64,
}

impl<'a> BdeScorer<'a> {
    pub fn new(data: &'a Dataset, chi: f64) -> Result<Self> {
        if data.kind != DataKind::Binary {
            return Err(Error::Data("BDe score requires binary data".into()));
        }
        if chi <= 0.0 {
            return Err(Error::Config("chi must be positive".into()));
        }
        Ok(BdeScorer { data, chi })
    }
}

impl crate::tables::LocalScorer for BdeScorer<'_> {
    fn n_vars(&self) -> usize {
        self.data.n_vars
    }

    fn local_score(&self, node: usize, parents: &[usize]) -> Result<f64> {
        let c = full_counts(node, parents, self.data);
        bde_local(&c.n1, &c.n0, self.chi)
    }

    fn config_hash(&self) -> u64 {
        let mut bytes = vec![b'd'];
        bytes.extend_from_slice(&self.chi.to_le_bytes());
        crate::math::fnv1a64(&bytes)
    }

    fn raw_table(&self, node: usize, h: &[usize]) -> Result<Vec<f64>> {
        binary_score_table(node, h, self.data, self.chi)
    }

    /// One counting pass over h ∪ {j} with j in the top bit; the slice with
    /// that bit set is the table with j forced in.
    fn ext_raw_table(&self, node: usize, h: &[usize], j: usize) -> Result<Vec<f64>> {
        let k = h.len();
        let mut hj = h.to_vec();
        hj.push(j);
        let big = binary_score_table(node, &hj, self.data, self.chi)?;
        Ok(big[(1 << k)..].to_vec())
    }
}

/// Naive per-subset recount used as an independent reference.
pub fn naive_score_table(node: usize, h: &[usize], d: &Dataset, chi: f64) -> Result<Vec<f64>> {
    let k = h.len();
    let mut table = vec![0.0f64; 1 << k];
    for mask in 0..(1usize << k) {
        let subset: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) != 0).map(|j| h[j]).collect();
        let counts = full_counts(node, &subset, d);
        table[mask] = bde_local(&counts.n1, &counts.n0, chi)?;
    }
    Ok(table)
}
