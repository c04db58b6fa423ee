//! Per-node score-table lattices.
//!
//! For node i with permissible parents h^i (size K) the chains need, by
//! direct index lookup:
//!   * raw:     2^K entries, subset mask f(Z) over positions in h^i
//!   * summed:  2^K entries, indexed by the allowed mask f̄(banned) =
//!              2^K − f(banned) − 1; entry = logsumexp of raw over all
//!              subsets of the allowed set
//!   * maxed:   2^K entries, same indexing, max instead of logsumexp
//!   * restricted: 3^K entries, ternary index g(Z,W) (digit 1 = banned,
//!              2 = needed); entry = logsumexp of raw over parent sets
//!              avoiding Z and intersecting W
//! plus, when the extended search space is on, the same tables for raw
//! scores S(X_i, Z ∪ {X_j}) with one outside parent j appended.

use crate::error::{Error, Result};
use crate::math::{fnv1a64, logaddexp};
use rayon::prelude::*;
use std::io::{BufReader, BufWriter, Read as _, Write as _};
use std::path::Path;

pub const K_MAX_DEFAULT: usize = 25;

/// Source of decomposable local scores.
pub trait LocalScorer: Sync {
    fn n_vars(&self) -> usize;
    fn local_score(&self, node: usize, parents: &[usize]) -> Result<f64>;
    /// Hash of everything that determines scores besides the data itself.
    fn config_hash(&self) -> u64;

    /// Raw table over all subsets of `h`, indexed by the subset mask.
    fn raw_table(&self, node: usize, h: &[usize]) -> Result<Vec<f64>> {
        let k = h.len();
        let mut out = Vec::with_capacity(1 << k);
        let mut parents = Vec::with_capacity(k);
        for mask in 0..(1usize << k) {
            parents.clear();
            for (b, &p) in h.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    parents.push(p);
                }
            }
            out.push(self.local_score(node, &parents)?);
        }
        Ok(out)
    }

    /// Raw table with the outside parent `j` forced into every parent set.
    fn ext_raw_table(&self, node: usize, h: &[usize], j: usize) -> Result<Vec<f64>> {
        let k = h.len();
        let mut out = Vec::with_capacity(1 << k);
        let mut parents = Vec::with_capacity(k + 1);
        for mask in 0..(1usize << k) {
            parents.clear();
            for (b, &p) in h.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    parents.push(p);
                }
            }
            parents.push(j);
            out.push(self.local_score(node, &parents)?);
        }
        Ok(out)
    }
}

/// f̄: allowed-mask index of a banned set.
#[inline]
pub fn banned_index(k: usize, banned_mask: usize) -> usize {
    ((1usize << k) - 1) ^ banned_mask
}

pub fn pow3(k: usize) -> usize {
    3usize.pow(k as u32)
}

/// g(Z, W): ternary index with digit 1 for banned and 2 for needed.
pub fn ternary_index(k: usize, banned_mask: usize, needed_mask: usize) -> Result<usize> {
    if banned_mask & needed_mask != 0 {
        return Err(Error::Space(
            "banned and needed sets overlap in ternary_index".into(),
        ));
    }
    let mut idx = 0usize;
    let mut p = 1usize;
    for b in 0..k {
        let bit = 1usize << b;
        if banned_mask & bit != 0 {
            idx += p;
        } else if needed_mask & bit != 0 {
            idx += 2 * p;
        }
        p *= 3;
    }
    Ok(idx)
}

/// Inverts the banned component of a ternary index.
pub fn ternary_banned(k: usize, mut idx: usize) -> usize {
    let mut banned = 0usize;
    for b in 0..k {
        if idx % 3 == 1 {
            banned |= 1 << b;
        }
        idx /= 3;
    }
    banned
}

/// Inverts the needed component of a ternary index.
pub fn ternary_needed(k: usize, mut idx: usize) -> usize {
    let mut needed = 0usize;
    for b in 0..k {
        if idx % 3 == 2 {
            needed |= 1 << b;
        }
        idx /= 3;
    }
    needed
}

/// Log-space subset-sum (zeta) transform: out[allowed] = logsumexp of
/// raw over all subsets of `allowed`.  O(K·2^K).
pub fn build_summed(raw: &[f64], k: usize) -> Vec<f64> {
    debug_assert_eq!(raw.len(), 1 << k);
    let mut t = raw.to_vec();
    for b in 0..k {
        let bit = 1usize << b;
        for mask in 0..t.len() {
            if mask & bit != 0 {
                t[mask] = logaddexp(t[mask], t[mask ^ bit]);
            }
        }
    }
    t
}

/// out[allowed] = max of raw over all subsets of `allowed`.
pub fn build_max(raw: &[f64], k: usize) -> Vec<f64> {
    debug_assert_eq!(raw.len(), 1 << k);
    let mut t = raw.to_vec();
    for b in 0..k {
        let bit = 1usize << b;
        for mask in 0..t.len() {
            if mask & bit != 0 {
                t[mask] = t[mask].max(t[mask ^ bit]);
            }
        }
    }
    t
}

/// Restricted table over all 3^K (banned, needed) pairs.
///
/// Entries with W = ∅ copy the summed table (the chains treat that case
/// separately).  For W ≠ ∅ the value is built subtraction-free from
/// per-element tables G_w[M] = logsumexp over Q ⊆ M of raw[Q ∪ {w}] via
///   R(Z, W) = logaddexp(G_w[h\Z\{w}], R(Z ∪ {w}, W\{w})),  w = min W,
/// splitting on whether the lowest needed element is a parent.
pub fn build_restricted(raw: &[f64], summed: &[f64], k: usize) -> Vec<f64> {
    debug_assert_eq!(raw.len(), 1 << k);
    let size = 1usize << k;
    let full = size - 1;

    let mut g_tables: Vec<Vec<f64>> = Vec::with_capacity(k);
    for w in 0..k {
        let bit_w = 1usize << w;
        let mut g = vec![f64::NEG_INFINITY; size];
        for mask in 0..size {
            if mask & bit_w == 0 {
                g[mask] = raw[mask | bit_w];
            }
        }
        for b in 0..k {
            if b == w {
                continue;
            }
            let bit = 1usize << b;
            for mask in 0..size {
                if mask & bit != 0 && mask & bit_w == 0 {
                    g[mask] = logaddexp(g[mask], g[mask ^ bit]);
                }
            }
        }
        g_tables.push(g);
    }

    let n3 = pow3(k);
    let mut pow3s = vec![1usize; k.max(1)];
    for b in 1..k {
        pow3s[b] = pow3s[b - 1] * 3;
    }
    let mut out = vec![f64::NEG_INFINITY; n3];
    for idx in 0..n3 {
        let banned = ternary_banned(k, idx);
        let needed = ternary_needed(k, idx);
        if needed == 0 {
            out[idx] = summed[banned_index(k, banned)];
            continue;
        }
        let w = needed.trailing_zeros() as usize;
        let m = full ^ banned ^ (1 << w);
        let head = g_tables[w][m];
        out[idx] = if needed.count_ones() == 1 {
            head
        } else {
            // moving w from needed to banned lowers the digit by one
            logaddexp(head, out[idx - pow3s[w]])
        };
    }
    out
}

/// Tables for one outside parent j forced into the parent set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtTables {
    pub j: usize,
    pub raw: Vec<f64>,
    pub summed: Vec<f64>,
    pub maxed: Option<Vec<f64>>,
    pub restricted: Option<Vec<f64>>,
}

/// Scorer backed by an arbitrary function; used for synthetic landscapes in
/// tests and benchmarks.
pub struct FnScorer<F: Fn(usize, &[usize]) -> f64 + Sync> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(usize, &[usize]) -> f64 + Sync> LocalScorer for FnScorer<F> {
    fn n_vars(&self) -> usize {
        self.n
    }
    fn local_score(&self, node: usize, parents: &[usize]) -> Result<f64> {
        Ok((self.f)(node, parents))
    }
    fn config_hash(&self) -> u64 {
        fnv1a64(b"fn-scorer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeLattice {
    pub node: usize,
    pub h: Vec<usize>,
    pub raw: Vec<f64>,
    pub summed: Vec<f64>,
    pub maxed: Option<Vec<f64>>,
    pub restricted: Option<Vec<f64>>,
    pub ext: Vec<ExtTables>,
    /// position of each graph node within `h`, or `None` if not permissible
    pos: Vec<Option<u16>>,
}

impl NodeLattice {
    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn full_mask(&self) -> usize {
        (1usize << self.k()) - 1
    }

    /// Position of `node` within the permissible-parent list.
    #[inline]
    pub fn position(&self, node: usize) -> Option<usize> {
        self.pos[node].map(|p| p as usize)
    }

    pub fn ext_for(&self, j: usize) -> Option<&ExtTables> {
        self.ext.iter().find(|e| e.j == j)
    }

    /// Highest-scoring parent set among subsets of `allowed_mask`.
    pub fn argmax_subset(&self, allowed_mask: usize) -> (usize, f64) {
        let mut best = (0usize, self.raw[0]);
        let mut sub = allowed_mask;
        while sub != 0 {
            if self.raw[sub] > best.1 {
                best = (sub, self.raw[sub]);
            }
            sub = (sub - 1) & allowed_mask;
        }
        best
    }

    /// Members of `h` selected by a position mask, as graph-node indices.
    pub fn mask_to_parents(&self, mask: usize) -> Vec<usize> {
        (0..self.k())
            .filter(|&b| mask & (1 << b) != 0)
            .map(|b| self.h[b])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub with_max: bool,
    pub with_restricted: bool,
    pub with_extended: bool,
    pub k_max: usize,
    pub mem_cap_bytes: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            with_max: true,
            with_restricted: false,
            with_extended: true,
            k_max: K_MAX_DEFAULT,
            mem_cap_bytes: 4 << 30,
        }
    }
}

/// Cache key tying a lattice file to its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheKey {
    pub data_hash: u64,
    pub space_hash: u64,
    pub score_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattices {
    pub nodes: Vec<NodeLattice>,
}

fn estimate_bytes(n: usize, h: &[Vec<usize>], opts: &BuildOptions) -> usize {
    let mut total = 0usize;
    for hi in h {
        let k = hi.len();
        let two = 8usize << k;
        let three = 8 * pow3(k);
        let mut per = two * 2 + if opts.with_max { two } else { 0 };
        if opts.with_restricted {
            per += three;
        }
        if opts.with_extended {
            let outside = n - 1 - k;
            let per_ext = two * 2
                + if opts.with_max { two } else { 0 }
                + if opts.with_restricted { three } else { 0 };
            per += outside * per_ext;
        }
        total += per;
    }
    total
}

impl Lattices {
    /// Builds all per-node tables in parallel.  `h[i]` lists the permissible
    /// parents of node i (sorted, not containing i).
    pub fn build<S: LocalScorer>(scorer: &S, h: &[Vec<usize>], opts: &BuildOptions) -> Result<Self> {
        let n = scorer.n_vars();
        if h.len() != n {
            return Err(Error::Space(format!(
                "expected {n} permissible-parent lists, found {}",
                h.len()
            )));
        }
        for (i, hi) in h.iter().enumerate() {
            if hi.len() > opts.k_max {
                return Err(Error::Space(format!(
                    "node {i} has {} permissible parents, exceeding the cap K_max = {}; \
                     tighten the search space (stricter skeleton alpha) or raise k_max",
                    hi.len(),
                    opts.k_max
                )));
            }
            if hi.contains(&i) || hi.iter().any(|&p| p >= n) {
                return Err(Error::Space(format!("invalid permissible set for node {i}")));
            }
        }
        let est = estimate_bytes(n, h, opts);
        if est > opts.mem_cap_bytes {
            return Err(Error::Memory(format!(
                "lattices would need about {est} bytes, above the cap of {} bytes; \
                 shrink the search space or disable the extended tables",
                opts.mem_cap_bytes
            )));
        }
        let nodes: Result<Vec<NodeLattice>> = (0..n)
            .into_par_iter()
            .map(|node| {
                let hi = &h[node];
                let k = hi.len();
                let raw = scorer.raw_table(node, hi)?;
                let summed = build_summed(&raw, k);
                let maxed = opts.with_max.then(|| build_max(&raw, k));
                let restricted = opts
                    .with_restricted
                    .then(|| build_restricted(&raw, &summed, k));
                let mut ext = Vec::new();
                if opts.with_extended {
                    for j in 0..n {
                        if j == node || hi.contains(&j) {
                            continue;
                        }
                        let eraw = scorer.ext_raw_table(node, hi, j)?;
                        let esummed = build_summed(&eraw, k);
                        let emaxed = opts.with_max.then(|| build_max(&eraw, k));
                        let erestricted = opts
                            .with_restricted
                            .then(|| build_restricted(&eraw, &esummed, k));
                        ext.push(ExtTables {
                            j,
                            raw: eraw,
                            summed: esummed,
                            maxed: emaxed,
                            restricted: erestricted,
                        });
                    }
                }
                let mut pos = vec![None; n];
                for (b, &p) in hi.iter().enumerate() {
                    pos[p] = Some(b as u16);
                }
                Ok(NodeLattice {
                    node,
                    h: hi.clone(),
                    raw,
                    summed,
                    maxed,
                    restricted,
                    ext,
                    pos,
                })
            })
            .collect();
        Ok(Lattices { nodes: nodes? })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_restricted(&self) -> bool {
        self.nodes.iter().all(|nl| nl.restricted.is_some())
    }

    pub fn has_extended(&self) -> bool {
        self.nodes
            .iter()
            .any(|nl| !nl.ext.is_empty() || nl.k() + 1 == self.n())
    }

    /// Writes the little-endian binary cache (see `CACHE_MAGIC` layout notes
    /// in the repository README).
    pub fn save_cache(&self, path: &Path, key: &CacheKey) -> Result<()> {
        let io_err = |e: std::io::Error| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let f = std::fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(f);
        let put_u64 = |w: &mut BufWriter<std::fs::File>, v: u64| -> Result<()> {
            w.write_all(&v.to_le_bytes()).map_err(io_err)
        };
        w.write_all(CACHE_MAGIC).map_err(io_err)?;
        put_u64(&mut w, CACHE_VERSION)?;
        put_u64(&mut w, key.data_hash)?;
        put_u64(&mut w, key.space_hash)?;
        put_u64(&mut w, key.score_hash)?;
        put_u64(&mut w, self.nodes.len() as u64)?;
        for nl in &self.nodes {
            put_u64(&mut w, nl.node as u64)?;
            put_u64(&mut w, nl.h.len() as u64)?;
            for &p in &nl.h {
                put_u64(&mut w, p as u64)?;
            }
            let flags = nl.maxed.is_some() as u64 | ((nl.restricted.is_some() as u64) << 1);
            put_u64(&mut w, flags)?;
            let put_table = |w: &mut BufWriter<std::fs::File>, t: &[f64]| -> Result<()> {
                for &v in t {
                    w.write_all(&v.to_le_bytes()).map_err(io_err)?;
                }
                Ok(())
            };
            put_table(&mut w, &nl.raw)?;
            put_table(&mut w, &nl.summed)?;
            if let Some(t) = &nl.maxed {
                put_table(&mut w, t)?;
            }
            if let Some(t) = &nl.restricted {
                put_table(&mut w, t)?;
            }
            put_u64(&mut w, nl.ext.len() as u64)?;
            for e in &nl.ext {
                put_u64(&mut w, e.j as u64)?;
                put_table(&mut w, &e.raw)?;
                put_table(&mut w, &e.summed)?;
                if let Some(t) = &e.maxed {
                    put_table(&mut w, t)?;
                }
                if let Some(t) = &e.restricted {
                    put_table(&mut w, t)?;
                }
            }
        }
        w.flush().map_err(io_err)
    }

    /// Loads a cache file, verifying version and key.
    pub fn load_cache(path: &Path, key: &CacheKey) -> Result<Self> {
        let io_err = |e: std::io::Error| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        let f = std::fs::File::open(path).map_err(io_err)?;
        let mut r = BufReader::new(f);
        let corrupt = || Error::Cache(format!("{}: truncated or corrupt cache", path.display()));
        let get_u64 = |r: &mut BufReader<std::fs::File>| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| corrupt())?;
            Ok(u64::from_le_bytes(b))
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| corrupt())?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Cache(format!(
                "{}: not a lattice cache file",
                path.display()
            )));
        }
        let version = get_u64(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!(
                "{}: cache version {version}, expected {CACHE_VERSION}",
                path.display()
            )));
        }
        let found = CacheKey {
            data_hash: get_u64(&mut r)?,
            space_hash: get_u64(&mut r)?,
            score_hash: get_u64(&mut r)?,
        };
        if found != *key {
            return Err(Error::Cache(format!(
                "{}: cache was built for different data, space or score settings",
                path.display()
            )));
        }
        let n = get_u64(&mut r)? as usize;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let node = get_u64(&mut r)? as usize;
            let k = get_u64(&mut r)? as usize;
            if k > K_MAX_DEFAULT + 8 {
                return Err(corrupt());
            }
            let mut h = Vec::with_capacity(k);
            for _ in 0..k {
                h.push(get_u64(&mut r)? as usize);
            }
            let flags = get_u64(&mut r)?;
            let get_table = |r: &mut BufReader<std::fs::File>, len: usize| -> Result<Vec<f64>> {
                let mut t = Vec::with_capacity(len);
                let mut b = [0u8; 8];
                for _ in 0..len {
                    r.read_exact(&mut b).map_err(|_| corrupt())?;
                    t.push(f64::from_le_bytes(b));
                }
                Ok(t)
            };
            let two = 1usize << k;
            let three = pow3(k);
            let raw = get_table(&mut r, two)?;
            let summed = get_table(&mut r, two)?;
            let maxed = if flags & 1 != 0 {
                Some(get_table(&mut r, two)?)
            } else {
                None
            };
            let restricted = if flags & 2 != 0 {
                Some(get_table(&mut r, three)?)
            } else {
                None
            };
            let n_ext = get_u64(&mut r)? as usize;
            let mut ext = Vec::with_capacity(n_ext);
            for _ in 0..n_ext {
                let j = get_u64(&mut r)? as usize;
                let eraw = get_table(&mut r, two)?;
                let esummed = get_table(&mut r, two)?;
                let emaxed = if flags & 1 != 0 {
                    Some(get_table(&mut r, two)?)
                } else {
                    None
                };
                let erestricted = if flags & 2 != 0 {
                    Some(get_table(&mut r, three)?)
                } else {
                    None
                };
                ext.push(ExtTables {
                    j,
                    raw: eraw,
                    summed: esummed,
                    maxed: emaxed,
                    restricted: erestricted,
                });
            }
            let mut pos = vec![None; n];
            for (b, &p) in h.iter().enumerate() {
                if p >= n {
                    return Err(corrupt());
                }
                pos[p] = Some(b as u16);
            }
            nodes.push(NodeLattice {
                node,
                h,
                raw,
                summed,
                maxed,
                restricted,
                ext,
                pos,
            });
        }
        Ok(Lattices { nodes })
    }
}

pub const CACHE_MAGIC: &[u8; 4] = b"BNSL";
pub const CACHE_VERSION: u64 = 1;

/// Hash of the permissible-parent lists, used as the cache space key.
pub fn space_hash(h: &[Vec<usize>]) -> u64 {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(h.len() as u64).to_le_bytes());
    for hi in h {
        bytes.extend_from_slice(&(hi.len() as u64).to_le_bytes());
        for &p in hi {
            bytes.extend_from_slice(&(p as u64).to_le_bytes());
        }
    }
    fnv1a64(&bytes)
}
