//! BGe local score for continuous data.
//!
//! Uses the corrected closed form with prior precision T = t·I and zero
//! prior mean: the contribution of (node | parents) is a constant depending
//! only on the parent-set size plus a ratio of posterior-matrix
//! log-determinants, evaluated by Cholesky factorisation of the relevant
//! principal submatrices.

use crate::data::GaussianStats;
use crate::error::{Error, Result};
use crate::math::spd_logdet;
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone)]
pub struct BgeScorer {
    n_vars: usize,
    n_obs: usize,
    /// posterior matrix R = t·I + S_N + (N·a_mu/(N+a_mu)) x̄ x̄ᵀ
    posterior: Vec<f64>,
    /// per parent-set size p: all terms independent of the data determinants
    const_by_size: Vec<f64>,
    /// exponent of |R_{Pa ∪ i}| is -(N + alpha_w - n + p + 1)/2
    alpha_w: f64,
}

impl BgeScorer {
    pub fn new(stats: &GaussianStats) -> Result<Self> {
        let n = stats.n_vars;
        let big_n = stats.n_obs as f64;
        let h = stats.hyper;
        h.validate(n)?;
        let mut posterior = stats.scatter.clone();
        let shrink = big_n * h.alpha_mu / (big_n + h.alpha_mu);
        for i in 0..n {
            for j in 0..n {
                posterior[i * n + j] += shrink * stats.means[i] * stats.means[j];
            }
            posterior[i * n + i] += h.t_scale;
        }
        let mut const_by_size = Vec::with_capacity(n);
        for p in 0..n {
            let pf = p as f64;
            let a = h.alpha_w - n as f64 + pf + 1.0;
            let c = 0.5 * (h.alpha_mu / (big_n + h.alpha_mu)).ln()
                - 0.5 * big_n * std::f64::consts::PI.ln()
                + ln_gamma((big_n + a) / 2.0)
                - ln_gamma(a / 2.0)
                + 0.5 * h.t_scale.ln() * (a * (pf + 1.0) - (a - 1.0) * pf);
            const_by_size.push(c);
        }
        Ok(BgeScorer {
            n_vars: n,
            n_obs: stats.n_obs,
            posterior,
            const_by_size,
            alpha_w: h.alpha_w,
        })
    }

    fn sub_logdet(&self, idx: &[usize]) -> Result<f64> {
        let m = idx.len();
        if m == 0 {
            return Ok(0.0);
        }
        let n = self.n_vars;
        let mut sub = vec![0.0; m * m];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                sub[a * m + b] = self.posterior[i * n + j];
            }
        }
        spd_logdet(&mut sub, m)
            .ok_or_else(|| Error::Data("posterior matrix not positive definite".into()))
    }

    /// log S(node, parents | D).
    pub fn local(&self, node: usize, parents: &[usize]) -> Result<f64> {
        debug_assert!(!parents.contains(&node));
        let p = parents.len();
        let big_n = self.n_obs as f64;
        let a = self.alpha_w - self.n_vars as f64 + p as f64 + 1.0;
        let mut family: Vec<usize> = parents.to_vec();
        family.push(node);
        let ld_family = self.sub_logdet(&family)?;
        let ld_parents = self.sub_logdet(parents)?;
        Ok(self.const_by_size[p] - 0.5 * (big_n + a) * ld_family
            + 0.5 * (big_n + a - 1.0) * ld_parents)
    }
}

impl crate::tables::LocalScorer for BgeScorer {
    fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn local_score(&self, node: usize, parents: &[usize]) -> Result<f64> {
        self.local(node, parents)
    }

    fn config_hash(&self) -> u64 {
        let mut bytes = vec![b'g'];
        bytes.extend_from_slice(&self.alpha_w.to_le_bytes());
        for v in &self.posterior {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::math::fnv1a64(&bytes)
    }
}
