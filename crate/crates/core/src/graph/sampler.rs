//! Rejection sampling of binary edges and the per-draw graph log-posterior.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::marginal::EdgeMarginal;
use super::{pair_count, pairs, EdgeBits};
use crate::error::{Error, Result};

/// Bounds applied to a Bernoulli proposal parameter so both outcomes stay reachable.
pub const BERNOULLI_CLAMP: (f64, f64) = (1e-6, 1.0 - 1e-6);

/// Proposal density of the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposal {
    /// `q(0) = q(1) = 1/2`.
    Uniform,
    /// `q(1) = |ψ|`, clamped to [`BERNOULLI_CLAMP`].
    Bernoulli,
}

impl Proposal {
    pub fn as_str(self) -> &'static str {
        match self {
            Proposal::Uniform => "uniform",
            Proposal::Bernoulli => "bernoulli",
        }
    }
}

impl std::str::FromStr for Proposal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Proposal::Uniform),
            "bernoulli" => Ok(Proposal::Bernoulli),
            other => Err(format!("unknown proposal `{other}` (expected uniform|bernoulli)")),
        }
    }
}

/// How edge draws are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMethod {
    Rejection(Proposal),
    /// Inversion: `g = 1` iff `U < m(1|ψ)`. Same distribution, one uniform per draw.
    Direct,
}

impl Default for SamplingMethod {
    fn default() -> Self {
        SamplingMethod::Rejection(Proposal::Uniform)
    }
}

/// Rejection sampler for one node pair.
#[derive(Debug, Clone, Copy)]
pub struct EdgeSampler {
    marginal: EdgeMarginal,
    /// `q(1)`.
    propose_edge: f64,
    /// Smallest `C` with `C·q(g) ≥ m(g)` for both `g`.
    envelope: f64,
    pub clamped: bool,
}

impl EdgeSampler {
    pub fn new(marginal: EdgeMarginal, proposal: Proposal) -> Self {
        let (propose_edge, clamped) = match proposal {
            Proposal::Uniform => (0.5, false),
            Proposal::Bernoulli => {
                let raw = marginal.psi.abs();
                let p = raw.clamp(BERNOULLI_CLAMP.0, BERNOULLI_CLAMP.1);
                (p, p != raw)
            }
        };
        let envelope = (marginal.prob(false) / (1.0 - propose_edge)).max(marginal.prob(true) / propose_edge);
        EdgeSampler {
            marginal,
            propose_edge,
            envelope,
            clamped,
        }
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    fn proposal_prob(&self, edge: bool) -> f64 {
        if edge {
            self.propose_edge
        } else {
            1.0 - self.propose_edge
        }
    }

    /// Draw one edge value; also returns how many proposals were made.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, u32) {
        let mut proposals = 0;
        loop {
            proposals += 1;
            let edge = rng.random::<f64>() < self.propose_edge;
            let ratio = self.marginal.prob(edge) / (self.envelope * self.proposal_prob(edge));
            if rng.random::<f64>() <= ratio {
                return (edge, proposals);
            }
        }
    }
}

/// Independent, reproducible stream for one node pair.
pub fn pair_rng(seed: u64, pair_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair_index as u64);
    rng
}

/// Diagnostics from a sampling run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub draws: u64,
    pub proposals: u64,
    /// Pairs whose Bernoulli proposal parameter had to be clamped.
    pub clamped_pairs: usize,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.draws as f64 / self.proposals as f64
        }
    }
}

/// `N` joint draws of every edge, with per-draw graph log-posteriors and edge frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSampleSet {
    pub n_joints: usize,
    pub n_samples: usize,
    /// `N × E`, pairs in row-major upper-triangle order.
    pub edges: EdgeBits,
    pub log_posterior: Vec<f64>,
    /// Relative frequency `ν` of each edge across draws.
    pub edge_freq: Vec<f64>,
    pub method: SamplingMethod,
    pub rng_seed: u64,
    pub stats: SamplerStats,
}

impl GraphSampleSet {
    pub fn n_pairs(&self) -> usize {
        pair_count(self.n_joints)
    }
}

fn upper_triangle(partial: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !partial.is_square() {
        return Err(Error::Contract("partial correlation matrix is not square".into()));
    }
    pairs(partial.nrows())
        .map(|(a, b)| {
            let psi = partial[(a, b)];
            if psi.is_finite() && psi.abs() <= 1.0 {
                Ok(psi)
            } else {
                Err(Error::Contract(format!("partial correlation ({a},{b}) = {psi}")))
            }
        })
        .collect()
}

/// Configuration for [`sample_edges`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub n_samples: usize,
    pub method: SamplingMethod,
    pub seed: u64,
    /// Upper bound of the variance marginalization interval.
    pub variance_bound: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            n_samples: 50_000,
            method: SamplingMethod::default(),
            seed: 0,
            variance_bound: 1.0,
        }
    }
}

/// Draw `N` samples of every edge from its marginal posterior.
///
/// Each pair gets its own stream derived from `(seed, pair index)`, so the
/// result does not depend on the number of worker threads.
pub fn sample_edges(partial: &DMatrix<f64>, config: &SamplingConfig) -> Result<GraphSampleSet> {
    if config.n_samples == 0 {
        return Err(Error::Contract("sample count must be at least 1".into()));
    }
    let psis = upper_triangle(partial)?;
    let marginals: Vec<EdgeMarginal> = psis
        .iter()
        .map(|&psi| EdgeMarginal::with_bound(psi, config.variance_bound))
        .collect();
    let n = config.n_samples;

    let columns: Vec<(Vec<bool>, u64, bool)> = marginals
        .par_iter()
        .enumerate()
        .map(|(pair, marginal)| {
            let mut rng = pair_rng(config.seed, pair);
            let mut column = Vec::with_capacity(n);
            match config.method {
                SamplingMethod::Rejection(proposal) => {
                    let sampler = EdgeSampler::new(*marginal, proposal);
                    let mut proposals = 0u64;
                    for _ in 0..n {
                        let (edge, tries) = sampler.sample(&mut rng);
                        proposals += tries as u64;
                        column.push(edge);
                    }
                    (column, proposals, sampler.clamped)
                }
                SamplingMethod::Direct => {
                    let p = marginal.prob(true);
                    column.extend((0..n).map(|_| rng.random::<f64>() < p));
                    (column, n as u64, false)
                }
            }
        })
        .collect();

    let n_pairs = psis.len();
    let mut edges = EdgeBits::new(n, n_pairs);
    let mut edge_freq = Vec::with_capacity(n_pairs);
    let mut stats = SamplerStats::default();
    for (pair, (column, proposals, clamped)) in columns.iter().enumerate() {
        let mut present = 0usize;
        for (r, &edge) in column.iter().enumerate() {
            if edge {
                edges.set(r, pair, true);
                present += 1;
            }
        }
        edge_freq.push(present as f64 / n as f64);
        stats.draws += n as u64;
        stats.proposals += proposals;
        stats.clamped_pairs += usize::from(*clamped);
    }

    let log_posterior = log_posterior_rows(&edges, &marginals);
    Ok(GraphSampleSet {
        n_joints: partial.nrows(),
        n_samples: n,
        edges,
        log_posterior,
        edge_freq,
        method: config.method,
        rng_seed: config.seed,
        stats,
    })
}

fn log_posterior_rows(edges: &EdgeBits, marginals: &[EdgeMarginal]) -> Vec<f64> {
    let table: Vec<[f64; 2]> = marginals
        .iter()
        .map(|m| [m.ln_prob(false), m.ln_prob(true)])
        .collect();
    (0..edges.rows())
        .into_par_iter()
        .map(|r| {
            table
                .iter()
                .enumerate()
                .map(|(e, ln)| ln[usize::from(edges.get(r, e))])
                .sum()
        })
        .collect()
}

/// Per-draw log of the graph posterior, the sum over node pairs of `ln m(g|ψ)`.
pub fn graph_log_posterior(sample_set: &GraphSampleSet, partial: &DMatrix<f64>) -> Result<Vec<f64>> {
    graph_log_posterior_with_bound(sample_set, partial, 1.0)
}

pub fn graph_log_posterior_with_bound(
    sample_set: &GraphSampleSet,
    partial: &DMatrix<f64>,
    variance_bound: f64,
) -> Result<Vec<f64>> {
    if partial.nrows() != sample_set.n_joints {
        return Err(Error::Contract(format!(
            "sample set has {} joints, partial correlation matrix has {}",
            sample_set.n_joints,
            partial.nrows()
        )));
    }
    let marginals: Vec<EdgeMarginal> = upper_triangle(partial)?
        .into_iter()
        .map(|psi| EdgeMarginal::with_bound(psi, variance_bound))
        .collect();
    Ok(log_posterior_rows(&sample_set.edges, &marginals))
}
