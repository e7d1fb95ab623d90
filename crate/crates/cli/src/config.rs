//! Settings shared by the subcommands, layered as defaults < config file < flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use recovgraph::correlation::RidgeLadder;
use recovgraph::distance::DistanceScales;
use recovgraph::{Proposal, RunConfig, SamplingMethod};
use serde::Deserialize;

/// Keys accepted in a TOML config file. Names match the long flags, with `_` for `-`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub proposal: Option<String>,
    pub direct_sampling: Option<bool>,
    pub seed: Option<u64>,
    pub tau: Option<Vec<f64>>,
    pub scale_hellinger: Option<f64>,
    pub scale_kl: Option<f64>,
    pub joints: Option<usize>,
    pub ridge_ladder: Option<Vec<f64>>,
    pub variance_bound: Option<f64>,
    pub dump_correlation: Option<bool>,
    pub save_samples: Option<bool>,
    pub all_pairs: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Sampling and distance flags.
#[derive(Debug, Default, Clone, Args)]
pub struct SamplingArgs {
    /// Draws per edge [default: 50000]
    #[arg(long = "samples", value_name = "N")]
    pub samples: Option<usize>,
    /// Rejection-sampling proposal density: uniform|bernoulli [default: uniform]
    #[arg(long)]
    pub proposal: Option<Proposal>,
    /// Sample edges by inversion instead of rejection sampling
    #[arg(long)]
    pub direct_sampling: bool,
    /// RNG seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated cutoffs for graph realizations [default: 0.2]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub tau: Option<Vec<f64>>,
    /// Scale applied to graph posteriors for the Hellinger distance [default: 1e15]
    #[arg(long)]
    pub scale_hellinger: Option<f64>,
    /// Scale applied to graph posteriors for the KL divergence [default: 1e25]
    #[arg(long)]
    pub scale_kl: Option<f64>,
    /// Tracked joints per frame [default: 20]
    #[arg(long)]
    pub joints: Option<usize>,
    /// Comma-separated ridge values tried when inversion fails [default: 1e-10,1e-8,1e-6,1e-4]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub ridge_ladder: Option<Vec<f64>>,
    /// Upper bound of the variance marginalization interval [default: 1]
    #[arg(long)]
    pub variance_bound: Option<f64>,
}

impl SamplingArgs {
    /// Merge flags over file values over defaults.
    pub fn resolve(&self, file: &FileConfig) -> anyhow::Result<RunConfig> {
        let d = RunConfig::default();
        let proposal = match (self.proposal, &file.proposal) {
            (Some(p), _) => p,
            (None, Some(s)) => s.parse().map_err(anyhow::Error::msg)?,
            (None, None) => Proposal::Uniform,
        };
        let method = if self.direct_sampling || file.direct_sampling.unwrap_or(false) {
            SamplingMethod::Direct
        } else {
            SamplingMethod::Rejection(proposal)
        };
        let config = RunConfig {
            n_samples: self.samples.or(file.samples).unwrap_or(d.n_samples),
            method,
            seed: self.seed.or(file.seed).unwrap_or(d.seed),
            taus: self.tau.clone().or_else(|| file.tau.clone()).unwrap_or(d.taus),
            scales: DistanceScales {
                hellinger: self.scale_hellinger.or(file.scale_hellinger).unwrap_or(d.scales.hellinger),
                kl: self.scale_kl.or(file.scale_kl).unwrap_or(d.scales.kl),
            },
            ridge_ladder: self
                .ridge_ladder
                .clone()
                .or_else(|| file.ridge_ladder.clone())
                .map(RidgeLadder)
                .unwrap_or(d.ridge_ladder),
            n_joints: self.joints.or(file.joints).unwrap_or(d.n_joints),
            variance_bound: self.variance_bound.or(file.variance_bound).unwrap_or(d.variance_bound),
            ..d
        };
        if config.n_samples == 0 {
            bail!("--samples must be at least 1");
        }
        if let Some(t) = config.taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            bail!("tau {t} outside [0, 1]");
        }
        if !(config.variance_bound > 0.0) {
            bail!("--variance-bound must be positive");
        }
        if !(config.scales.hellinger > 0.0 && config.scales.kl > 0.0) {
            bail!("scales must be positive");
        }
        Ok(config)
    }
}
