//! Discretized Hellinger distance and Kullback–Leibler divergence between the
//! per-draw graph posteriors of two sessions.
//!
//! The `r`-th draw of one sample set is paired with the `r`-th draw of the
//! other, so both sets must have the same draw count and node count. Graph
//! posteriors are products of a few hundred probabilities and are handled in
//! log space; each distance multiplies the posteriors by its own scale factor
//! before combining them.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSampleSet;

pub const DEFAULT_SCALE_HELLINGER: f64 = 1e15;
pub const DEFAULT_SCALE_KL: f64 = 1e25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceScales {
    pub hellinger: f64,
    pub kl: f64,
}

impl Default for DistanceScales {
    fn default() -> Self {
        DistanceScales {
            hellinger: DEFAULT_SCALE_HELLINGER,
            kl: DEFAULT_SCALE_KL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub hellinger: f64,
    pub kl: f64,
    pub n_samples: usize,
    pub scale_hellinger: f64,
    pub scale_kl: f64,
}

const LEAF: usize = 1024;

/// Sum with a fixed binary reduction tree, so the result is independent of
/// how many threads take part.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    let (left, right) = rayon::join(|| pairwise_sum(&values[..mid]), || pairwise_sum(&values[mid..]));
    left + right
}

fn check_compatible(a: &GraphSampleSet, b: &GraphSampleSet) -> Result<()> {
    if a.n_samples != b.n_samples || a.log_posterior.len() != b.log_posterior.len() {
        return Err(Error::Contract(format!(
            "sample counts differ: {} vs {}",
            a.n_samples, b.n_samples
        )));
    }
    if a.n_joints != b.n_joints {
        return Err(Error::Contract(format!(
            "node counts differ: {} vs {}",
            a.n_joints, b.n_joints
        )));
    }
    if a.n_samples == 0 {
        return Err(Error::Contract("empty sample sets".into()));
    }
    Ok(())
}

/// `sqrt( (1/N) Σ_r (sqrt(c·π_a⁽ʳ⁾) − sqrt(c·π_b⁽ʳ⁾))² )`.
pub fn hellinger(a: &GraphSampleSet, b: &GraphSampleSet, scale: f64) -> Result<f64> {
    check_compatible(a, b)?;
    Ok(hellinger_from_log(&a.log_posterior, &b.log_posterior, scale))
}

pub fn hellinger_from_log(log_a: &[f64], log_b: &[f64], scale: f64) -> f64 {
    let shift = log_a
        .iter()
        .chain(log_b)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = log_a
        .par_iter()
        .zip(log_b.par_iter())
        .map(|(&la, &lb)| {
            let d = (0.5 * (la - shift)).exp() - (0.5 * (lb - shift)).exp();
            d * d
        })
        .collect();
    let total = pairwise_sum(&terms);
    if total == 0.0 {
        return 0.0;
    }
    (0.5 * (scale.ln() + shift - (log_a.len() as f64).ln() + total.ln())).exp()
}

/// `Σ_r c·π_a⁽ʳ⁾ · (ln π_a⁽ʳ⁾ − ln π_b⁽ʳ⁾)`; `a` is the later session.
pub fn kl_divergence(a: &GraphSampleSet, b: &GraphSampleSet, scale: f64) -> Result<f64> {
    check_compatible(a, b)?;
    Ok(kl_from_log(&a.log_posterior, &b.log_posterior, scale))
}

pub fn kl_from_log(log_a: &[f64], log_b: &[f64], scale: f64) -> f64 {
    let shift = log_a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = log_a
        .par_iter()
        .zip(log_b.par_iter())
        .map(|(&la, &lb)| (la - shift).exp() * (la - lb))
        .collect();
    let total = pairwise_sum(&terms);
    if total == 0.0 {
        return 0.0;
    }
    total.signum() * (scale.ln() + shift + total.abs().ln()).exp()
}

/// Both distances between a later session `a` and the preceding session `b`.
pub fn compare(later: &GraphSampleSet, earlier: &GraphSampleSet, scales: &DistanceScales) -> Result<DistanceResult> {
    Ok(DistanceResult {
        hellinger: hellinger(later, earlier, scales.hellinger)?,
        kl: kl_divergence(later, earlier, scales.kl)?,
        n_samples: later.n_samples,
        scale_hellinger: scales.hellinger,
        scale_kl: scales.kl,
    })
}

/// One row of a distance table: the instance pair `(j−1, j)` and its distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub earlier: u32,
    pub later: u32,
    pub hellinger: f64,
    pub kl: f64,
}

fn format_pair(earlier: u32, later: u32) -> String {
    format!("({earlier},{later})")
}

fn parse_pair(field: &str) -> Option<(u32, u32)> {
    let inner = field.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// `instance_pair,hellinger,kl`.
pub fn write_distance_csv(path: &Path, rows: &[DistanceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["instance_pair", "hellinger", "kl"])?;
    for row in rows {
        w.write_record([
            format_pair(row.earlier, row.later),
            row.hellinger.to_string(),
            row.kl.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_distance_csv(path: &Path) -> Result<Vec<DistanceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            frame: i,
            message,
        };
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", record.len())));
        }
        let (earlier, later) =
            parse_pair(&record[0]).ok_or_else(|| parse_err(format!("bad instance pair `{}`", &record[0])))?;
        let number = |s: &str| s.trim().parse::<f64>().map_err(|e| parse_err(format!("`{s}`: {e}")));
        rows.push(DistanceRow {
            earlier,
            later,
            hellinger: number(&record[1])?,
            kl: number(&record[2])?,
        });
    }
    Ok(rows)
}
