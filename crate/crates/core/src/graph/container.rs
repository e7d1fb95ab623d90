//! Compact binary container for a [`GraphSampleSet`].
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field                                              |
//! |--------|------|----------------------------------------------------|
//! | 0      | 8    | magic `RGGSMPL1`                                   |
//! | 8      | 4    | `S`, node count (u32)                              |
//! | 12     | 4    | `E = S(S−1)/2`, pair count (u32)                   |
//! | 16     | 8    | `N`, draw count (u64)                              |
//! | 24     | 8    | RNG seed (u64)                                     |
//! | 32     | 1    | method: 0 uniform, 1 bernoulli, 2 direct           |
//! | 33     | N·⌈E/8⌉ | edges, one row per draw; pair `e` is bit `e % 8` (LSB first) of byte `e / 8` |
//! | ...    | 8·N  | per-draw log posterior (f64)                       |
//!
//! Edge frequencies are recomputed on load; sampler statistics are not stored.

use std::fs;
use std::path::Path;

use super::sampler::{GraphSampleSet, Proposal, SamplerStats, SamplingMethod};
use super::{pair_count, EdgeBits};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RGGSMPL1";
const HEADER_LEN: usize = 33;

fn method_code(method: SamplingMethod) -> u8 {
    match method {
        SamplingMethod::Rejection(Proposal::Uniform) => 0,
        SamplingMethod::Rejection(Proposal::Bernoulli) => 1,
        SamplingMethod::Direct => 2,
    }
}

pub fn encode(set: &GraphSampleSet) -> Vec<u8> {
    let e = set.n_pairs();
    let row_bytes = e.div_ceil(8);
    let mut out = Vec::with_capacity(HEADER_LEN + set.n_samples * (row_bytes + 8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(set.n_joints as u32).to_le_bytes());
    out.extend_from_slice(&(e as u32).to_le_bytes());
    out.extend_from_slice(&(set.n_samples as u64).to_le_bytes());
    out.extend_from_slice(&set.rng_seed.to_le_bytes());
    out.push(method_code(set.method));
    for r in 0..set.n_samples {
        let mut row = vec![0u8; row_bytes];
        for (col, bit) in set.edges.row(r).enumerate() {
            if bit {
                row[col / 8] |= 1 << (col % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    for v in &set.log_posterior {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<GraphSampleSet> {
    let bad = |m: &str| Error::Container(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let n_joints = u32_at(8);
    let e = u32_at(12);
    let n = usize::try_from(u64_at(16)).map_err(|_| bad("draw count overflows"))?;
    let seed = u64_at(24);
    let method = match bytes[32] {
        0 => SamplingMethod::Rejection(Proposal::Uniform),
        1 => SamplingMethod::Rejection(Proposal::Bernoulli),
        2 => SamplingMethod::Direct,
        other => return Err(Error::Container(format!("unknown method code {other}"))),
    };
    if e != pair_count(n_joints) {
        return Err(Error::Container(format!("{e} pairs for {n_joints} nodes")));
    }
    let row_bytes = e.div_ceil(8);
    let expected = n
        .checked_mul(row_bytes + 8)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| bad("size overflows"))?;
    if bytes.len() != expected {
        return Err(Error::Container(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut edges = EdgeBits::new(n, e);
    let mut counts = vec![0usize; e];
    for r in 0..n {
        let row = &bytes[HEADER_LEN + r * row_bytes..HEADER_LEN + (r + 1) * row_bytes];
        for (col, count) in counts.iter_mut().enumerate() {
            if row[col / 8] >> (col % 8) & 1 == 1 {
                edges.set(r, col, true);
                *count += 1;
            }
        }
    }
    let lp_start = HEADER_LEN + n * row_bytes;
    let log_posterior = bytes[lp_start..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GraphSampleSet {
        n_joints,
        n_samples: n,
        edges,
        log_posterior,
        edge_freq: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        method,
        rng_seed: seed,
        stats: SamplerStats::default(),
    })
}

pub fn save(set: &GraphSampleSet, path: &Path) -> Result<()> {
    fs::write(path, encode(set)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<GraphSampleSet> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
