use std::path::Path;

use nalgebra::DMatrix;

use super::{pairs, GraphSampleSet};
use crate::error::{Error, Result};

/// Deterministic graph keeping exactly the edges whose frequency `ν ≥ τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRealization {
    pub adjacency: DMatrix<u8>,
    pub tau: f64,
}

impl GraphRealization {
    pub fn n_edges(&self) -> usize {
        pairs(self.adjacency.nrows())
            .filter(|&(a, b)| self.adjacency[(a, b)] == 1)
            .count()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.adjacency.nrows())
            .filter(|&(a, b)| self.adjacency[(a, b)] == 1)
            .collect()
    }

    /// `node_a,node_b,edge_freq` rows for every present edge.
    pub fn write_edge_list(&self, path: &Path, names: &[String], edge_freq: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["node_a", "node_b", "edge_freq"])?;
        for (i, (a, b)) in pairs(self.adjacency.nrows()).enumerate() {
            if self.adjacency[(a, b)] == 1 {
                w.write_record([names[a].as_str(), names[b].as_str(), &edge_freq[i].to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Header of node names followed by `S` rows of 0/1.
    pub fn write_adjacency(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(names)?;
        for row in self.adjacency.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn realize_graph(sample_set: &GraphSampleSet, tau: f64) -> Result<GraphRealization> {
    realize_from_frequencies(sample_set.n_joints, &sample_set.edge_freq, tau)
}

pub fn realize_from_frequencies(n_joints: usize, edge_freq: &[f64], tau: f64) -> Result<GraphRealization> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Contract(format!("tau = {tau} outside [0, 1]")));
    }
    let mut adjacency = DMatrix::zeros(n_joints, n_joints);
    for ((a, b), &nu) in pairs(n_joints).zip(edge_freq) {
        if nu >= tau {
            adjacency[(a, b)] = 1;
            adjacency[(b, a)] = 1;
        }
    }
    Ok(GraphRealization { adjacency, tau })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        let freq = [0.0, 0.3, 1.0];
        let full = realize_from_frequencies(3, &freq, 0.0).unwrap();
        assert_eq!(full.n_edges(), 3);
        let one = realize_from_frequencies(3, &freq, 1.0).unwrap();
        assert_eq!(one.edges(), vec![(1, 2)]);
        assert!(realize_from_frequencies(3, &freq, 1.0 + 1e-9).is_err());
        assert!(realize_from_frequencies(3, &freq, -0.1).is_err());
    }

    #[test]
    fn symmetric_no_self_loops() {
        let freq = [0.5, 0.6, 0.2, 0.9, 0.1, 0.4];
        let g = realize_from_frequencies(4, &freq, 0.3).unwrap();
        assert_eq!(g.adjacency, g.adjacency.transpose());
        assert!((0..4).all(|i| g.adjacency[(i, i)] == 0));
        assert_eq!(g.n_edges(), 4);
    }
}
