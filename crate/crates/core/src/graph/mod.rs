//! Random geometric graph variables learnt from a partial-correlation matrix.

pub mod container;
pub mod marginal;
pub mod realize;
pub mod sampler;

pub use marginal::{edge_marginal_bracket, edge_marginal_bracket_with_bound, edge_posterior, EdgeMarginal};
pub use realize::{realize_graph, GraphRealization};
pub use sampler::{
    graph_log_posterior, sample_edges, GraphSampleSet, Proposal, SamplerStats, SamplingConfig, SamplingMethod,
};

/// Number of unordered node pairs, `S(S−1)/2`.
pub fn pair_count(n_joints: usize) -> usize {
    n_joints * n_joints.saturating_sub(1) / 2
}

/// Node pairs `(s, s')`, `s < s'`, in row-major upper-triangle order.
pub fn pairs(n_joints: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_joints).flat_map(move |a| ((a + 1)..n_joints).map(move |b| (a, b)))
}

/// Position of `(a, b)` in [`pairs`] order.
pub fn pair_index(n_joints: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    debug_assert!(b < n_joints && a != b);
    a * (2 * n_joints - a - 1) / 2 + (b - a - 1)
}

/// Row-major bit matrix of edge draws, one row per draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeBits {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl EdgeBits {
    pub fn new(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        EdgeBits {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        let word = self.words[row * self.words_per_row + col / 64];
        (word >> (col % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let word = &mut self.words[row * self.words_per_row + col / 64];
        let mask = 1u64 << (col % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = bool> + '_ {
        (0..self.cols).map(move |c| self.get(row, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_order_is_row_major() {
        let p: Vec<_> = pairs(4).collect();
        assert_eq!(p, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(pair_count(20), 190);
        for (i, (a, b)) in pairs(20).enumerate() {
            assert_eq!(pair_index(20, a, b), i);
            assert_eq!(pair_index(20, b, a), i);
        }
    }

    #[test]
    fn bits_set_get() {
        let mut bits = EdgeBits::new(3, 130);
        bits.set(1, 0, true);
        bits.set(1, 64, true);
        bits.set(2, 129, true);
        assert!(bits.get(1, 0) && bits.get(1, 64) && bits.get(2, 129));
        assert!(!bits.get(0, 0) && !bits.get(1, 1));
        bits.set(1, 64, false);
        assert!(!bits.get(1, 64));
        assert_eq!(bits.row(2).filter(|&b| b).count(), 1);
    }
}
