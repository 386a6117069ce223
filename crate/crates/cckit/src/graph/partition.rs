//! Contiguous edge-balanced vertex partitioning.
//!
//! A partition map slices `0..n` into `k` contiguous ranges and assigns each
//! range to a machine rank. Ownership of a vertex is ownership of its range.

use super::{Graph, GraphError};
use crate::{Rank, VertexId};

/// `k` contiguous vertex ranges plus a range-to-rank assignment.
///
/// `boundaries` has `k + 1` non-decreasing entries with `boundaries[0] == 0`
/// and `boundaries[k] == n`; range `i` is `boundaries[i]..boundaries[i + 1]`.
/// Empty ranges are legal (they arise when `k > n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMap {
    boundaries: Vec<VertexId>,
    rank_of_partition: Vec<Rank>,
    ranks: u32,
}

impl PartitionMap {
    pub fn partition_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn ranks(&self) -> u32 {
        self.ranks
    }

    pub fn boundaries(&self) -> &[VertexId] {
        &self.boundaries
    }

    pub fn partition_range(&self, i: usize) -> std::ops::Range<VertexId> {
        self.boundaries[i]..self.boundaries[i + 1]
    }

    pub fn rank_of_partition(&self, i: usize) -> Rank {
        self.rank_of_partition[i]
    }

    /// Partitions assigned to `rank`, in index order.
    pub fn partitions_of_rank(&self, rank: Rank) -> Vec<usize> {
        (0..self.partition_count())
            .filter(|&i| self.rank_of_partition[i] == rank)
            .collect()
    }

    /// Index of the (non-empty) range containing `v`.
    pub fn partition_of(&self, v: VertexId) -> Result<usize, GraphError> {
        let n = *self.boundaries.last().unwrap();
        if v >= n {
            return Err(GraphError::OutOfRange { v, n });
        }
        // Last boundary ≤ v starts the range holding v; empty ranges share a
        // boundary with their successor and are skipped by taking the last.
        let i = self.boundaries.partition_point(|&b| b <= v) - 1;
        debug_assert!(self.partition_range(i).contains(&v));
        Ok(i)
    }

    /// Rank owning `v`.
    pub fn owner_of(&self, v: VertexId) -> Result<Rank, GraphError> {
        Ok(self.rank_of_partition[self.partition_of(v)?])
    }

    /// Reassigns partitions round-robin over `m` ranks by partition index.
    pub fn with_round_robin_ranks(mut self, m: u32) -> Self {
        assert!(m > 0);
        for (i, r) in self.rank_of_partition.iter_mut().enumerate() {
            *r = (i % m as usize) as Rank;
        }
        self.ranks = m;
        self
    }

    /// Reassigns partitions to `m` ranks as contiguous, nearly equal runs.
    pub fn with_contiguous_ranks(mut self, m: u32) -> Self {
        assert!(m > 0);
        let k = self.partition_count();
        for r in 0..m as usize {
            let lo = r * k / m as usize;
            let hi = (r + 1) * k / m as usize;
            for i in lo..hi {
                self.rank_of_partition[i] = r as Rank;
            }
        }
        self.ranks = m;
        self
    }
}

/// Splits the vertex range into `k` contiguous partitions balanced by edge
/// count. Each non-final range takes at least one vertex (while any remain)
/// and extends until its edge count reaches
/// `ceil(remaining_edges / remaining_ranges)`; the final range absorbs the
/// tail. Partition `i` is initially assigned to rank `i`.
pub fn partition_edge_balanced(graph: &Graph, k: usize) -> Result<PartitionMap, GraphError> {
    if k == 0 {
        return Err(GraphError::Domain("partition count must be at least 1".into()));
    }
    let n = graph.vertex_count();
    let mut boundaries = Vec::with_capacity(k + 1);
    boundaries.push(0);
    let mut start: VertexId = 0;
    let mut edges_done: u64 = 0;
    for i in 0..k - 1 {
        let remaining_ranges = (k - i) as u64;
        let target = (graph.edge_count() - edges_done).div_ceil(remaining_ranges);
        let mut end = start;
        let mut in_range: u64 = 0;
        while end < n {
            in_range += graph.degree(end);
            end += 1;
            if in_range >= target {
                break;
            }
        }
        boundaries.push(end);
        start = end;
        edges_done += in_range;
    }
    boundaries.push(n);
    Ok(PartitionMap {
        rank_of_partition: (0..k as Rank).collect(),
        boundaries,
        ranks: k as u32,
    })
}
