//! Graph storage and ingest.
//!
//! Graphs are directed multigraphs in CSR form. Connectivity treats edges as
//! undirected, but nothing here symmetrizes: the engines hook both endpoints
//! of each stored edge, and only the [`crate::oracle`] builds a reverse index.

mod gen;
mod io;
mod partition;

pub use gen::{generate_graph, GraphKind};
pub use io::{
    load_edge_list, read_ccfb, write_ccfb, write_edge_list, CCFB_MAGIC, CCFB_VERSION,
};
pub use partition::{partition_edge_balanced, PartitionMap};

use crate::VertexId;

/// Errors for graph construction, parsing, partitioning and file I/O.
#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vertex {v} out of range for graph with {n} vertices")]
    OutOfRange { v: VertexId, n: u64 },
    #[error("{0}")]
    Domain(String),
    #[error("bad graph file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Edge list staging form: `n` vertices and directed edges `(u, v)`.
/// Self-loops and duplicates are legal and preserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeList {
    pub n: u64,
    pub edges: Vec<(VertexId, VertexId)>,
}

impl EdgeList {
    pub fn new(n: u64, edges: Vec<(VertexId, VertexId)>) -> Self {
        EdgeList { n, edges }
    }
}

/// Compressed sparse row graph. `offsets` has `n + 1` entries; the neighbors
/// of `v` occupy `neighbors[offsets[v]..offsets[v + 1]]` in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<u64>,
    neighbors: Vec<VertexId>,
}

impl Graph {
    /// Number of vertices.
    pub fn vertex_count(&self) -> u64 {
        (self.offsets.len() - 1) as u64
    }

    /// Number of stored (directed) edges.
    pub fn edge_count(&self) -> u64 {
        *self.offsets.last().expect("offsets never empty")
    }

    /// Out-degree of `v` in the stored direction.
    pub fn degree(&self, v: VertexId) -> u64 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    /// Neighbors of `v` in the stored direction, ascending.
    pub fn neighbors_of(&self, v: VertexId) -> &[VertexId] {
        &self.neighbors[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn vertices(&self) -> std::ops::Range<VertexId> {
        0..self.vertex_count()
    }

    /// Rebuilds the staging edge list `(u, v)` ordered by `u`, then `v`.
    pub fn to_edge_list(&self) -> EdgeList {
        let mut edges = Vec::with_capacity(self.edge_count() as usize);
        for u in self.vertices() {
            for &v in self.neighbors_of(u) {
                edges.push((u, v));
            }
        }
        EdgeList::new(self.vertex_count(), edges)
    }

    /// Assembles a CSR directly from parts. Used by the binary reader, which
    /// has already validated monotone offsets and neighbor bounds.
    pub(crate) fn from_parts(offsets: Vec<u64>, neighbors: Vec<VertexId>) -> Self {
        debug_assert!(!offsets.is_empty());
        debug_assert_eq!(*offsets.last().unwrap() as usize, neighbors.len());
        Graph { offsets, neighbors }
    }
}

/// Builds a CSR from an edge list with a counting sort on the source vertex;
/// each adjacency run is then sorted ascending. Duplicate edges and
/// self-loops are preserved as stored.
pub fn build_csr(list: &EdgeList) -> Result<Graph, GraphError> {
    let n = list.n;
    let mut counts = vec![0u64; n as usize + 1];
    for &(u, v) in &list.edges {
        if u >= n {
            return Err(GraphError::OutOfRange { v: u, n });
        }
        if v >= n {
            return Err(GraphError::OutOfRange { v, n });
        }
        counts[u as usize + 1] += 1;
    }
    for i in 0..n as usize {
        counts[i + 1] += counts[i];
    }
    let offsets = counts;
    let mut cursor = offsets.clone();
    let mut neighbors = vec![0 as VertexId; list.edges.len()];
    for &(u, v) in &list.edges {
        neighbors[cursor[u as usize] as usize] = v;
        cursor[u as usize] += 1;
    }
    for v in 0..n as usize {
        neighbors[offsets[v] as usize..offsets[v + 1] as usize].sort_unstable();
    }
    Ok(Graph { offsets, neighbors })
}

/// Vertex with the maximum stored out-degree; ties break toward the lowest
/// ID. Degrees are taken on the stored direction, not a symmetrized view.
///
/// Returns `None` for the empty graph.
pub fn max_degree_vertex(graph: &Graph) -> Option<VertexId> {
    let mut best: Option<(u64, VertexId)> = None;
    for v in graph.vertices() {
        let d = graph.degree(v);
        // Strict comparison keeps the first (lowest-ID) vertex on ties.
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, v));
        }
    }
    best.map(|(_, v)| v)
}
