//! Sequential reference implementation and verification helpers.
//!
//! The oracle treats every stored edge as undirected by building a reverse
//! index once; the engines under test never symmetrize, so agreement here is
//! meaningful evidence, not a shared shortcut.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::graph::Graph;
use crate::jt::RootFn;
use crate::{RootValue, VertexId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("label arrays differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("vertex {vertex}: expected label {expected}, found {actual}")]
    CanonicalMismatch {
        vertex: VertexId,
        expected: RootValue,
        actual: RootValue,
    },
}

/// BFS result: per-vertex labels plus component census.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleLabels {
    labels: Vec<VertexId>,
    component_sizes: BTreeMap<VertexId, u64>,
}

impl OracleLabels {
    /// Per-vertex labels; the label of a component is its minimum vertex ID.
    pub fn labels(&self) -> &[VertexId] {
        &self.labels
    }

    pub fn component_count(&self) -> u64 {
        self.component_sizes.len() as u64
    }

    /// Component sizes keyed by label.
    pub fn component_sizes(&self) -> &BTreeMap<VertexId, u64> {
        &self.component_sizes
    }

    pub fn largest_component_size(&self) -> u64 {
        self.component_sizes.values().copied().max().unwrap_or(0)
    }

    /// Label of the largest component; ties break toward the smaller label.
    pub fn largest_component_label(&self) -> Option<VertexId> {
        self.component_sizes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&label, _)| label)
    }
}

/// Breadth-first connected components over the undirected view of `graph`.
/// Scanning seeds in ascending order makes each component's label its
/// minimum vertex ID.
pub fn bfs_components(graph: &Graph) -> OracleLabels {
    let n = graph.vertex_count() as usize;
    let reverse = transpose(graph);
    let mut labels: Vec<VertexId> = vec![0; n];
    let mut visited = vec![false; n];
    let mut sizes = BTreeMap::new();
    let mut queue = VecDeque::new();
    for seed in 0..n as VertexId {
        if visited[seed as usize] {
            continue;
        }
        let mut size = 0u64;
        visited[seed as usize] = true;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            labels[v as usize] = seed;
            size += 1;
            for &next in graph.neighbors_of(v).iter().chain(reverse.neighbors_of(v)) {
                if !visited[next as usize] {
                    visited[next as usize] = true;
                    queue.push_back(next);
                }
            }
        }
        sizes.insert(seed, size);
    }
    OracleLabels {
        labels,
        component_sizes: sizes,
    }
}

fn transpose(graph: &Graph) -> Graph {
    let list = graph.to_edge_list();
    let reversed: Vec<(VertexId, VertexId)> = list.edges.iter().map(|&(u, v)| (v, u)).collect();
    crate::graph::build_csr(&crate::graph::EdgeList::new(list.n, reversed))
        .expect("transpose of a valid graph is valid")
}

/// True when `a` and `b` induce the same partition of the vertex set, i.e.
/// their label sets are related by a bijection.
pub fn partitions_equivalent(a: &[RootValue], b: &[RootValue]) -> Result<bool, OracleError> {
    if a.len() != b.len() {
        return Err(OracleError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let mut forward: BTreeMap<RootValue, RootValue> = BTreeMap::new();
    let mut backward: BTreeMap<RootValue, RootValue> = BTreeMap::new();
    for (&la, &lb) in a.iter().zip(b) {
        if *forward.entry(la).or_insert(lb) != lb || *backward.entry(lb).or_insert(la) != la {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks that `labels[v]` is exactly the minimum of `f` over `v`'s
/// component, which is the canonical output of every engine in this crate.
pub fn check_canonical_labels(
    graph: &Graph,
    labels: &[RootValue],
    f: &RootFn,
) -> Result<(), OracleError> {
    let n = graph.vertex_count() as usize;
    if labels.len() != n {
        return Err(OracleError::LengthMismatch { a: labels.len(), b: n });
    }
    let oracle = bfs_components(graph);
    // Minimum of f per oracle component.
    let mut min_value: BTreeMap<VertexId, RootValue> = BTreeMap::new();
    for v in graph.vertices() {
        let entry = min_value
            .entry(oracle.labels()[v as usize])
            .or_insert(RootValue::MAX);
        *entry = (*entry).min(f.value_of(v));
    }
    for v in graph.vertices() {
        let expected = min_value[&oracle.labels()[v as usize]];
        let actual = labels[v as usize];
        if actual != expected {
            return Err(OracleError::CanonicalMismatch { vertex: v, expected, actual });
        }
    }
    Ok(())
}

/// Census of an arbitrary label array: component count, largest size, and a
/// histogram mapping component size to the number of components of that size.
pub fn component_stats(labels: &[RootValue]) -> (u64, u64, BTreeMap<u64, u64>) {
    let mut sizes: BTreeMap<RootValue, u64> = BTreeMap::new();
    for &label in labels {
        *sizes.entry(label).or_insert(0) += 1;
    }
    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    for &size in sizes.values() {
        *histogram.entry(size).or_insert(0) += 1;
    }
    let largest = sizes.values().copied().max().unwrap_or(0);
    (sizes.len() as u64, largest, histogram)
}
