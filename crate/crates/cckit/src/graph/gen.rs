//! Deterministic graph generators. The same kind, size and seed always
//! produce the same edge list, byte for byte.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EdgeList, GraphError};

/// Generator families. `ErdosRenyi` and `PlantedGiant` take an edge budget;
/// the closed-form kinds do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    ErdosRenyi,
    PlantedGiant,
    Path,
    Star,
    Complete,
}

impl std::str::FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "erdos_renyi" => Ok(GraphKind::ErdosRenyi),
            "planted_giant" => Ok(GraphKind::PlantedGiant),
            "path" => Ok(GraphKind::Path),
            "star" => Ok(GraphKind::Star),
            "complete" => Ok(GraphKind::Complete),
            other => Err(format!("unknown graph kind {other:?}")),
        }
    }
}

/// Generates an edge list.
///
/// * `ErdosRenyi`: exactly `m_target` uniform pairs; self-loops and
///   duplicates are possible and kept.
/// * `PlantedGiant`: one planted component covering at least 94% of the
///   vertices (including the max-degree vertex) plus small satellite
///   components; `m_target` is a floor-bounded total edge budget.
/// * `Path`, `Star`, `Complete`: closed forms; passing `m_target` is an
///   error because the edge count is implied by `n`.
pub fn generate_graph(
    kind: GraphKind,
    n: u64,
    m_target: Option<u64>,
    seed: u64,
) -> Result<EdgeList, GraphError> {
    match kind {
        GraphKind::ErdosRenyi => erdos_renyi(n, require_budget(kind, m_target)?, seed),
        GraphKind::PlantedGiant => planted_giant(n, require_budget(kind, m_target)?, seed),
        GraphKind::Path | GraphKind::Star | GraphKind::Complete => {
            if m_target.is_some() {
                return Err(GraphError::Domain(format!(
                    "{kind:?} has a fixed edge count; do not pass an edge budget"
                )));
            }
            Ok(match kind {
                GraphKind::Path => path(n),
                GraphKind::Star => star(n),
                GraphKind::Complete => complete(n),
                _ => unreachable!(),
            })
        }
    }
}

fn require_budget(kind: GraphKind, m_target: Option<u64>) -> Result<u64, GraphError> {
    m_target.ok_or_else(|| GraphError::Domain(format!("{kind:?} requires an edge budget")))
}

fn erdos_renyi(n: u64, m_target: u64, seed: u64) -> Result<EdgeList, GraphError> {
    if n == 0 && m_target > 0 {
        return Err(GraphError::Domain(
            "cannot place edges in a graph with no vertices".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m_target as usize);
    for _ in 0..m_target {
        edges.push((rng.random_range(0..n), rng.random_range(0..n)));
    }
    Ok(EdgeList { n, edges })
}

/// Giant size: 95% of `n`, rounded up, so the giant always covers at least
/// 94% after integer effects.
fn giant_size(n: u64) -> u64 {
    (n * 95).div_ceil(100)
}

fn planted_giant(n: u64, m_target: u64, seed: u64) -> Result<EdgeList, GraphError> {
    if n == 0 {
        return if m_target == 0 {
            Ok(EdgeList { n, edges: Vec::new() })
        } else {
            Err(GraphError::Domain(
                "cannot place edges in a graph with no vertices".into(),
            ))
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = giant_size(n);
    let hub = g / 2;
    let mut edges = Vec::new();

    // Random spanning tree over 0..g keeps the giant connected.
    for v in 1..g {
        edges.push((rng.random_range(0..v), v));
    }

    // The hub gets enough stored out-degree to dominate any vertex that the
    // extra-edge sampling below could plausibly produce.
    let boost = (g / 8).max(24).min(g.saturating_sub(1));
    for _ in 0..boost {
        let mut t = rng.random_range(0..g);
        if t == hub {
            t = (hub + 1) % g;
        }
        edges.push((hub, t));
    }

    // Satellites: chains of one to three vertices outside the giant.
    let mut v = g;
    while v < n {
        let len = (rng.random_range(1..=3u64)).min(n - v);
        for i in 1..len {
            edges.push((v + i - 1, v + i));
        }
        v += len;
    }

    // Remaining budget becomes random intra-giant edges.
    while (edges.len() as u64) < m_target {
        edges.push((rng.random_range(0..g), rng.random_range(0..g)));
    }
    Ok(EdgeList { n, edges })
}

fn path(n: u64) -> EdgeList {
    EdgeList {
        n,
        edges: (1..n).map(|v| (v - 1, v)).collect(),
    }
}

fn star(n: u64) -> EdgeList {
    EdgeList {
        n,
        edges: (1..n).map(|v| (0, v)).collect(),
    }
}

fn complete(n: u64) -> EdgeList {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            edges.push((u, v));
        }
    }
    EdgeList { n, edges }
}
