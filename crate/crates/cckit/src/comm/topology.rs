//! Aggregation topologies over `m` ranks with rank 0 as the sink.

use crate::Rank;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    /// Every rank except 0 is a direct child of rank 0.
    Star,
    /// Binomial tree: the parent of rank `r` is `r` with its lowest set bit
    /// cleared, so subtrees are contiguous rank ranges and a bottom-up
    /// reduction finishes in `ceil(log2 m)` rounds.
    BinomialTree,
}

/// Parent and child links for every rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    kind: TopologyKind,
    parent: Vec<Option<Rank>>,
    children: Vec<Vec<Rank>>,
}

impl Topology {
    pub fn new(kind: TopologyKind, m: u32) -> Self {
        assert!(m >= 1, "a cluster has at least one machine");
        let mut parent = vec![None; m as usize];
        let mut children: Vec<Vec<Rank>> = vec![Vec::new(); m as usize];
        for r in 1..m {
            let p = match kind {
                TopologyKind::Star => 0,
                TopologyKind::BinomialTree => r & (r - 1),
            };
            parent[r as usize] = Some(p);
            children[p as usize].push(r);
        }
        Topology { kind, parent, children }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn machines(&self) -> u32 {
        self.parent.len() as u32
    }

    /// Rank this rank sends aggregated state to; `None` only for rank 0.
    pub fn parent(&self, r: Rank) -> Option<Rank> {
        self.parent[r as usize]
    }

    /// Children in ascending rank order.
    pub fn children(&self, r: Rank) -> &[Rank] {
        &self.children[r as usize]
    }

    pub fn is_leaf(&self, r: Rank) -> bool {
        self.children(r).is_empty() && r != 0
    }

    pub fn leaves(&self) -> Vec<Rank> {
        (0..self.machines()).filter(|&r| self.is_leaf(r)).collect()
    }

    /// Number of rounds a bottom-up reduction needs when every rank accepts
    /// at most one incoming buffer per round and forwards as early as
    /// possible. For the binomial tree this equals `ceil(log2 m)`; for the
    /// star it degenerates to `m - 1`.
    pub fn reduction_depth(&self) -> u32 {
        fn finish_round(topo: &Topology, r: Rank) -> u32 {
            let mut taken: Vec<u32> = Vec::new();
            let mut finish = 0;
            for &c in topo.children(r) {
                let mut round = finish_round(topo, c);
                while taken.contains(&round) {
                    round += 1;
                }
                taken.push(round);
                finish = finish.max(round + 1);
            }
            finish
        }
        finish_round(self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_eight_ranks() {
        let t = Topology::new(TopologyKind::BinomialTree, 8);
        assert_eq!(t.children(0), &[1, 2, 4]);
        assert_eq!(t.children(2), &[3]);
        assert_eq!(t.children(4), &[5, 6]);
        assert_eq!(t.children(6), &[7]);
        assert_eq!(t.leaves(), vec![1, 3, 5, 7]);
        assert_eq!(t.parent(0), None);
        assert_eq!(t.parent(7), Some(6));
        assert_eq!(t.reduction_depth(), 3);
    }

    #[test]
    fn binomial_five_ranks_truncates_cleanly() {
        let t = Topology::new(TopologyKind::BinomialTree, 5);
        assert_eq!(t.children(0), &[1, 2, 4]);
        assert_eq!(t.children(2), &[3]);
        assert_eq!(t.leaves(), vec![1, 3, 4]);
        assert_eq!(t.reduction_depth(), 3);
    }

    #[test]
    fn single_rank_is_just_the_root() {
        let t = Topology::new(TopologyKind::BinomialTree, 1);
        assert_eq!(t.machines(), 1);
        assert_eq!(t.parent(0), None);
        assert!(t.children(0).is_empty());
        assert!(t.leaves().is_empty());
        assert_eq!(t.reduction_depth(), 0);
    }

    #[test]
    fn star_fans_into_rank_zero() {
        let t = Topology::new(TopologyKind::Star, 4);
        assert_eq!(t.children(0), &[1, 2, 3]);
        assert!((1..4).all(|r| t.parent(r) == Some(0) && t.is_leaf(r)));
        assert_eq!(t.reduction_depth(), 3);
    }

    #[test]
    fn binomial_children_match_the_closed_form() {
        // children(r) = { r + 2^k : r + 2^k < m, 2^k < lowest set bit of r },
        // with every power of two below m for r = 0.
        for m in 1u32..=64 {
            let t = Topology::new(TopologyKind::BinomialTree, m);
            for r in 0..m {
                let mut expected = Vec::new();
                let mut step = 1u32;
                let limit = if r == 0 { m } else { r & r.wrapping_neg() };
                while (r == 0 || step < limit) && r + step < m {
                    expected.push(r + step);
                    step <<= 1;
                }
                assert_eq!(t.children(r), &expected[..], "m={m} r={r}");
            }
        }
    }

    #[test]
    fn every_rank_reaches_the_root_without_cycles() {
        for m in 1u32..=64 {
            for kind in [TopologyKind::Star, TopologyKind::BinomialTree] {
                let t = Topology::new(kind, m);
                for r in 0..m {
                    let mut hops = 0;
                    let mut at = r;
                    while let Some(p) = t.parent(at) {
                        assert!(p < at, "parent ranks must decrease");
                        at = p;
                        hops += 1;
                        assert!(hops <= m);
                    }
                    assert_eq!(at, 0);
                }
                let child_total: usize = (0..m).map(|r| t.children(r).len()).sum();
                assert_eq!(child_total as u32, m - 1);
            }
        }
    }

    #[test]
    fn binomial_reduction_depth_is_log_ceiling() {
        for m in 1u32..=64 {
            let t = Topology::new(TopologyKind::BinomialTree, m);
            let expected = if m == 1 { 0 } else { 32 - (m - 1).leading_zeros() };
            assert_eq!(t.reduction_depth(), expected, "m={m}");
        }
    }
}
