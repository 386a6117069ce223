//! When may a machine stop listening?
//!
//! A machine concludes its computation phase once all four hold:
//! its own partitions are hooked, every tree child has reported `Done`,
//! no drained-but-unprocessed work remains, and every record it was told
//! to expect from outside the tree has arrived. Channels deliver in order,
//! so a child's `Done` fences everything that child sent earlier; only
//! traffic from non-child peers needs the explicit expectation counter.

use std::collections::BTreeSet;

use crate::Rank;

#[derive(Debug, Default, Clone)]
pub struct TerminationState {
    partitions_done: bool,
    pending_work: u64,
    awaiting: u64,
    done_children: BTreeSet<Rank>,
}

impl TerminationState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mark_partitions_done(&mut self) {
        self.partitions_done = true;
    }

    pub fn partitions_done(&self) -> bool {
        self.partitions_done
    }

    pub fn add_pending(&mut self, records: u64) {
        self.pending_work += records;
    }

    pub fn finish_pending(&mut self, records: u64) {
        debug_assert!(records <= self.pending_work);
        self.pending_work -= records;
    }

    pub fn pending_work(&self) -> u64 {
        self.pending_work
    }

    /// Registers records that are known to be in flight toward this machine
    /// from a peer whose channel ordering gives no fence.
    pub fn expect(&mut self, records: u64) {
        self.awaiting += records;
    }

    /// Notes arrival of previously expected records. Expectations are
    /// announced through a blocking collective before the sender may start,
    /// so arrivals never precede the announcement; saturation is purely
    /// defensive.
    pub fn satisfy(&mut self, records: u64) {
        self.awaiting = self.awaiting.saturating_sub(records);
    }

    pub fn awaiting(&self) -> u64 {
        self.awaiting
    }

    /// Records a child's `Done`; returns `false` if this child already
    /// reported, which callers treat as a protocol violation.
    pub fn child_done(&mut self, child: Rank) -> bool {
        self.done_children.insert(child)
    }

    pub fn is_child_done(&self, child: Rank) -> bool {
        self.done_children.contains(&child)
    }

    /// True once nothing more can arrive and nothing is left to process.
    pub fn concluded(&self, children: &[Rank]) -> bool {
        self.partitions_done
            && self.pending_work == 0
            && self.awaiting == 0
            && children.iter().all(|c| self.done_children.contains(c))
    }
}
