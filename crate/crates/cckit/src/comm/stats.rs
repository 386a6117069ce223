//! Per-machine traffic accounting and phase timestamps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MessageKind;
use crate::Rank;

/// Record and payload-byte totals for one direction of one peer or kind.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub records: u64,
    pub bytes: u64,
}

impl Counters {
    pub fn add(&mut self, records: u64, bytes: u64) {
        self.records += records;
        self.bytes += bytes;
    }
}

/// Counters broken down by message kind.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindCounters {
    pub zero_converged: Counters,
    pub parent_pair: Counters,
    pub done: Counters,
}

impl KindCounters {
    pub fn of(&self, kind: MessageKind) -> &Counters {
        match kind {
            MessageKind::ZeroConverged => &self.zero_converged,
            MessageKind::ParentPair => &self.parent_pair,
            MessageKind::Done => &self.done,
        }
    }

    pub fn of_mut(&mut self, kind: MessageKind) -> &mut Counters {
        match kind {
            MessageKind::ZeroConverged => &mut self.zero_converged,
            MessageKind::ParentPair => &mut self.parent_pair,
            MessageKind::Done => &mut self.done,
        }
    }

    pub fn total(&self) -> Counters {
        let mut sum = Counters::default();
        for kind in MessageKind::ALL {
            let c = self.of(kind);
            sum.add(c.records, c.bytes);
        }
        sum
    }
}

/// The four per-machine progress timestamps, in seconds from run start:
/// finished hooking its own partitions; drained the last computation-phase
/// record; finished pointer jumping; finished its final-phase sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stamp {
    OwnEdgesDone,
    IncomingDrained,
    JumpDone,
    FinalSendsDone,
}

/// Everything one machine observed about its own communication.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineStats {
    pub rank: Rank,
    pub sent: KindCounters,
    pub received: KindCounters,
    pub sent_to: BTreeMap<Rank, Counters>,
    pub received_from: BTreeMap<Rank, Counters>,
    pub own_edges_done_s: Option<f64>,
    pub incoming_drained_s: Option<f64>,
    pub jump_done_s: Option<f64>,
    pub final_sends_done_s: Option<f64>,
    /// Successful slot claims on this machine's array; populated only when
    /// the run is instrumented.
    pub cas_successes: Option<u64>,
}

impl MachineStats {
    pub fn new(rank: Rank) -> Self {
        MachineStats { rank, ..Self::default() }
    }

    pub fn record_send(&mut self, to: Rank, kind: MessageKind, records: u64, bytes: u64) {
        self.sent.of_mut(kind).add(records, bytes);
        self.sent_to.entry(to).or_default().add(records, bytes);
    }

    pub fn record_receive(&mut self, from: Rank, kind: MessageKind, records: u64, bytes: u64) {
        self.received.of_mut(kind).add(records, bytes);
        self.received_from.entry(from).or_default().add(records, bytes);
    }

    /// Marks a progress stamp if it is not already set; stamps are marked in
    /// order, so a later stamp never precedes an earlier one.
    pub fn record_timestamp(&mut self, stamp: Stamp, seconds: f64) {
        let slot = match stamp {
            Stamp::OwnEdgesDone => &mut self.own_edges_done_s,
            Stamp::IncomingDrained => &mut self.incoming_drained_s,
            Stamp::JumpDone => &mut self.jump_done_s,
            Stamp::FinalSendsDone => &mut self.final_sends_done_s,
        };
        if slot.is_none() {
            *slot = Some(seconds);
        }
    }

    pub fn timestamps(&self) -> [Option<f64>; 4] {
        [
            self.own_edges_done_s,
            self.incoming_drained_s,
            self.jump_done_s,
            self.final_sends_done_s,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_accumulate_per_kind_and_per_peer() {
        let mut stats = MachineStats::new(2);
        stats.record_send(0, MessageKind::ParentPair, 3, 12);
        stats.record_send(0, MessageKind::ParentPair, 1, 4);
        stats.record_send(1, MessageKind::Done, 1, 0);
        stats.record_receive(3, MessageKind::ZeroConverged, 5, 5);

        assert_eq!(stats.sent.parent_pair, Counters { records: 4, bytes: 16 });
        assert_eq!(stats.sent.done, Counters { records: 1, bytes: 0 });
        assert_eq!(stats.sent.total(), Counters { records: 5, bytes: 16 });
        assert_eq!(stats.sent_to[&0], Counters { records: 4, bytes: 16 });
        assert_eq!(stats.sent_to[&1], Counters { records: 1, bytes: 0 });
        assert_eq!(stats.received.zero_converged, Counters { records: 5, bytes: 5 });
        assert_eq!(stats.received_from[&3], Counters { records: 5, bytes: 5 });
        assert!(!stats.received_from.contains_key(&0));
    }

    #[test]
    fn timestamps_latch_on_first_mark() {
        let mut stats = MachineStats::new(0);
        assert_eq!(stats.timestamps(), [None; 4]);
        stats.record_timestamp(Stamp::OwnEdgesDone, 1.0);
        stats.record_timestamp(Stamp::OwnEdgesDone, 9.0);
        stats.record_timestamp(Stamp::IncomingDrained, 2.0);
        assert_eq!(stats.own_edges_done_s, Some(1.0));
        assert_eq!(stats.incoming_drained_s, Some(2.0));
        assert_eq!(stats.jump_done_s, None);
    }

    #[test]
    fn stats_serialize_round_trip() {
        let mut stats = MachineStats::new(1);
        stats.record_send(0, MessageKind::ZeroConverged, 2, 2);
        stats.record_timestamp(Stamp::OwnEdgesDone, 0.5);
        let json = serde_json::to_string(&stats).unwrap();
        let back: MachineStats = serde_json::from_str(&json).unwrap();
        assert_eq!(back, stats);
    }
}
