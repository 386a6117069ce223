//! In-process transport: a full mesh of bounded FIFO channels.
//!
//! Every machine owns one [`Endpoint`]: a receiver for its own inbox plus a
//! sender handle for every other machine's inbox. Queues are bounded, so a
//! sender blocks once a peer's inbox is full — the same backpressure a
//! network fabric applies. Delivery between any ordered pair of machines is
//! first-in first-out; deliveries from different senders interleave
//! arbitrarily.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::time::Duration;

use crate::Rank;

/// One received frame, attributed to its sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub from: Rank,
    pub bytes: Vec<u8>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("machine {rank} addressed a frame to itself")]
    SelfSend { rank: Rank },
    #[error("no machine has rank {rank}")]
    UnknownPeer { rank: Rank },
    #[error("machine {to} is no longer receiving")]
    Closed { to: Rank },
}

/// One machine's attachment to the mesh.
pub struct Endpoint {
    rank: Rank,
    peers: Vec<Option<SyncSender<Delivery>>>,
    rx: Receiver<Delivery>,
}

impl Endpoint {
    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn machines(&self) -> u32 {
        self.peers.len() as u32
    }

    /// Queues a frame for `to`, blocking while that inbox is full.
    pub fn send(&self, to: Rank, bytes: Vec<u8>) -> Result<(), TransportError> {
        if to == self.rank {
            return Err(TransportError::SelfSend { rank: self.rank });
        }
        let slot = self
            .peers
            .get(to as usize)
            .ok_or(TransportError::UnknownPeer { rank: to })?;
        let sender = slot.as_ref().expect("only the own slot is empty");
        sender
            .send(Delivery { from: self.rank, bytes })
            .map_err(|_| TransportError::Closed { to })
    }

    /// Takes the next queued delivery without blocking.
    pub fn try_recv(&self) -> Option<Delivery> {
        self.rx.try_recv().ok()
    }

    /// Waits up to `timeout` for a delivery.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Delivery> {
        self.rx.recv_timeout(timeout).ok()
    }
}

/// Builds endpoints for `machines` ranks with per-inbox `queue_depth`.
pub fn mesh(machines: u32, queue_depth: usize) -> Vec<Endpoint> {
    assert!(machines >= 1);
    assert!(queue_depth >= 1);
    let (senders, receivers): (Vec<_>, Vec<_>) =
        (0..machines).map(|_| sync_channel(queue_depth)).unzip();
    receivers
        .into_iter()
        .enumerate()
        .map(|(rank, rx)| Endpoint {
            rank: rank as Rank,
            peers: senders
                .iter()
                .enumerate()
                .map(|(peer, tx)| (peer != rank).then(|| tx.clone()))
                .collect(),
            rx,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    #[test]
    fn frames_arrive_in_send_order_per_pair() {
        let mut eps = mesh(2, 8);
        let receiver = eps.pop().unwrap();
        let sender = eps.pop().unwrap();
        let handle = std::thread::spawn(move || {
            for i in 0..200u32 {
                sender.send(1, i.to_le_bytes().to_vec()).unwrap();
            }
        });
        for expected in 0..200u32 {
            let d = receiver.recv_timeout(Duration::from_secs(5)).expect("delivery");
            assert_eq!(d.from, 0);
            assert_eq!(d.bytes, expected.to_le_bytes().to_vec());
        }
        handle.join().unwrap();
    }

    #[test]
    fn interleaved_senders_each_stay_ordered() {
        let mut eps = mesh(3, 4);
        let receiver = eps.remove(0);
        let handles: Vec<_> = eps
            .into_iter()
            .map(|ep| {
                std::thread::spawn(move || {
                    for i in 0..100u32 {
                        ep.send(0, i.to_le_bytes().to_vec()).unwrap();
                    }
                })
            })
            .collect();
        let mut last_seen = [None::<u32>; 3];
        for _ in 0..200 {
            let d = receiver.recv_timeout(Duration::from_secs(5)).expect("delivery");
            let value = u32::from_le_bytes(d.bytes.try_into().unwrap());
            let last = &mut last_seen[d.from as usize];
            assert!(last.is_none_or(|p| value == p + 1), "per-sender order violated");
            *last = Some(value);
        }
        assert_eq!(last_seen[1], Some(99));
        assert_eq!(last_seen[2], Some(99));
        for h in handles {
            h.join().unwrap();
        }
    }

    #[test]
    fn self_send_and_unknown_peer_are_rejected() {
        let eps = mesh(2, 1);
        assert_eq!(eps[0].send(0, vec![]).unwrap_err(), TransportError::SelfSend { rank: 0 });
        assert_eq!(eps[1].send(5, vec![]).unwrap_err(), TransportError::UnknownPeer { rank: 5 });
    }

    #[test]
    fn sending_to_a_departed_machine_reports_closed() {
        let mut eps = mesh(2, 1);
        drop(eps.pop().unwrap());
        assert_eq!(eps[0].send(1, vec![1]).unwrap_err(), TransportError::Closed { to: 1 });
    }

    #[test]
    fn full_inbox_applies_backpressure() {
        let mut eps = mesh(2, 1);
        let receiver = eps.pop().unwrap();
        let sender = eps.pop().unwrap();
        let started = Instant::now();
        let handle = std::thread::spawn(move || {
            sender.send(1, vec![0]).unwrap(); // fills the queue
            sender.send(1, vec![1]).unwrap(); // blocks until a drain
            started.elapsed()
        });
        std::thread::sleep(Duration::from_millis(50));
        assert_eq!(receiver.recv_timeout(Duration::from_secs(5)).unwrap().bytes, vec![0]);
        assert_eq!(receiver.recv_timeout(Duration::from_secs(5)).unwrap().bytes, vec![1]);
        let blocked_for = handle.join().unwrap();
        assert!(blocked_for >= Duration::from_millis(40), "second send should have waited");
    }

    #[test]
    fn empty_inbox_yields_nothing() {
        let eps = mesh(2, 1);
        assert!(eps[0].try_recv().is_none());
        assert!(eps[0].recv_timeout(Duration::from_millis(1)).is_none());
    }
}
