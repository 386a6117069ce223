//! Shared runtime for the distributed runners: configuration, machine
//! threads, a blocking all-gather collective, buffered outgoing mail, and a
//! fork-join helper that streams worker emissions back to the machine's
//! communication thread.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc;
use std::sync::{Arc, Barrier, Mutex};
use std::time::{Duration, Instant};

use crate::comm::{
    decode_buffer, encode_buffer, record_bytes, BufferConfig, DecodedBuffer, Delivery, Endpoint,
    MachineStats, Message, MessageBuffer, MessageKind, Stamp, TransportError,
};
use crate::graph::Graph;
use crate::jt::{hook_edge, HookOutcome, ParentArray, RootFn};
use crate::{Rank, RootValue, VertexId};

/// What a distributed run produces: final labels plus one stats block per
/// machine, in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub labels: Vec<RootValue>,
    pub stats: Vec<MachineStats>,
}

/// Which half of a run a record was sent in: while components are still
/// being discovered, or while final labels are being pushed up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Computation,
    Final,
}

/// Observation hook invoked once per posted record: sender, destination,
/// phase, record.
pub type SendProbe = Arc<dyn Fn(Rank, Rank, Phase, &Message) + Send + Sync>;

/// Knobs shared by every distributed runner.
#[derive(Clone)]
pub struct ClusterConfig {
    pub machines: u32,
    /// Hooking threads per machine; `1` processes inline on the
    /// communication thread.
    pub workers: usize,
    pub buffer: BufferConfig,
    /// Frames a peer's inbox holds before senders block.
    pub queue_depth: usize,
    /// Count successful slot claims per machine.
    pub instrument: bool,
    /// Abort a run whose machines stall this long; guards tests against a
    /// protocol bug turning into a hang.
    pub run_timeout: Duration,
    pub probe: Option<SendProbe>,
}

impl ClusterConfig {
    pub fn new(machines: u32) -> Self {
        assert!(machines >= 1);
        ClusterConfig {
            machines,
            workers: 1,
            buffer: BufferConfig::default(),
            queue_depth: 4096,
            instrument: false,
            run_timeout: Duration::from_secs(120),
            probe: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        assert!(workers >= 1);
        self.workers = workers;
        self
    }

    pub fn with_buffer(mut self, buffer: BufferConfig) -> Self {
        self.buffer = buffer;
        self
    }

    pub fn instrumented(mut self) -> Self {
        self.instrument = true;
        self
    }

    pub fn with_probe(mut self, probe: SendProbe) -> Self {
        self.probe = Some(probe);
        self
    }
}

impl fmt::Debug for ClusterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClusterConfig")
            .field("machines", &self.machines)
            .field("workers", &self.workers)
            .field("buffer", &self.buffer)
            .field("queue_depth", &self.queue_depth)
            .field("instrument", &self.instrument)
            .field("run_timeout", &self.run_timeout)
            .field("probe", &self.probe.is_some())
            .finish()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RunError {
    #[error("machine {rank}: {source}")]
    Transport { rank: Rank, source: TransportError },
    #[error("machine {rank}: protocol violation: {message}")]
    Protocol { rank: Rank, message: String },
    #[error("machine {rank} panicked")]
    MachinePanicked { rank: Rank },
    #[error("machine {rank}: no progress for {seconds:.1} s, aborting")]
    Timeout { rank: Rank, seconds: f64 },
}

/// Runs one closure per rank on its own thread over a fresh channel mesh and
/// collects the per-rank outputs in rank order.
pub fn run_cluster<Out, F>(
    machines: u32,
    queue_depth: usize,
    body: F,
) -> Result<Vec<Out>, RunError>
where
    Out: Send,
    F: Fn(Rank, Endpoint) -> Result<Out, RunError> + Sync,
{
    let endpoints = crate::comm::mesh(machines, queue_depth);
    let results: Vec<Result<Result<Out, RunError>, ()>> = std::thread::scope(|scope| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|ep| {
                let body = &body;
                scope.spawn(move || body(ep.rank(), ep))
            })
            .collect();
        handles.into_iter().map(|h| h.join().map_err(|_| ())).collect()
    });
    // A panic is the primary fault: peers of a crashed machine usually fail
    // secondarily with closed channels or timeouts.
    if let Some(rank) = results.iter().position(|r| r.is_err()) {
        return Err(RunError::MachinePanicked { rank: rank as Rank });
    }
    results
        .into_iter()
        .map(|r| r.expect("panics handled above"))
        .collect()
}

/// Single-use blocking all-gather: every party deposits one value, blocks
/// until all parties have deposited, and receives every value in rank order.
pub struct Collective<T> {
    slots: Mutex<Vec<Option<T>>>,
    gate: Barrier,
}

impl<T: Clone> Collective<T> {
    pub fn new(parties: usize) -> Self {
        Collective { slots: Mutex::new(vec![None; parties]), gate: Barrier::new(parties) }
    }

    pub fn all_gather(&self, rank: usize, value: T) -> Vec<T> {
        {
            let mut slots = self.slots.lock().unwrap();
            assert!(slots[rank].is_none(), "a collective is single-use per party");
            slots[rank] = Some(value);
        }
        self.gate.wait();
        let slots = self.slots.lock().unwrap();
        slots.iter().map(|slot| slot.clone().expect("every party deposited")).collect()
    }
}

/// A machine's outgoing mail: per-destination, per-kind record buffers that
/// flush into wire frames when full or on request, with traffic accounting.
pub struct Mailbox {
    ep: Endpoint,
    stats: MachineStats,
    width: u8,
    buffer_cfg: BufferConfig,
    probe: Option<SendProbe>,
    started: Instant,
    buffers: BTreeMap<(Rank, MessageKind), MessageBuffer>,
}

fn flush_buffer(
    ep: &Endpoint,
    stats: &mut MachineStats,
    width: u8,
    to: Rank,
    buf: &mut MessageBuffer,
) -> Result<(), RunError> {
    let records = buf.len() as u64;
    let kind = buf.kind();
    let frame = match buf.take_frame(width) {
        Ok(Some(frame)) => frame,
        Ok(None) => return Ok(()),
        Err(e) => {
            return Err(RunError::Protocol { rank: ep.rank(), message: e.to_string() });
        }
    };
    stats.record_send(to, kind, records, records * record_bytes(kind, width) as u64);
    ep.send(to, frame).map_err(|source| RunError::Transport { rank: ep.rank(), source })
}

impl Mailbox {
    pub fn new(ep: Endpoint, width: u8, cfg: &ClusterConfig, started: Instant) -> Self {
        Mailbox {
            stats: MachineStats::new(ep.rank()),
            ep,
            width,
            buffer_cfg: cfg.buffer,
            probe: cfg.probe.clone(),
            started,
            buffers: BTreeMap::new(),
        }
    }

    pub fn rank(&self) -> Rank {
        self.stats.rank
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    /// Buffers one record toward `to`, flushing the buffer first if full.
    pub fn post(&mut self, phase: Phase, to: Rank, message: Message) -> Result<(), RunError> {
        if let Some(probe) = &self.probe {
            probe(self.stats.rank, to, phase, &message);
        }
        let buf = self
            .buffers
            .entry((to, message.kind()))
            .or_insert_with(|| MessageBuffer::new(message.kind(), self.buffer_cfg));
        if buf.is_full() {
            flush_buffer(&self.ep, &mut self.stats, self.width, to, buf)?;
        }
        buf.push(message)
            .map_err(|e| RunError::Protocol { rank: self.stats.rank, message: e.to_string() })
    }

    /// Flushes every pending buffer addressed to `to`.
    pub fn flush_to(&mut self, to: Rank) -> Result<(), RunError> {
        for ((dest, _), buf) in self.buffers.iter_mut() {
            if *dest == to {
                flush_buffer(&self.ep, &mut self.stats, self.width, to, buf)?;
            }
        }
        Ok(())
    }

    /// Flushes every pending buffer, in (destination, kind) order.
    pub fn flush_all(&mut self) -> Result<(), RunError> {
        for (&(to, _), buf) in self.buffers.iter_mut() {
            flush_buffer(&self.ep, &mut self.stats, self.width, to, buf)?;
        }
        Ok(())
    }

    /// Flushes everything pending toward `to`, then sends `Done` so it
    /// arrives after every record this machine produced for `to`.
    pub fn send_done(&mut self, phase: Phase, to: Rank) -> Result<(), RunError> {
        self.flush_to(to)?;
        if let Some(probe) = &self.probe {
            probe(self.stats.rank, to, phase, &Message::Done);
        }
        let frame = encode_buffer(&[Message::Done], self.width, 1)
            .map_err(|e| RunError::Protocol { rank: self.stats.rank, message: e.to_string() })?;
        self.stats.record_send(to, MessageKind::Done, 1, 0);
        self.ep
            .send(to, frame)
            .map_err(|source| RunError::Transport { rank: self.stats.rank, source })
    }

    pub fn try_recv(&self) -> Option<Delivery> {
        self.ep.try_recv()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Delivery> {
        self.ep.recv_timeout(timeout)
    }

    /// Decodes one delivery and accounts for it.
    pub fn receive(&mut self, delivery: Delivery) -> Result<(Rank, DecodedBuffer), RunError> {
        let decoded = decode_buffer(&delivery.bytes, self.width)
            .map_err(|e| RunError::Protocol { rank: self.stats.rank, message: e.to_string() })?;
        self.stats.record_receive(
            delivery.from,
            decoded.kind(),
            decoded.len() as u64,
            decoded.len() as u64 * record_bytes(decoded.kind(), self.width) as u64,
        );
        Ok((delivery.from, decoded))
    }

    pub fn mark(&mut self, stamp: Stamp) {
        let seconds = self.started.elapsed().as_secs_f64();
        self.stats.record_timestamp(stamp, seconds);
    }

    pub fn stats(&self) -> &MachineStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut MachineStats {
        &mut self.stats
    }

    pub fn into_stats(self) -> MachineStats {
        debug_assert!(
            self.buffers.values().all(|b| b.is_empty()),
            "records left unflushed at teardown"
        );
        self.stats
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }
}

/// Processes disjoint batches of work and funnels every emission back to the
/// caller, which stays on its own thread. With one worker (or one batch)
/// everything runs inline with no channel or spawn.
pub fn run_batches<T, E, P, C>(
    workers: usize,
    batches: &[&[T]],
    process: P,
    mut consume: C,
) -> Result<(), RunError>
where
    T: Sync,
    E: Send,
    P: Fn(&T, &mut dyn FnMut(E)) + Sync,
    C: FnMut(E) -> Result<(), RunError>,
{
    let threads = workers.min(batches.len());
    if threads <= 1 {
        let mut first_err = None;
        for batch in batches {
            for item in *batch {
                process(item, &mut |e| {
                    if first_err.is_none() {
                        if let Err(err) = consume(e) {
                            first_err = Some(err);
                        }
                    }
                });
                if let Some(err) = first_err {
                    return Err(err);
                }
            }
        }
        return Ok(());
    }

    let mut first_err = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<E>();
        for worker in 0..threads {
            let tx = tx.clone();
            let process = &process;
            scope.spawn(move || {
                for batch in batches.iter().skip(worker).step_by(threads) {
                    for item in *batch {
                        // A send fails only when the consumer bailed out;
                        // finish quietly, the error is already recorded.
                        process(item, &mut |e| {
                            let _ = tx.send(e);
                        });
                    }
                }
            });
        }
        drop(tx);
        for emission in rx {
            if let Err(err) = consume(emission) {
                first_err = Some(err);
                break;
            }
        }
        // Receiver drops here; workers drain out on failed sends.
    });
    match first_err {
        Some(err) => Err(err),
        None => Ok(()),
    }
}

/// Hooks every stored edge whose source lies in `range`, translating each
/// outcome into at most one outgoing record and handing records to `consume`
/// on the calling thread. With one worker the whole loop runs inline.
pub fn hook_range_streaming<C>(
    parents: &ParentArray,
    f: &RootFn,
    graph: &Graph,
    range: std::ops::Range<VertexId>,
    workers: usize,
    translate: impl Fn(HookOutcome) -> Option<Message> + Sync,
    mut consume: C,
) -> Result<(), RunError>
where
    C: FnMut(Message) -> Result<(), RunError>,
{
    if workers <= 1 || range.end - range.start <= 1 {
        for v in range {
            for &u in graph.neighbors_of(v) {
                if let Some(message) = translate(hook_edge(parents, f, v, u)) {
                    consume(message)?;
                }
            }
        }
        return Ok(());
    }
    let vertices: Vec<VertexId> = range.collect();
    let chunk = vertices.len().div_ceil(workers);
    let batches: Vec<&[VertexId]> = vertices.chunks(chunk).collect();
    run_batches(
        workers,
        &batches,
        |&v, emit| {
            for &u in graph.neighbors_of(v) {
                if let Some(message) = translate(hook_edge(parents, f, v, u)) {
                    emit(message);
                }
            }
        },
        consume,
    )
}
