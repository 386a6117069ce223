//! Tree-aggregation distributed connected components with a shifted root
//! function.
//!
//! The root function maps the globally highest-degree vertex to value 0 and
//! every other vertex `v` to `v + 1`, so the heaviest component converges to
//! value 0. Machines form a binomial tree. After a blocking reduction
//! discovers the max-degree vertex, its owner pushes a `ZeroConverged` seed
//! for each distinct neighbor directly to that neighbor's owner — the one
//! message class routed by ownership rather than up the tree. During
//! computation a machine reports upward only the merges that write value 0,
//! each costing a single vertex ID on the wire; all other merges stay
//! silent until the final phase, when every machine jumps its full array
//! and relays what it knows to its tree parent: `ZeroConverged` for newly
//! zero-rooted vertices, `ParentPair` for non-zero non-roots. Rank 0's
//! array is the result: label 0 for the max-degree component, `min(v) + 1`
//! for every other component.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::{
    hook_range_streaming, run_batches, run_cluster, ClusterConfig, Collective, Mailbox, Phase,
    RunError, RunOutcome,
};
use crate::comm::{
    id_byte_width, DecodedBuffer, Delivery, MachineStats, Message, MessageKind, Stamp,
    TerminationState, Topology, TopologyKind,
};
use crate::graph::{partition_edge_balanced, Graph, PartitionMap};
use crate::jt::{find_root, hook_edge, HookOutcome, ParentArray, RootFn};
use crate::{Rank, RootValue, VertexId};

const IDLE_POLL: Duration = Duration::from_micros(200);

#[derive(Debug, Clone)]
pub struct RobinConfig {
    pub cluster: ClusterConfig,
    /// Shuffle the worklist priority every loop iteration with this seed.
    /// The default order — zero-converged, then pairs, then own partitions —
    /// is a scheduling preference, not a correctness requirement, and this
    /// knob exists to prove that.
    pub randomize_priority: Option<u64>,
}

impl RobinConfig {
    pub fn new(machines: u32) -> Self {
        RobinConfig { cluster: ClusterConfig::new(machines), randomize_priority: None }
    }
}

impl From<ClusterConfig> for RobinConfig {
    fn from(cluster: ClusterConfig) -> Self {
        RobinConfig { cluster, randomize_priority: None }
    }
}

fn better(a: (u64, VertexId), b: (u64, VertexId)) -> (u64, VertexId) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Highest out-degree (ties to the lowest ID) over the ranges one rank owns.
pub fn local_max_degree(
    graph: &Graph,
    partitions: &PartitionMap,
    rank: Rank,
) -> Option<(u64, VertexId)> {
    let mut best: Option<(u64, VertexId)> = None;
    for p in partitions.partitions_of_rank(rank) {
        for v in partitions.partition_range(p) {
            let candidate = (graph.degree(v), v);
            best = Some(match best {
                None => candidate,
                Some(current) => better(current, candidate),
            });
        }
    }
    best
}

/// The vertex every machine agrees has the highest degree: per-rank local
/// maxima reduced globally, ties to the lowest ID. Single-threaded mirror of
/// the blocking reduction the distributed run performs.
pub fn global_max_degree(graph: &Graph, partitions: &PartitionMap) -> VertexId {
    assert!(graph.vertex_count() >= 1);
    (0..partitions.ranks())
        .filter_map(|rank| local_max_degree(graph, partitions, rank))
        .reduce(better)
        .expect("a non-empty graph has a max-degree vertex")
        .1
}

/// Runs the tree-aggregation algorithm over an in-process machine cluster.
pub fn run_robin(graph: &Graph, cfg: &RobinConfig) -> Result<RunOutcome, RunError> {
    let cluster = &cfg.cluster;
    let n = graph.vertex_count();
    if n == 0 {
        return Ok(RunOutcome {
            labels: Vec::new(),
            stats: (0..cluster.machines).map(MachineStats::new).collect(),
        });
    }
    // Root values reach n, one past the largest vertex ID.
    let width = id_byte_width(n + 1);
    let partitions = partition_edge_balanced(graph, cluster.machines as usize * cluster.workers)
        .map_err(|e| RunError::Protocol { rank: 0, message: e.to_string() })?
        .with_contiguous_ranks(cluster.machines);
    let topology = Topology::new(TopologyKind::BinomialTree, cluster.machines);
    let degree_gather = Collective::new(cluster.machines as usize);
    let push_gather = Collective::new(cluster.machines as usize);
    let started = Instant::now();

    let outputs = run_cluster(cluster.machines, cluster.queue_depth, |rank, ep| {
        let mailbox = Mailbox::new(ep, width, cluster, started);
        machine(
            graph,
            &partitions,
            &topology,
            cfg,
            &degree_gather,
            &push_gather,
            started,
            rank,
            mailbox,
        )
    })?;

    let mut labels = Vec::new();
    let mut stats = Vec::with_capacity(outputs.len());
    for (machine_labels, machine_stats) in outputs {
        if let Some(l) = machine_labels {
            labels = l;
        }
        stats.push(machine_stats);
    }
    Ok(RunOutcome { labels, stats })
}

/// Neighbors of `v` with storage duplicates collapsed; adjacency runs are
/// sorted, so equal entries are adjacent.
fn distinct_neighbors<'g>(graph: &'g Graph, v: VertexId) -> impl Iterator<Item = VertexId> + 'g {
    let mut previous = None;
    graph.neighbors_of(v).iter().copied().filter(move |&u| {
        let fresh = previous != Some(u);
        previous = Some(u);
        fresh
    })
}

#[allow(clippy::too_many_arguments)]
fn machine(
    graph: &Graph,
    partitions: &PartitionMap,
    topology: &Topology,
    cfg: &RobinConfig,
    degree_gather: &Collective<Option<(u64, VertexId)>>,
    push_gather: &Collective<Vec<u64>>,
    started: Instant,
    rank: Rank,
    mut mailbox: Mailbox,
) -> Result<(Option<Vec<RootValue>>, MachineStats), RunError> {
    let cluster = &cfg.cluster;
    let n = graph.vertex_count();
    let machines = cluster.machines as usize;
    let protocol =
        |message: String| RunError::Protocol { rank, message };

    // The whole cluster agrees on the max-degree vertex before any array
    // exists — the root function depends on it.
    let local = local_max_degree(graph, partitions, rank);
    let maxdeg = degree_gather
        .all_gather(rank as usize, local)
        .into_iter()
        .flatten()
        .reduce(better)
        .expect("some rank owns a vertex")
        .1;
    let f = RootFn::robin(n, maxdeg);
    let parents =
        if cluster.instrument { ParentArray::new_instrumented(&f) } else { ParentArray::new(&f) };
    let owner = partitions.owner_of(maxdeg).map_err(|e| protocol(e.to_string()))?;

    // Seed routing bypasses the tree, so a fast leaf could otherwise finish
    // before its seeds arrive. The owner announces per-rank seed counts
    // through a second blocking collective; each rank holds its conclusion
    // until that many records have arrived from the owner.
    let mut termination = TerminationState::new();
    let mut local_seeds: Vec<Message> = Vec::new();
    let my_counts = if rank == owner {
        let mut counts = vec![0u64; machines];
        for u in distinct_neighbors(graph, maxdeg) {
            let dest = partitions.owner_of(u).map_err(|e| protocol(e.to_string()))?;
            if dest == rank {
                local_seeds.push(Message::ZeroConverged { vertex: u });
            } else {
                counts[dest as usize] += 1;
            }
        }
        counts
    } else {
        vec![0u64; machines]
    };
    let gathered = push_gather.all_gather(rank as usize, my_counts);
    termination.expect(gathered[owner as usize][rank as usize]);

    let mut zc_queue: VecDeque<DecodedBuffer> = VecDeque::new();
    let mut pp_queue: VecDeque<DecodedBuffer> = VecDeque::new();
    if !local_seeds.is_empty() {
        let blocks = (cluster.buffer.blocks as usize).min(local_seeds.len()) as u16;
        termination.add_pending(local_seeds.len() as u64);
        zc_queue.push_back(DecodedBuffer::local(local_seeds, blocks));
    }
    if rank == owner {
        for u in distinct_neighbors(graph, maxdeg) {
            let dest = partitions.owner_of(u).map_err(|e| protocol(e.to_string()))?;
            if dest != rank {
                mailbox.post(Phase::Computation, dest, Message::ZeroConverged { vertex: u })?;
            }
        }
        // Announced seeds must actually be under way before the main loop.
        mailbox.flush_all()?;
    }

    let children = topology.children(rank);
    let parent = topology.parent(rank);
    let my_partitions = partitions.partitions_of_rank(rank);
    let mut next_partition = 0usize;
    if my_partitions.is_empty() {
        mailbox.mark(Stamp::OwnEdgesDone);
        termination.mark_partitions_done();
    }
    let mut rng = cfg
        .randomize_priority
        .map(|seed| ChaCha8Rng::seed_from_u64(seed ^ (u64::from(rank) << 32)));
    let deadline = started + cluster.run_timeout;

    #[derive(Clone, Copy)]
    enum Step {
        ZeroConverged,
        ParentPairs,
        Partitions,
    }

    loop {
        while let Some(delivery) = mailbox.try_recv() {
            classify(
                &mut mailbox,
                &mut termination,
                &mut zc_queue,
                &mut pp_queue,
                owner,
                children,
                rank,
                delivery,
            )?;
        }

        let mut order = [Step::ZeroConverged, Step::ParentPairs, Step::Partitions];
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut stepped = false;
        for step in order {
            match step {
                Step::ZeroConverged => {
                    let Some(frame) = zc_queue.pop_front() else { continue };
                    let records = frame.len() as u64;
                    process_zero_frame(
                        &parents, &f, maxdeg, cluster.workers, rank, &frame, parent, &mut mailbox,
                    )?;
                    termination.finish_pending(records);
                }
                Step::ParentPairs => {
                    let Some(frame) = pp_queue.pop_front() else { continue };
                    let records = frame.len() as u64;
                    process_pair_frame(
                        &parents, &f, cluster.workers, rank, &frame, parent, &mut mailbox,
                    )?;
                    termination.finish_pending(records);
                }
                Step::Partitions => {
                    if next_partition >= my_partitions.len() {
                        continue;
                    }
                    let range = partitions.partition_range(my_partitions[next_partition]);
                    next_partition += 1;
                    hook_range_streaming(
                        &parents,
                        &f,
                        graph,
                        range,
                        cluster.workers,
                        |outcome| match outcome {
                            HookOutcome::Hooked { loser_root, winner_value: 0 } => {
                                Some(Message::ZeroConverged { vertex: loser_root })
                            }
                            _ => None,
                        },
                        |message| match parent {
                            Some(p) => mailbox.post(Phase::Computation, p, message),
                            None => Ok(()),
                        },
                    )?;
                    if next_partition == my_partitions.len() {
                        mailbox.mark(Stamp::OwnEdgesDone);
                        termination.mark_partitions_done();
                    }
                }
            }
            stepped = true;
            break;
        }
        if stepped {
            continue;
        }
        if termination.concluded(children) {
            break;
        }
        match mailbox.recv_timeout(IDLE_POLL) {
            Some(delivery) => classify(
                &mut mailbox,
                &mut termination,
                &mut zc_queue,
                &mut pp_queue,
                owner,
                children,
                rank,
                delivery,
            )?,
            None => {
                if Instant::now() >= deadline {
                    return Err(RunError::Timeout {
                        rank,
                        seconds: mailbox.elapsed().as_secs_f64(),
                    });
                }
            }
        }
    }
    mailbox.mark(Stamp::IncomingDrained);

    // Final phase: jump the whole array; report newly zero-rooted vertices
    // and non-zero non-roots to the tree parent, then fence with Done.
    if cluster.workers <= 1 {
        for v in 0..n {
            if let Some(message) = scan_vertex(&parents, &f, v) {
                if let Some(p) = parent {
                    mailbox.post(Phase::Final, p, message)?;
                }
            }
        }
    } else {
        let vertices: Vec<VertexId> = (0..n).collect();
        let chunk = vertices.len().div_ceil(cluster.workers);
        let batches: Vec<&[VertexId]> = vertices.chunks(chunk).collect();
        run_batches(
            cluster.workers,
            &batches,
            |&v, emit| {
                if let Some(message) = scan_vertex(&parents, &f, v) {
                    emit(message);
                }
            },
            |message| match parent {
                Some(p) => mailbox.post(Phase::Final, p, message),
                None => Ok(()),
            },
        )?;
    }
    mailbox.mark(Stamp::JumpDone);
    mailbox.flush_all()?;
    if let Some(p) = parent {
        mailbox.send_done(Phase::Final, p)?;
    }
    mailbox.mark(Stamp::FinalSendsDone);

    if cluster.instrument {
        mailbox.stats_mut().cas_successes =
            parents.cas_counts().map(|counts| counts.iter().map(|&c| u64::from(c)).sum());
    }
    let labels = (rank == 0).then(|| parents.snapshot());
    Ok((labels, mailbox.into_stats()))
}

/// Routes one delivery into the right worklist, validating its origin.
#[allow(clippy::too_many_arguments)]
fn classify(
    mailbox: &mut Mailbox,
    termination: &mut TerminationState,
    zc_queue: &mut VecDeque<DecodedBuffer>,
    pp_queue: &mut VecDeque<DecodedBuffer>,
    owner: Rank,
    children: &[Rank],
    rank: Rank,
    delivery: Delivery,
) -> Result<(), RunError> {
    let (from, decoded) = mailbox.receive(delivery)?;
    match decoded.kind() {
        MessageKind::ZeroConverged => {
            if from == owner {
                // Seeds count against the expectation announced by the
                // owner; owner traffic is ordered, so forwarded records can
                // only follow the seeds.
                termination.satisfy(decoded.len() as u64);
            } else if !children.contains(&from) {
                return Err(RunError::Protocol {
                    rank,
                    message: format!(
                        "zero-converged records from rank {from}, which is neither a child nor \
                         the seed owner"
                    ),
                });
            }
            termination.add_pending(decoded.len() as u64);
            zc_queue.push_back(decoded);
        }
        MessageKind::ParentPair => {
            if !children.contains(&from) {
                return Err(RunError::Protocol {
                    rank,
                    message: format!("parent pairs flow only up the tree, got some from {from}"),
                });
            }
            termination.add_pending(decoded.len() as u64);
            pp_queue.push_back(decoded);
        }
        MessageKind::Done => {
            if !children.contains(&from) {
                return Err(RunError::Protocol {
                    rank,
                    message: format!("Done from rank {from}, which reports to somebody else"),
                });
            }
            if !termination.child_done(from) {
                return Err(RunError::Protocol {
                    rank,
                    message: format!("second Done from rank {from}"),
                });
            }
        }
    }
    Ok(())
}

/// Hooks every record of a zero-converged frame as an edge to the
/// max-degree vertex; merges that claim a slot (necessarily writing 0) are
/// forwarded to the tree parent.
#[allow(clippy::too_many_arguments)]
fn process_zero_frame(
    parents: &ParentArray,
    f: &RootFn,
    maxdeg: VertexId,
    workers: usize,
    rank: Rank,
    frame: &DecodedBuffer,
    parent: Option<Rank>,
    mailbox: &mut Mailbox,
) -> Result<(), RunError> {
    let n = f.n();
    let blocks: Vec<&[Message]> = frame.blocks().collect();
    run_batches(
        workers,
        &blocks,
        |message, emit| {
            let Message::ZeroConverged { vertex } = *message else {
                unreachable!("frames are homogeneous")
            };
            if vertex >= n {
                emit(Err(format!("zero-converged vertex {vertex} outside the vertex range")));
                return;
            }
            if let HookOutcome::Hooked { loser_root, winner_value } =
                hook_edge(parents, f, vertex, maxdeg)
            {
                debug_assert_eq!(winner_value, 0, "the zero component always wins a merge");
                emit(Ok(loser_root));
            }
        },
        |result: Result<VertexId, String>| match result {
            Ok(loser_root) => match parent {
                Some(p) => mailbox.post(
                    Phase::Computation,
                    p,
                    Message::ZeroConverged { vertex: loser_root },
                ),
                None => Ok(()),
            },
            Err(message) => Err(RunError::Protocol { rank, message }),
        },
    )
}

/// Hooks every record of a pair frame as an edge between the child vertex
/// and the inverse image of the transmitted root value. A merge that writes
/// 0 still forwards a zero-converged record upward.
fn process_pair_frame(
    parents: &ParentArray,
    f: &RootFn,
    workers: usize,
    rank: Rank,
    frame: &DecodedBuffer,
    parent: Option<Rank>,
    mailbox: &mut Mailbox,
) -> Result<(), RunError> {
    let n = f.n();
    let blocks: Vec<&[Message]> = frame.blocks().collect();
    run_batches(
        workers,
        &blocks,
        |message, emit| {
            let Message::ParentPair { child, parent_value } = *message else {
                unreachable!("frames are homogeneous")
            };
            if child >= n {
                emit(Err(format!("pair child {child} outside the vertex range")));
                return;
            }
            let Some(u) = f.invert(parent_value) else {
                emit(Err(format!(
                    "pair value {parent_value} outside the root function's image"
                )));
                return;
            };
            if let HookOutcome::Hooked { loser_root, winner_value } =
                hook_edge(parents, f, child, u)
            {
                if winner_value == 0 {
                    emit(Ok(loser_root));
                }
            }
        },
        |result: Result<VertexId, String>| match result {
            Ok(loser_root) => match parent {
                Some(p) => mailbox.post(
                    Phase::Computation,
                    p,
                    Message::ZeroConverged { vertex: loser_root },
                ),
                None => Ok(()),
            },
            Err(message) => Err(RunError::Protocol { rank, message }),
        },
    )
}

/// Jumps one slot to its root value and derives the report owed for it:
/// a zero-converged record when the root value 0 is news for this slot, a
/// pair when the vertex is a non-root of a non-zero component.
fn scan_vertex(parents: &ParentArray, f: &RootFn, v: VertexId) -> Option<Message> {
    let before = parents.load(v);
    let (_, value) = find_root(parents, f, v);
    parents.store(v, value);
    if value == 0 {
        (before != 0).then_some(Message::ZeroConverged { vertex: v })
    } else if value != f.value_of(v) {
        Some(Message::ParentPair { child: v, parent_value: value })
    } else {
        None
    }
}
