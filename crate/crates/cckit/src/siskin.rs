//! Star-aggregation distributed connected components.
//!
//! Every machine holds a full parent array under the identity root function
//! and hooks the edges of its own partitions. Each merge a non-reducer
//! performs is immediately streamed to rank 0 — the reducer — as a
//! `ParentPair{loser_root, winner_value}` record. The reducer hooks its own
//! partitions first, then processes received pairs exactly like edges; once
//! every peer has reported `Done`, the reducer pointer-jumps its array,
//! which is the final labeling. Labels are the minimum vertex ID of each
//! component.

use std::time::{Duration, Instant};

use crate::cluster::{
    hook_range_streaming, run_batches, run_cluster, ClusterConfig, Mailbox, Phase, RunError,
    RunOutcome,
};
use crate::comm::{
    id_byte_width, MachineStats, Message, MessageKind, Stamp, TerminationState, Topology,
    TopologyKind,
};
use crate::graph::{partition_edge_balanced, Graph, PartitionMap};
use crate::jt::{hook_edge, pointer_jump_par, HookOutcome, ParentArray, RootFn};
use crate::{Rank, RootValue};

const REDUCER: Rank = 0;
const IDLE_POLL: Duration = Duration::from_micros(200);

/// Runs the star-aggregation algorithm over an in-process machine cluster.
pub fn run_siskin(graph: &Graph, cfg: &ClusterConfig) -> Result<RunOutcome, RunError> {
    let n = graph.vertex_count();
    if n == 0 {
        return Ok(RunOutcome {
            labels: Vec::new(),
            stats: (0..cfg.machines).map(MachineStats::new).collect(),
        });
    }
    let f = RootFn::identity(n);
    let width = id_byte_width(f.max_value() + 1);
    let partitions = partition_edge_balanced(graph, cfg.machines as usize * cfg.workers)
        .map_err(|e| RunError::Protocol { rank: REDUCER, message: e.to_string() })?
        .with_round_robin_ranks(cfg.machines);
    let topology = Topology::new(TopologyKind::Star, cfg.machines);
    let started = Instant::now();

    let outputs = run_cluster(cfg.machines, cfg.queue_depth, |rank, ep| {
        let mailbox = Mailbox::new(ep, width, cfg, started);
        machine(graph, &f, &partitions, &topology, cfg, started, rank, mailbox)
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

#[allow(clippy::too_many_arguments)]
fn machine(
    graph: &Graph,
    f: &RootFn,
    partitions: &PartitionMap,
    topology: &Topology,
    cfg: &ClusterConfig,
    started: Instant,
    rank: Rank,
    mut mailbox: Mailbox,
) -> Result<(Option<Vec<RootValue>>, MachineStats), RunError> {
    let parents =
        if cfg.instrument { ParentArray::new_instrumented(f) } else { ParentArray::new(f) };
    let deadline = started + cfg.run_timeout;

    // Own partitions come first; received pairs wait until no partition is
    // available. Merges on non-reducers stream out as they happen.
    for p in partitions.partitions_of_rank(rank) {
        hook_range_streaming(
            &parents,
            f,
            graph,
            partitions.partition_range(p),
            cfg.workers,
            |outcome| match outcome {
                HookOutcome::Hooked { loser_root, winner_value } if rank != REDUCER => {
                    Some(Message::ParentPair { child: loser_root, parent_value: winner_value })
                }
                _ => None,
            },
            |message| mailbox.post(Phase::Computation, REDUCER, message),
        )?;
    }
    mailbox.mark(Stamp::OwnEdgesDone);

    if rank != REDUCER {
        // Nothing is ever addressed to a non-reducer, and only the reducer
        // jumps; the remaining stamps collapse onto the hooking stamp.
        mailbox.mark(Stamp::IncomingDrained);
        mailbox.mark(Stamp::JumpDone);
        mailbox.send_done(Phase::Computation, REDUCER)?;
        mailbox.mark(Stamp::FinalSendsDone);
        finish_instrumentation(cfg, &parents, &mut mailbox);
        return Ok((None, mailbox.into_stats()));
    }

    let children = topology.children(REDUCER);
    let mut termination = TerminationState::new();
    termination.mark_partitions_done();
    while !termination.concluded(children) {
        let Some(delivery) = mailbox.try_recv().or_else(|| mailbox.recv_timeout(IDLE_POLL))
        else {
            if Instant::now() >= deadline {
                return Err(RunError::Timeout {
                    rank,
                    seconds: mailbox.elapsed().as_secs_f64(),
                });
            }
            continue;
        };
        let (from, decoded) = mailbox.receive(delivery)?;
        match decoded.kind() {
            MessageKind::ParentPair => {
                let blocks: Vec<&[Message]> = decoded.blocks().collect();
                run_batches(
                    cfg.workers,
                    &blocks,
                    |message, emit| {
                        if let Err(err) = process_pair(&parents, f, rank, message) {
                            emit(err);
                        }
                    },
                    |err: RunError| Err(err),
                )?;
            }
            MessageKind::Done => {
                if !children.contains(&from) {
                    return Err(RunError::Protocol {
                        rank,
                        message: format!("Done from rank {from}, which reports to nobody here"),
                    });
                }
                if !termination.child_done(from) {
                    return Err(RunError::Protocol {
                        rank,
                        message: format!("second Done from rank {from}"),
                    });
                }
            }
            MessageKind::ZeroConverged => {
                return Err(RunError::Protocol {
                    rank,
                    message: format!("zero-converged record from rank {from} on a star run"),
                });
            }
        }
    }
    mailbox.mark(Stamp::IncomingDrained);

    pointer_jump_par(&parents, f, cfg.workers);
    mailbox.mark(Stamp::JumpDone);
    // The reducer has nobody to report to.
    mailbox.mark(Stamp::FinalSendsDone);
    finish_instrumentation(cfg, &parents, &mut mailbox);
    let labels = parents.snapshot();
    Ok((Some(labels), mailbox.into_stats()))
}

/// Hooks one received pair exactly like an edge between the child and the
/// vertex whose root value was written.
fn process_pair(
    parents: &ParentArray,
    f: &RootFn,
    rank: Rank,
    message: &Message,
) -> Result<(), RunError> {
    let Message::ParentPair { child, parent_value } = *message else {
        unreachable!("frames are homogeneous");
    };
    if child >= f.n() {
        return Err(RunError::Protocol {
            rank,
            message: format!("pair child {child} outside the vertex range"),
        });
    }
    let Some(u) = f.invert(parent_value) else {
        return Err(RunError::Protocol {
            rank,
            message: format!("pair value {parent_value} outside the root function's image"),
        });
    };
    hook_edge(parents, f, child, u);
    Ok(())
}

fn finish_instrumentation(cfg: &ClusterConfig, parents: &ParentArray, mailbox: &mut Mailbox) {
    if cfg.instrument {
        mailbox.stats_mut().cas_successes =
            parents.cas_counts().map(|counts| counts.iter().map(|&c| u64::from(c)).sum());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_csr, generate_graph, EdgeList, GraphKind};
    use crate::jt::run_cc_shared;
    use crate::oracle::{bfs_components, partitions_equivalent};

    fn graph_of(n: u64, edges: Vec<(u64, u64)>) -> Graph {
        build_csr(&EdgeList::new(n, edges)).unwrap()
    }

    fn generated(kind: GraphKind, n: u64, m_target: u64, seed: u64) -> Graph {
        build_csr(&generate_graph(kind, n, Some(m_target), seed).unwrap()).unwrap()
    }

    #[test]
    fn single_machine_matches_the_shared_runner_with_zero_traffic() {
        let graph = generated(GraphKind::ErdosRenyi, 200, 350, 7);
        let outcome = run_siskin(&graph, &ClusterConfig::new(1)).unwrap();
        let shared = run_cc_shared(&graph, &RootFn::identity(200), 1);
        assert_eq!(outcome.labels, shared);
        let stats = &outcome.stats[0];
        assert_eq!(stats.sent.total().records, 0);
        assert_eq!(stats.received.total().records, 0);
    }

    #[test]
    fn split_path_converges_and_the_reducer_hears_about_it() {
        let graph = graph_of(4, vec![(0, 1), (1, 2), (2, 3)]);
        let outcome = run_siskin(&graph, &ClusterConfig::new(2)).unwrap();
        assert_eq!(outcome.labels, vec![0, 0, 0, 0]);
        assert!(
            outcome.stats[0].received.parent_pair.records >= 1,
            "machine 1 merged at least one edge and must have reported it"
        );
        assert_eq!(
            outcome.stats[0].received.parent_pair.records,
            outcome.stats[1].sent.parent_pair.records
        );
    }

    #[test]
    fn two_components_get_min_vertex_labels() {
        let graph = graph_of(4, vec![(0, 1), (2, 3)]);
        for machines in [1, 2] {
            let outcome =
                run_siskin(&graph, &ClusterConfig::new(machines)).unwrap();
            assert_eq!(outcome.labels, vec![0, 0, 2, 2], "machines={machines}");
        }
    }

    #[test]
    fn labels_match_oracle_across_machines_and_workers() {
        for seed in 0..8 {
            let n = 60 + seed * 23;
            let graph = generated(GraphKind::ErdosRenyi, n, n + n / 2, seed);
            let oracle = bfs_components(&graph);
            for machines in [1, 2, 4, 8] {
                for workers in [1, 2] {
                    let cfg = ClusterConfig::new(machines).with_workers(workers);
                    let outcome = run_siskin(&graph, &cfg).unwrap();
                    assert!(
                        partitions_equivalent(&outcome.labels, oracle.labels()).unwrap(),
                        "seed={seed} machines={machines} workers={workers}"
                    );
                    assert_eq!(
                        outcome.labels,
                        oracle.labels(),
                        "identity labels are min vertex IDs"
                    );
                }
            }
        }
    }

    #[test]
    fn labels_are_deterministic_across_repeats_and_workers() {
        let graph = generated(GraphKind::PlantedGiant, 400, 900, 3);
        let reference = run_siskin(&graph, &ClusterConfig::new(3)).unwrap().labels;
        for workers in [1, 2, 4] {
            for _ in 0..3 {
                let cfg = ClusterConfig::new(3).with_workers(workers);
                let outcome = run_siskin(&graph, &cfg).unwrap();
                assert_eq!(outcome.labels, reference, "workers={workers}");
            }
        }
    }

    #[test]
    fn every_record_sent_is_one_successful_slot_claim() {
        let graph = generated(GraphKind::PlantedGiant, 500, 1200, 11);
        let cfg = ClusterConfig::new(4).instrumented();
        let outcome = run_siskin(&graph, &cfg).unwrap();
        let n = graph.vertex_count();
        let mut total_records = 0;
        for stats in &outcome.stats[1..] {
            let sent = stats.sent.parent_pair.records;
            assert_eq!(
                Some(sent),
                stats.cas_successes,
                "rank {} streams exactly its merges",
                stats.rank
            );
            assert!(sent <= n, "per-machine records are capped by the vertex count");
            total_records += sent;
        }
        let bound = graph.edge_count().min(u64::from(cfg.machines - 1) * n);
        assert!(total_records <= bound, "{total_records} > min(|E|, (m-1)|V|) = {bound}");
        assert_eq!(outcome.stats[0].sent.total().records, 0, "the reducer sends nothing");
    }

    #[test]
    fn empty_graph_short_circuits() {
        let graph = graph_of(0, vec![]);
        let outcome = run_siskin(&graph, &ClusterConfig::new(4)).unwrap();
        assert!(outcome.labels.is_empty());
        assert_eq!(outcome.stats.len(), 4);
    }

    #[test]
    fn reducer_timestamps_are_ordered() {
        let graph = generated(GraphKind::ErdosRenyi, 300, 600, 5);
        let outcome = run_siskin(&graph, &ClusterConfig::new(3)).unwrap();
        for stats in &outcome.stats {
            let stamps = stats.timestamps();
            assert!(stamps.iter().all(|t| t.is_some()), "rank {}", stats.rank);
            for pair in stamps.windows(2) {
                assert!(pair[0].unwrap() <= pair[1].unwrap(), "rank {}", stats.rank);
            }
        }
    }
}
