//! Behind the command line: algorithm selection, graph file handling,
//! verification, and the machine-readable run report.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterConfig, RunError};
use crate::comm::{BufferConfig, MachineStats};
use crate::graph::{
    build_csr, generate_graph, load_edge_list, max_degree_vertex, read_ccfb, write_ccfb,
    write_edge_list, Graph, GraphError, GraphKind,
};
use crate::jt::{run_cc_shared, RootFn};
use crate::oracle::{bfs_components, check_canonical_labels, component_stats, partitions_equivalent};
use crate::robin::{run_robin, RobinConfig};
use crate::siskin::run_siskin;
use crate::RootValue;

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("report: {0}")]
    Report(#[from] serde_json::Error),
}

/// Which engine a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Shared-memory hooking with the identity root function.
    Jt,
    /// Shared-memory hooking with the shifted (max-degree-to-zero) root
    /// function.
    Rfjt,
    /// Distributed star aggregation.
    Siskin,
    /// Distributed binomial-tree aggregation with the shifted root function.
    Robin,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Jt => "jt",
            Algorithm::Rfjt => "rfjt",
            Algorithm::Siskin => "siskin",
            Algorithm::Robin => "robin",
        }
    }
}

/// On-disk graph encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    EdgeList,
    Ccfb,
}

/// Everything one run reports, serialized as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub graph: String,
    pub vertices: u64,
    pub edges: u64,
    pub machines: u32,
    pub workers: usize,
    pub seed: u64,
    pub component_count: u64,
    pub largest_component_size: u64,
    /// FNV-1a over the label array; equal flags and seed must reproduce it.
    pub labels_hash: String,
    /// `None` when verification was not requested.
    pub verified: Option<bool>,
    pub wall_time_seconds: f64,
    pub machine_stats: Vec<MachineStats>,
}

/// FNV-1a over the little-endian bytes of each label.
pub fn labels_hash(labels: &[RootValue]) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for &value in labels {
        for byte in value.to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    format!("{hash:016x}")
}

fn open(path: &Path) -> Result<File, DriverError> {
    File::open(path).map_err(|source| DriverError::File {
        path: path.display().to_string(),
        source,
    })
}

fn create(path: &Path) -> Result<File, DriverError> {
    File::create(path).map_err(|source| DriverError::File {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a graph file in either format, building the adjacency structure.
pub fn load_graph(path: &Path, format: FileFormat) -> Result<Graph, DriverError> {
    match format {
        FileFormat::EdgeList => {
            let list = load_edge_list(BufReader::new(open(path)?))?;
            Ok(build_csr(&list)?)
        }
        FileFormat::Ccfb => Ok(read_ccfb(BufReader::new(open(path)?))?),
    }
}

/// Writes a graph in either format.
pub fn save_graph(path: &Path, format: FileFormat, graph: &Graph) -> Result<(), DriverError> {
    match format {
        FileFormat::EdgeList => {
            write_edge_list(BufWriter::new(create(path)?), &graph.to_edge_list())?
        }
        FileFormat::Ccfb => write_ccfb(BufWriter::new(create(path)?), graph)?,
    }
    Ok(())
}

/// Run parameters beyond the graph itself.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub algorithm: Algorithm,
    pub machines: u32,
    pub workers: usize,
    pub buffer_capacity: u32,
    pub verify: bool,
    pub seed: u64,
}

/// Executes the selected engine and derives labels plus per-machine stats.
pub fn run_algorithm(
    graph: &Graph,
    request: &RunRequest,
) -> Result<(Vec<RootValue>, Vec<MachineStats>), DriverError> {
    let n = graph.vertex_count();
    let shared_robin_f = || {
        let maxdeg = max_degree_vertex(graph).expect("n >= 1");
        RootFn::robin(n, maxdeg)
    };
    match request.algorithm {
        Algorithm::Jt => Ok((run_cc_shared(graph, &RootFn::identity(n), request.workers), vec![])),
        Algorithm::Rfjt => {
            if n == 0 {
                return Ok((vec![], vec![]));
            }
            Ok((run_cc_shared(graph, &shared_robin_f(), request.workers), vec![]))
        }
        Algorithm::Siskin => {
            let cfg = cluster_config(request);
            let outcome = run_siskin(graph, &cfg)?;
            Ok((outcome.labels, outcome.stats))
        }
        Algorithm::Robin => {
            let cfg = RobinConfig::from(cluster_config(request));
            let outcome = run_robin(graph, &cfg)?;
            Ok((outcome.labels, outcome.stats))
        }
    }
}

fn cluster_config(request: &RunRequest) -> ClusterConfig {
    let buffer =
        BufferConfig { capacity: request.buffer_capacity.max(1), ..BufferConfig::default() };
    ClusterConfig::new(request.machines)
        .with_workers(request.workers)
        .with_buffer(buffer)
        .instrumented()
}

/// Checks engine output against the breadth-first oracle: same partition,
/// and labels canonical for the algorithm's root function.
pub fn verify_labels(graph: &Graph, algorithm: Algorithm, labels: &[RootValue]) -> bool {
    let n = graph.vertex_count();
    if n == 0 {
        return labels.is_empty();
    }
    let oracle = bfs_components(graph);
    let equivalent = partitions_equivalent(labels, oracle.labels()).unwrap_or(false);
    let f = match algorithm {
        Algorithm::Jt | Algorithm::Siskin => RootFn::identity(n),
        Algorithm::Rfjt | Algorithm::Robin => {
            RootFn::robin(n, max_degree_vertex(graph).expect("n >= 1"))
        }
    };
    equivalent && check_canonical_labels(graph, labels, &f).is_ok()
}

/// Runs, optionally verifies, and assembles the report.
pub fn execute_run(
    graph: &Graph,
    graph_name: &str,
    request: &RunRequest,
) -> Result<RunReport, DriverError> {
    let started = Instant::now();
    let (labels, machine_stats) = run_algorithm(graph, request)?;
    let wall_time_seconds = started.elapsed().as_secs_f64();
    let verified = request.verify.then(|| verify_labels(graph, request.algorithm, &labels));
    let (component_count, largest_component_size, _) = component_stats(&labels);
    Ok(RunReport {
        algorithm: request.algorithm.name().to_string(),
        graph: graph_name.to_string(),
        vertices: graph.vertex_count(),
        edges: graph.edge_count(),
        machines: request.machines,
        workers: request.workers,
        seed: request.seed,
        component_count,
        largest_component_size,
        labels_hash: labels_hash(&labels),
        verified,
        wall_time_seconds,
        machine_stats,
    })
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<(), DriverError> {
    let file = create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), report)?;
    Ok(())
}

/// Generates a graph file from a named family.
pub fn generate_to_file(
    kind: GraphKind,
    n: u64,
    m_target: Option<u64>,
    seed: u64,
    path: &Path,
    format: FileFormat,
) -> Result<(), DriverError> {
    let list = generate_graph(kind, n, m_target, seed)?;
    let graph = build_csr(&list)?;
    save_graph(path, format, &graph)
}

/// Converts between the two on-disk formats; adjacency comes out sorted.
pub fn convert_file(
    input: &Path,
    from: FileFormat,
    output: &Path,
    to: FileFormat,
) -> Result<(), DriverError> {
    let graph = load_graph(input, from)?;
    save_graph(output, to, &graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeList;

    fn request(algorithm: Algorithm, machines: u32) -> RunRequest {
        RunRequest {
            algorithm,
            machines,
            workers: 1,
            buffer_capacity: 1024,
            verify: true,
            seed: 0,
        }
    }

    #[test]
    fn hash_is_frozen_and_sensitive() {
        // FNV-1a of eight zero bytes.
        assert_eq!(labels_hash(&[0]), "a8c7f832281a39c5");
        assert_eq!(labels_hash(&[]), "cbf29ce484222325", "offset basis for empty input");
        assert_ne!(labels_hash(&[0, 1]), labels_hash(&[1, 0]), "order matters");
    }

    #[test]
    fn every_algorithm_verifies_on_a_small_graph() {
        let graph = build_csr(&EdgeList::new(6, vec![(0, 1), (1, 2), (4, 5)])).unwrap();
        for algorithm in [Algorithm::Jt, Algorithm::Rfjt, Algorithm::Siskin, Algorithm::Robin] {
            let report = execute_run(&graph, "test", &request(algorithm, 2)).unwrap();
            assert_eq!(report.verified, Some(true), "{}", report.algorithm.as_str());
            assert_eq!(report.component_count, 3);
            assert_eq!(report.largest_component_size, 3);
            assert_eq!(report.vertices, 6);
            assert_eq!(report.edges, 3);
        }
    }

    #[test]
    fn shared_and_distributed_identity_runs_hash_identically() {
        let graph = build_csr(&EdgeList::new(8, vec![(0, 1), (2, 3), (3, 4), (6, 7)])).unwrap();
        let jt = execute_run(&graph, "g", &request(Algorithm::Jt, 1)).unwrap();
        let siskin = execute_run(&graph, "g", &request(Algorithm::Siskin, 4)).unwrap();
        assert_eq!(jt.labels_hash, siskin.labels_hash);
    }

    #[test]
    fn verification_catches_a_wrong_partition() {
        let graph = build_csr(&EdgeList::new(4, vec![(0, 1), (2, 3)])).unwrap();
        assert!(verify_labels(&graph, Algorithm::Jt, &[0, 0, 2, 2]));
        assert!(!verify_labels(&graph, Algorithm::Jt, &[0, 0, 0, 2]), "refinement");
        assert!(
            !verify_labels(&graph, Algorithm::Jt, &[1, 1, 2, 2]),
            "right partition, wrong canonical labels"
        );
    }

    #[test]
    fn empty_graph_reports_cleanly() {
        let graph = build_csr(&EdgeList::new(0, vec![])).unwrap();
        let report = execute_run(&graph, "empty", &request(Algorithm::Jt, 1)).unwrap();
        assert_eq!(report.component_count, 0);
        assert_eq!(report.largest_component_size, 0);
        assert_eq!(report.verified, Some(true));
    }

    #[test]
    fn report_round_trips_through_json() {
        let graph = build_csr(&EdgeList::new(5, vec![(0, 4)])).unwrap();
        let report = execute_run(&graph, "g", &request(Algorithm::Robin, 2)).unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert!(json.contains("\"zero_converged\""), "per-kind counters serialize");
    }

    #[test]
    fn graph_files_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let graph = build_csr(&EdgeList::new(5, vec![(3, 1), (0, 2), (0, 2)])).unwrap();
        for format in [FileFormat::EdgeList, FileFormat::Ccfb] {
            let path = dir.path().join(match format {
                FileFormat::EdgeList => "g.txt",
                FileFormat::Ccfb => "g.ccfb",
            });
            save_graph(&path, format, &graph).unwrap();
            let back = load_graph(&path, format).unwrap();
            assert_eq!(back.offsets(), graph.offsets());
            assert_eq!(
                back.to_edge_list().edges,
                graph.to_edge_list().edges,
                "{format:?}"
            );
        }
    }

    #[test]
    fn conversion_is_lossless_up_to_sorting() {
        let dir = tempfile::tempdir().unwrap();
        let edge_path = dir.path().join("in.txt");
        let ccfb_path = dir.path().join("mid.ccfb");
        let back_path = dir.path().join("out.txt");
        let graph = build_csr(&EdgeList::new(4, vec![(2, 0), (0, 3), (0, 1)])).unwrap();
        save_graph(&edge_path, FileFormat::EdgeList, &graph).unwrap();
        convert_file(&edge_path, FileFormat::EdgeList, &ccfb_path, FileFormat::Ccfb).unwrap();
        convert_file(&ccfb_path, FileFormat::Ccfb, &back_path, FileFormat::EdgeList).unwrap();
        let reloaded = load_graph(&back_path, FileFormat::EdgeList).unwrap();
        assert_eq!(reloaded.to_edge_list().edges, vec![(0, 1), (0, 3), (2, 0)]);
    }
}
