//! `cckit` — connected components over shared-memory and simulated-cluster
//! engines.
//!
//! Exit codes: 0 on success, 2 when `--verify` finds a wrong answer, 1 on any
//! other error (bad arguments, unreadable files, protocol faults).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cckit::driver::{
    self, Algorithm, DriverError, FileFormat, RunRequest,
};
use cckit::graph::GraphKind;

#[derive(Parser)]
#[command(name = "cckit", version, about = "Connected components toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an algorithm over a graph file and print a JSON report.
    Run(RunArgs),
    /// Generate a graph file from a named family.
    Gen(GenArgs),
    /// Convert a graph file between formats.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    /// Shared-memory hooking, identity root function.
    Jt,
    /// Shared-memory hooking, max-degree vertex mapped to zero.
    Rfjt,
    /// Simulated cluster, star aggregation onto a reducer.
    Siskin,
    /// Simulated cluster, binomial tree with zero-convergence flooding.
    Robin,
}

impl From<AlgoArg> for Algorithm {
    fn from(arg: AlgoArg) -> Self {
        match arg {
            AlgoArg::Jt => Algorithm::Jt,
            AlgoArg::Rfjt => Algorithm::Rfjt,
            AlgoArg::Siskin => Algorithm::Siskin,
            AlgoArg::Robin => Algorithm::Robin,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// Text: `# n <vertices>` header, one `u v` pair per line.
    Edgelist,
    /// Binary adjacency with width-reduced vertex IDs.
    Ccfb,
}

impl From<FormatArg> for FileFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Edgelist => FileFormat::EdgeList,
            FormatArg::Ccfb => FileFormat::Ccfb,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Algorithm to run.
    #[arg(long)]
    algo: AlgoArg,
    /// Input graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Input file format.
    #[arg(long, value_enum, default_value_t = FormatArg::Edgelist)]
    format: FormatArg,
    /// Simulated machine count; ignored by the shared-memory algorithms.
    #[arg(long, default_value_t = 1)]
    machines: u32,
    /// Worker threads per machine.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Outgoing buffer capacity in records per destination and message kind.
    #[arg(long, default_value_t = 65_536)]
    buffer_cap: u32,
    /// Check the labeling against a sequential BFS oracle.
    #[arg(long)]
    verify: bool,
    /// Write the JSON report to this path instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Recorded in the report; identical seed and flags must reproduce the
    /// same component counts and labels hash.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    /// Generator family: erdos_renyi, planted_giant, path, star, complete.
    #[arg(long)]
    kind: GraphKind,
    /// Vertex count.
    #[arg(long)]
    n: u64,
    /// Edge budget; required by the random families, rejected by the rest.
    #[arg(long)]
    m: Option<u64>,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path.
    #[arg(long)]
    out: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Edgelist)]
    format: FormatArg,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value_t = FormatArg::Edgelist)]
    from: FormatArg,
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Ccfb)]
    to: FormatArg,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32, DriverError> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Gen(args) => {
            driver::generate_to_file(
                args.kind,
                args.n,
                args.m,
                args.seed,
                &args.out,
                args.format.into(),
            )?;
            Ok(0)
        }
        Command::Convert(args) => {
            driver::convert_file(&args.input, args.from.into(), &args.output, args.to.into())?;
            Ok(0)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32, DriverError> {
    let graph = driver::load_graph(&args.graph, args.format.into())?;
    let request = RunRequest {
        algorithm: args.algo.into(),
        machines: args.machines.max(1),
        workers: args.workers.max(1),
        buffer_capacity: args.buffer_cap,
        verify: args.verify,
        seed: args.seed,
    };
    let report = driver::execute_run(&graph, &args.graph.display().to_string(), &request)?;
    match &args.report {
        Some(path) => driver::write_report(path, &report)?,
        None => {
            // Tolerate a reader that closes the pipe early (e.g. `| head`).
            use std::io::Write;
            let json = serde_json::to_string_pretty(&report)?;
            let _ = writeln!(std::io::stdout(), "{json}");
        }
    }
    Ok(if report.verified == Some(false) { 2 } else { 0 })
}
