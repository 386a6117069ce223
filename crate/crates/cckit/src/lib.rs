//! Connected-components toolkit built around lock-free hooking with
//! pluggable root functions.
//!
//! The crate has three layers:
//!
//! * [`graph`] and [`oracle`]: CSR graphs, partitioning, generators, file
//!   formats, and a sequential BFS reference used to verify everything else.
//! * [`jt`]: the shared-memory hooking engine. Slots hold root *values*
//!   produced by an injective root function; hooking merges the root with the
//!   greater value into the one with the lesser value via compare-and-swap.
//! * [`comm`], [`siskin`], [`robin`]: an in-process cluster simulation. Each
//!   simulated machine owns a full parent array and a partition of the edges;
//!   machines exchange compact records over an ordered lossless transport.
//!   `siskin` aggregates through a star onto a reducer; `robin` aggregates
//!   through a binomial tree and floods membership of the max-degree
//!   component as single-ID records.
//!
//! [`driver`] backs the `cckit` command-line binary.

pub mod cluster;
pub mod comm;
pub mod driver;
pub mod graph;
pub mod jt;
pub mod oracle;
pub mod robin;
pub mod siskin;

/// Vertex identifier. Storage and wire widths narrow this per contract; in
/// memory we keep the full width and convert at the boundaries.
pub type VertexId = u64;

/// Value stored in a parent slot: the image of some vertex under the active
/// root function. For the identity function this is a vertex ID.
pub type RootValue = u64;

/// Simulated machine rank. Rank 0 is the reducer (star) or tree root.
pub type Rank = u32;
