//! Lock-free hooking engine with pluggable root functions.
//!
//! Every vertex `v` starts with its slot holding `f(v)` for an injective
//! root function `f`; a vertex is a root exactly while its slot still holds
//! its own value. Hooking finds the roots of both endpoints and swings the
//! root with the greater value onto the lesser value with a single
//! compare-and-swap, so each slot moves away from its initial value at most
//! once and only ever holds smaller values afterwards. That monotonicity is
//! what makes unsynchronized root chasing safe.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use crate::graph::{partition_edge_balanced, Graph};
use crate::{RootValue, VertexId};

/// Injective map from vertices to root values, with its inverse.
///
/// `Identity` maps every vertex to itself. `Robin` maps the max-degree
/// vertex to 0 and every other vertex to its successor, which hands the
/// globally smallest root value to the component most traffic talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootFn {
    Identity { n: u64 },
    Robin { n: u64, max_degree_vertex: VertexId },
}

impl RootFn {
    pub fn identity(n: u64) -> Self {
        RootFn::Identity { n }
    }

    pub fn robin(n: u64, max_degree_vertex: VertexId) -> Self {
        assert!(n >= 1, "robin root function needs at least one vertex");
        assert!(max_degree_vertex < n);
        RootFn::Robin { n, max_degree_vertex }
    }

    pub fn n(&self) -> u64 {
        match *self {
            RootFn::Identity { n } | RootFn::Robin { n, .. } => n,
        }
    }

    /// Root value of `v`.
    pub fn value_of(&self, v: VertexId) -> RootValue {
        debug_assert!(v < self.n());
        match *self {
            RootFn::Identity { .. } => v,
            RootFn::Robin { max_degree_vertex, .. } => {
                if v == max_degree_vertex {
                    0
                } else {
                    v + 1
                }
            }
        }
    }

    /// Inverse of [`RootFn::value_of`]; `None` outside the image.
    pub fn invert(&self, value: RootValue) -> Option<VertexId> {
        match *self {
            RootFn::Identity { n } => (value < n).then_some(value),
            RootFn::Robin { n, max_degree_vertex } => {
                if value == 0 {
                    Some(max_degree_vertex)
                } else {
                    let v = value - 1;
                    // max_degree_vertex + 1 is the one value with no preimage.
                    (v < n && v != max_degree_vertex).then_some(v)
                }
            }
        }
    }

    /// Largest value `value_of` can produce; sizes slots and wire records.
    pub fn max_value(&self) -> RootValue {
        match *self {
            RootFn::Identity { n } => n.saturating_sub(1),
            RootFn::Robin { n, .. } => n,
        }
    }
}

enum Slots {
    W4(Box<[AtomicU32]>),
    W8(Box<[AtomicU64]>),
}

/// Array of atomically updated root values, one slot per vertex.
///
/// Slots are 4 bytes wide when the root function's image fits in 32 bits and
/// 8 bytes otherwise. An instrumented array additionally counts successful
/// compare-and-swaps per slot so tests can check the update-at-most-once
/// property under real contention.
pub struct ParentArray {
    slots: Slots,
    cas_counts: Option<Box<[AtomicU32]>>,
}

impl ParentArray {
    pub fn new(f: &RootFn) -> Self {
        Self::build(f, f.max_value() > u32::MAX as u64, false)
    }

    /// Forces 8-byte slots regardless of image size, so the wide code path
    /// stays testable on small graphs.
    pub fn new_wide(f: &RootFn) -> Self {
        Self::build(f, true, false)
    }

    pub fn new_instrumented(f: &RootFn) -> Self {
        Self::build(f, f.max_value() > u32::MAX as u64, true)
    }

    fn build(f: &RootFn, wide: bool, instrument: bool) -> Self {
        let n = f.n();
        let slots = if wide {
            Slots::W8((0..n).map(|v| AtomicU64::new(f.value_of(v))).collect())
        } else {
            assert!(f.max_value() <= u32::MAX as u64);
            Slots::W4((0..n).map(|v| AtomicU32::new(f.value_of(v) as u32)).collect())
        };
        let cas_counts =
            instrument.then(|| (0..n).map(|_| AtomicU32::new(0)).collect::<Box<[_]>>());
        ParentArray { slots, cas_counts }
    }

    pub fn len(&self) -> u64 {
        match &self.slots {
            Slots::W4(s) => s.len() as u64,
            Slots::W8(s) => s.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Slot width in bytes.
    pub fn slot_bytes(&self) -> usize {
        match &self.slots {
            Slots::W4(_) => 4,
            Slots::W8(_) => 8,
        }
    }

    pub fn load(&self, v: VertexId) -> RootValue {
        match &self.slots {
            Slots::W4(s) => s[v as usize].load(Ordering::Acquire) as u64,
            Slots::W8(s) => s[v as usize].load(Ordering::Acquire),
        }
    }

    /// Plain store; only legal outside concurrent hooking (initialization
    /// and pointer jumping).
    pub fn store(&self, v: VertexId, value: RootValue) {
        match &self.slots {
            Slots::W4(s) => {
                debug_assert!(value <= u32::MAX as u64);
                s[v as usize].store(value as u32, Ordering::Release);
            }
            Slots::W8(s) => s[v as usize].store(value, Ordering::Release),
        }
    }

    /// Single compare-and-swap of slot `v`; `Err` carries the value found.
    pub fn compare_exchange(
        &self,
        v: VertexId,
        expected: RootValue,
        new: RootValue,
    ) -> Result<(), RootValue> {
        let result = match &self.slots {
            Slots::W4(s) => {
                debug_assert!(expected <= u32::MAX as u64 && new <= u32::MAX as u64);
                s[v as usize]
                    .compare_exchange(expected as u32, new as u32, Ordering::AcqRel, Ordering::Acquire)
                    .map(|_| ())
                    .map_err(|found| found as u64)
            }
            Slots::W8(s) => s[v as usize]
                .compare_exchange(expected, new, Ordering::AcqRel, Ordering::Acquire)
                .map(|_| ()),
        };
        if result.is_ok() {
            if let Some(counts) = &self.cas_counts {
                counts[v as usize].fetch_add(1, Ordering::Relaxed);
            }
        }
        result
    }

    /// Per-slot successful CAS counts, when instrumented.
    pub fn cas_counts(&self) -> Option<Vec<u32>> {
        self.cas_counts
            .as_ref()
            .map(|c| c.iter().map(|x| x.load(Ordering::Relaxed)).collect())
    }

    pub fn snapshot(&self) -> Vec<RootValue> {
        (0..self.len()).map(|v| self.load(v)).collect()
    }
}

/// Result of hooking one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookOutcome {
    /// Both endpoints already shared a root; nothing was written.
    AlreadySame,
    /// `loser_root`'s slot now holds `winner_value`.
    Hooked {
        loser_root: VertexId,
        winner_value: RootValue,
    },
}

/// Chases parent values from `v` to the current root. Values along the
/// chain strictly decrease, so this terminates even while other threads
/// hook; the returned root may of course be hooked a moment later.
pub fn find_root(parents: &ParentArray, f: &RootFn, v: VertexId) -> (VertexId, RootValue) {
    let mut u = v;
    loop {
        let value = parents.load(u);
        if value == f.value_of(u) {
            return (u, value);
        }
        u = f.invert(value).expect("parent slots only ever hold root-function values");
    }
}

/// Merges the components of `u` and `v`: find both roots, swing the root
/// with the greater value onto the lesser one, and retry from the stale
/// roots whenever the compare-and-swap loses a race.
pub fn hook_edge(parents: &ParentArray, f: &RootFn, u: VertexId, v: VertexId) -> HookOutcome {
    let (mut u, mut v) = (u, v);
    loop {
        let (root_u, value_u) = find_root(parents, f, u);
        let (root_v, value_v) = find_root(parents, f, v);
        if root_u == root_v {
            return HookOutcome::AlreadySame;
        }
        let (loser_root, loser_value, winner_value) = if value_u < value_v {
            (root_v, value_v, value_u)
        } else {
            (root_u, value_u, value_v)
        };
        if parents.compare_exchange(loser_root, loser_value, winner_value).is_ok() {
            return HookOutcome::Hooked { loser_root, winner_value };
        }
        // The losing root got hooked under us; its chain now leads to the
        // merged root, so restarting from the old roots is enough.
        u = root_u;
        v = root_v;
    }
}

/// Flattens `v`'s chain for every vertex in `range` by storing the root
/// value directly. Must not overlap hooking; may run concurrently with
/// itself over disjoint ranges because a half-jumped chain still leads to
/// the same root.
pub fn pointer_jump_range(parents: &ParentArray, f: &RootFn, range: std::ops::Range<VertexId>) {
    for v in range {
        let (_, root_value) = find_root(parents, f, v);
        parents.store(v, root_value);
    }
}

/// Sequential pointer jumping over every vertex.
pub fn pointer_jump_all(parents: &ParentArray, f: &RootFn) {
    pointer_jump_range(parents, f, 0..parents.len());
}

/// Hooks every stored edge using `workers` threads over edge-balanced
/// contiguous vertex ranges.
pub fn hook_all_edges(parents: &ParentArray, f: &RootFn, graph: &Graph, workers: usize) {
    let workers = workers.max(1);
    if workers == 1 || graph.vertex_count() == 0 {
        hook_edges_in_range(parents, f, graph, 0..graph.vertex_count());
        return;
    }
    let pm = partition_edge_balanced(graph, workers).expect("worker count is nonzero");
    std::thread::scope(|scope| {
        for i in 0..pm.partition_count() {
            let range = pm.partition_range(i);
            if !range.is_empty() {
                scope.spawn(move || hook_edges_in_range(parents, f, graph, range));
            }
        }
    });
}

/// Hooks the out-edges of every vertex in `range`, in storage order.
pub fn hook_edges_in_range(
    parents: &ParentArray,
    f: &RootFn,
    graph: &Graph,
    range: std::ops::Range<VertexId>,
) {
    for u in range {
        for &v in graph.neighbors_of(u) {
            hook_edge(parents, f, u, v);
        }
    }
}

/// Pointer jumping split over `workers` threads.
pub fn pointer_jump_par(parents: &ParentArray, f: &RootFn, workers: usize) {
    let n = parents.len();
    let workers = workers.max(1).min(n.max(1) as usize);
    if workers <= 1 {
        pointer_jump_all(parents, f);
        return;
    }
    let chunk = n.div_ceil(workers as u64);
    std::thread::scope(|scope| {
        for i in 0..workers as u64 {
            let range = (i * chunk).min(n)..((i + 1) * chunk).min(n);
            if !range.is_empty() {
                scope.spawn(move || pointer_jump_range(parents, f, range));
            }
        }
    });
}

/// Shared-memory connected components: hook every edge with `workers`
/// threads, flatten, and return the label array. `labels[v]` is the minimum
/// root value in `v`'s component.
pub fn run_cc_shared(graph: &Graph, f: &RootFn, workers: usize) -> Vec<RootValue> {
    assert_eq!(f.n(), graph.vertex_count(), "root function sized for a different graph");
    let parents = ParentArray::new(f);
    hook_all_edges(&parents, f, graph, workers);
    pointer_jump_par(&parents, f, workers);
    parents.snapshot()
}
