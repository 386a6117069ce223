//! Communication fabric for the simulated cluster: tree and star
//! topologies, a compact record codec, an ordered lossless in-process
//! transport, per-machine traffic statistics, and termination detection.

mod codec;
mod stats;
mod termination;
mod topology;
mod transport;

pub use codec::{
    decode_buffer, encode_buffer, id_byte_width, record_bytes, BufferConfig, CodecError,
    DecodedBuffer, MessageBuffer, FRAME_HEADER_BYTES,
};
pub use stats::{Counters, KindCounters, MachineStats, Stamp};
pub use termination::TerminationState;
pub use topology::{Topology, TopologyKind};
pub use transport::{mesh, Delivery, Endpoint, TransportError};

use crate::{RootValue, VertexId};

/// Message classes exchanged between machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    ZeroConverged,
    ParentPair,
    Done,
}

impl MessageKind {
    pub const ALL: [MessageKind; 3] =
        [MessageKind::ZeroConverged, MessageKind::ParentPair, MessageKind::Done];
}

/// A single record.
///
/// `ZeroConverged` announces that a vertex joined the component whose root
/// value is 0; it costs one ID on the wire. `ParentPair` ships a child
/// vertex together with the root *value* of its component; receivers map
/// the value back through the root function's inverse. `Done` is a bare
/// end-of-stream marker: its sender is identified by the transport
/// envelope, so the record itself carries no payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Message {
    ZeroConverged { vertex: VertexId },
    ParentPair { child: VertexId, parent_value: RootValue },
    Done,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::ZeroConverged { .. } => MessageKind::ZeroConverged,
            Message::ParentPair { .. } => MessageKind::ParentPair,
            Message::Done => MessageKind::Done,
        }
    }
}
