//! Compact record codec.
//!
//! A frame carries a homogeneous run of records:
//!
//! ```text
//! type tag u8 | record_count u32 LE | block_count u16 LE | records...
//! ```
//!
//! Records pack vertex IDs and root values as `w`-byte little-endian fields
//! where `w = max(1, ceil(log2(n) / 8))` for an ID space of size `n`. A
//! `ZeroConverged` record is one field, a `ParentPair` is two, and `Done` is
//! empty. Blocks split the records of a frame into nearly equal runs so a
//! receiver can drain one frame with several workers.

use super::{Message, MessageKind};

pub const FRAME_HEADER_BYTES: usize = 7;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("value {value} does not fit in {width} wire bytes")]
    FieldTooWide { value: u64, width: u8 },
    #[error("a frame carries exactly one message kind")]
    MixedKinds,
    #[error("a frame carries at least one record")]
    Empty,
    #[error("buffer already holds its capacity of {capacity} records")]
    CapacityExceeded { capacity: u32 },
    #[error("unknown frame type tag {0}")]
    BadTag(u8),
    #[error("frame length mismatch: expected {expected} bytes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Bytes needed to carry any ID below `n`: `max(1, ceil(log2(n) / 8))`.
pub fn id_byte_width(n: u64) -> u8 {
    assert!(n >= 1, "an ID space has at least one value");
    let bits = 64 - (n - 1).leading_zeros() as usize;
    (bits.div_ceil(8)).max(1) as u8
}

/// Payload bytes per record of `kind` at field width `width`.
pub fn record_bytes(kind: MessageKind, width: u8) -> usize {
    match kind {
        MessageKind::ZeroConverged => width as usize,
        MessageKind::ParentPair => 2 * width as usize,
        MessageKind::Done => 0,
    }
}

fn kind_tag(kind: MessageKind) -> u8 {
    match kind {
        MessageKind::ZeroConverged => 0,
        MessageKind::ParentPair => 1,
        MessageKind::Done => 2,
    }
}

fn tag_kind(tag: u8) -> Result<MessageKind, CodecError> {
    match tag {
        0 => Ok(MessageKind::ZeroConverged),
        1 => Ok(MessageKind::ParentPair),
        2 => Ok(MessageKind::Done),
        other => Err(CodecError::BadTag(other)),
    }
}

fn put_field(out: &mut Vec<u8>, value: u64, width: u8) -> Result<(), CodecError> {
    if width < 8 && value >= 1u64 << (8 * width) {
        return Err(CodecError::FieldTooWide { value, width });
    }
    out.extend_from_slice(&value.to_le_bytes()[..width as usize]);
    Ok(())
}

fn get_field(bytes: &[u8], width: u8) -> u64 {
    let mut buf = [0u8; 8];
    buf[..width as usize].copy_from_slice(&bytes[..width as usize]);
    u64::from_le_bytes(buf)
}

/// Encodes a homogeneous, non-empty run of messages into one frame.
/// `block_count` is recorded verbatim in the header.
pub fn encode_buffer(
    messages: &[Message],
    width: u8,
    block_count: u16,
) -> Result<Vec<u8>, CodecError> {
    let first = messages.first().ok_or(CodecError::Empty)?;
    let kind = first.kind();
    if messages.iter().any(|m| m.kind() != kind) {
        return Err(CodecError::MixedKinds);
    }
    let mut out =
        Vec::with_capacity(FRAME_HEADER_BYTES + messages.len() * record_bytes(kind, width));
    out.push(kind_tag(kind));
    out.extend_from_slice(&u32::try_from(messages.len()).expect("record count fits u32").to_le_bytes());
    out.extend_from_slice(&block_count.to_le_bytes());
    for message in messages {
        match *message {
            Message::ZeroConverged { vertex } => put_field(&mut out, vertex, width)?,
            Message::ParentPair { child, parent_value } => {
                put_field(&mut out, child, width)?;
                put_field(&mut out, parent_value, width)?;
            }
            Message::Done => {}
        }
    }
    Ok(out)
}

/// One decoded frame: the records plus the block grouping for concurrent
/// draining.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedBuffer {
    kind: MessageKind,
    block_count: u16,
    messages: Vec<Message>,
}

impl DecodedBuffer {
    /// Wraps locally produced records as if they had crossed the wire; used
    /// when a machine addresses itself.
    pub fn local(messages: Vec<Message>, block_count: u16) -> Self {
        assert!(!messages.is_empty());
        let kind = messages[0].kind();
        debug_assert!(messages.iter().all(|m| m.kind() == kind));
        DecodedBuffer { kind, block_count, messages }
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    pub fn block_count(&self) -> u16 {
        self.block_count
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// The records split into `block_count` nearly equal runs.
    pub fn blocks(&self) -> impl Iterator<Item = &[Message]> {
        let blocks = self.block_count as usize;
        let base = self.messages.len().checked_div(blocks).unwrap_or(0);
        let extra = self.messages.len().checked_rem(blocks).unwrap_or(0);
        let mut offset = 0;
        (0..blocks).map(move |i| {
            let take = base + usize::from(i < extra);
            let run = &self.messages[offset..offset + take];
            offset += take;
            run
        })
    }
}

/// Decodes and validates one frame.
pub fn decode_buffer(bytes: &[u8], width: u8) -> Result<DecodedBuffer, CodecError> {
    if bytes.len() < FRAME_HEADER_BYTES {
        return Err(CodecError::LengthMismatch { expected: FRAME_HEADER_BYTES, got: bytes.len() });
    }
    let kind = tag_kind(bytes[0])?;
    let record_count = u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize;
    let block_count = u16::from_le_bytes(bytes[5..7].try_into().unwrap());
    if record_count == 0 {
        return Err(CodecError::Empty);
    }
    let expected = FRAME_HEADER_BYTES + record_count * record_bytes(kind, width);
    if bytes.len() != expected {
        return Err(CodecError::LengthMismatch { expected, got: bytes.len() });
    }
    let mut messages = Vec::with_capacity(record_count);
    let mut at = FRAME_HEADER_BYTES;
    for _ in 0..record_count {
        let message = match kind {
            MessageKind::ZeroConverged => {
                let vertex = get_field(&bytes[at..], width);
                at += width as usize;
                Message::ZeroConverged { vertex }
            }
            MessageKind::ParentPair => {
                let child = get_field(&bytes[at..], width);
                let parent_value = get_field(&bytes[at + width as usize..], width);
                at += 2 * width as usize;
                Message::ParentPair { child, parent_value }
            }
            MessageKind::Done => Message::Done,
        };
        messages.push(message);
    }
    Ok(DecodedBuffer { kind, block_count, messages })
}

/// Buffer sizing: how many records a frame may carry and how many blocks a
/// full frame is split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferConfig {
    pub capacity: u32,
    pub blocks: u16,
}

impl Default for BufferConfig {
    fn default() -> Self {
        // Deskside default; production-scale deployments raise both.
        BufferConfig { capacity: 65_536, blocks: 64 }
    }
}

impl BufferConfig {
    pub fn new(capacity: u32, blocks: u16) -> Self {
        assert!(capacity >= 1 && blocks >= 1);
        BufferConfig { capacity, blocks }
    }
}

/// Accumulates same-kind records up to a capacity, then drains into frames.
#[derive(Debug, Clone)]
pub struct MessageBuffer {
    kind: MessageKind,
    cfg: BufferConfig,
    messages: Vec<Message>,
}

impl MessageBuffer {
    pub fn new(kind: MessageKind, cfg: BufferConfig) -> Self {
        MessageBuffer { kind, cfg, messages: Vec::new() }
    }

    pub fn kind(&self) -> MessageKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.messages.len() >= self.cfg.capacity as usize
    }

    pub fn push(&mut self, message: Message) -> Result<(), CodecError> {
        if message.kind() != self.kind {
            return Err(CodecError::MixedKinds);
        }
        if self.is_full() {
            return Err(CodecError::CapacityExceeded { capacity: self.cfg.capacity });
        }
        self.messages.push(message);
        Ok(())
    }

    /// Encodes and clears the pending records; `None` when empty. Partially
    /// filled frames use proportionally fewer blocks so no block is empty.
    pub fn take_frame(&mut self, width: u8) -> Result<Option<Vec<u8>>, CodecError> {
        if self.messages.is_empty() {
            return Ok(None);
        }
        let block_count = (self.cfg.blocks as usize).min(self.messages.len()) as u16;
        let frame = encode_buffer(&self.messages, width, block_count)?;
        self.messages.clear();
        Ok(Some(frame))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn width_formula() {
        assert_eq!(id_byte_width(1), 1);
        assert_eq!(id_byte_width(2), 1);
        assert_eq!(id_byte_width(256), 1);
        assert_eq!(id_byte_width(257), 2);
        assert_eq!(id_byte_width(300), 2);
        assert_eq!(id_byte_width(1 << 16), 2);
        assert_eq!(id_byte_width((1 << 16) + 1), 3);
        assert_eq!(id_byte_width(1u64 << 32), 4);
        assert_eq!(id_byte_width((1u64 << 32) + 1), 5);
        assert_eq!(id_byte_width(u64::MAX), 8);
    }

    #[test]
    fn zero_converged_record_layout() {
        let frame = encode_buffer(&[Message::ZeroConverged { vertex: 5 }], 1, 1).unwrap();
        assert_eq!(frame, vec![0x00, 1, 0, 0, 0, 1, 0, 0x05]);
    }

    #[test]
    fn parent_pair_record_layout() {
        let frame =
            encode_buffer(&[Message::ParentPair { child: 3, parent_value: 0 }], 2, 1).unwrap();
        assert_eq!(frame, vec![0x01, 1, 0, 0, 0, 1, 0, 0x03, 0x00, 0x00, 0x00]);
    }

    #[test]
    fn done_frame_has_no_payload() {
        let frame = encode_buffer(&[Message::Done], 4, 1).unwrap();
        assert_eq!(frame.len(), FRAME_HEADER_BYTES);
        let decoded = decode_buffer(&frame, 4).unwrap();
        assert_eq!(decoded.messages(), &[Message::Done]);
    }

    #[test]
    fn field_too_wide_is_rejected() {
        let err = encode_buffer(&[Message::ZeroConverged { vertex: 256 }], 1, 1).unwrap_err();
        assert_eq!(err, CodecError::FieldTooWide { value: 256, width: 1 });
        // Boundary: 255 fits in one byte.
        encode_buffer(&[Message::ZeroConverged { vertex: 255 }], 1, 1).unwrap();
    }

    #[test]
    fn mixed_kinds_and_empty_are_rejected() {
        let mixed = [Message::Done, Message::ZeroConverged { vertex: 1 }];
        assert_eq!(encode_buffer(&mixed, 1, 1).unwrap_err(), CodecError::MixedKinds);
        assert_eq!(encode_buffer(&[], 1, 1).unwrap_err(), CodecError::Empty);
    }

    #[test]
    fn decode_rejects_garbled_frames() {
        let good = encode_buffer(&[Message::ZeroConverged { vertex: 9 }], 2, 1).unwrap();
        assert!(matches!(
            decode_buffer(&good[..good.len() - 1], 2),
            Err(CodecError::LengthMismatch { .. })
        ));
        let mut bad_tag = good.clone();
        bad_tag[0] = 9;
        assert_eq!(decode_buffer(&bad_tag, 2).unwrap_err(), CodecError::BadTag(9));
        let mut wrong_count = good;
        wrong_count[1] = 2;
        assert!(matches!(
            decode_buffer(&wrong_count, 2),
            Err(CodecError::LengthMismatch { .. })
        ));
        assert!(matches!(decode_buffer(&[], 2), Err(CodecError::LengthMismatch { .. })));
    }

    #[test]
    fn blocks_split_records_nearly_equally() {
        let messages: Vec<Message> =
            (0..10).map(|v| Message::ZeroConverged { vertex: v }).collect();
        let frame = encode_buffer(&messages, 1, 4).unwrap();
        let decoded = decode_buffer(&frame, 1).unwrap();
        let blocks: Vec<Vec<Message>> = decoded.blocks().map(|b| b.to_vec()).collect();
        assert_eq!(blocks.len(), 4);
        assert_eq!(blocks.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
        let rejoined: Vec<Message> = blocks.concat();
        assert_eq!(rejoined, messages);
    }

    #[test]
    fn message_buffer_fills_flushes_and_resets() {
        let cfg = BufferConfig::new(3, 2);
        let mut buf = MessageBuffer::new(MessageKind::ZeroConverged, cfg);
        assert!(buf.take_frame(1).unwrap().is_none());
        for v in 0..3 {
            buf.push(Message::ZeroConverged { vertex: v }).unwrap();
        }
        assert!(buf.is_full());
        assert!(matches!(
            buf.push(Message::ZeroConverged { vertex: 9 }),
            Err(CodecError::CapacityExceeded { capacity: 3 })
        ));
        let frame = buf.take_frame(1).unwrap().unwrap();
        assert!(buf.is_empty());
        let decoded = decode_buffer(&frame, 1).unwrap();
        assert_eq!(decoded.len(), 3);
        assert_eq!(decoded.block_count(), 2);

        // A single pending record flushes as one block.
        buf.push(Message::ZeroConverged { vertex: 7 }).unwrap();
        let frame = buf.take_frame(1).unwrap().unwrap();
        assert_eq!(decode_buffer(&frame, 1).unwrap().block_count(), 1);
    }

    #[test]
    fn message_buffer_rejects_foreign_kinds() {
        let mut buf = MessageBuffer::new(MessageKind::ParentPair, BufferConfig::default());
        assert_eq!(
            buf.push(Message::ZeroConverged { vertex: 0 }).unwrap_err(),
            CodecError::MixedKinds
        );
    }

    fn arbitrary_run(width: u8) -> impl Strategy<Value = Vec<Message>> {
        let limit = if width == 8 { u64::MAX } else { (1u64 << (8 * width)) - 1 };
        prop_oneof![
            prop::collection::vec(
                (0..=limit).prop_map(|vertex| Message::ZeroConverged { vertex }),
                1..50
            ),
            prop::collection::vec(
                (0..=limit, 0..=limit)
                    .prop_map(|(child, parent_value)| Message::ParentPair { child, parent_value }),
                1..50
            ),
            Just(vec![Message::Done]),
        ]
    }

    proptest! {
        #[test]
        fn round_trip_identity_at_every_width(
            width in 1u8..=8,
            blocks in 1u16..20,
            seed_run in arbitrary_run(8),
        ) {
            // Clamp values into the chosen width rather than discarding.
            let limit = if width == 8 { u64::MAX } else { (1u64 << (8 * width)) - 1 };
            let run: Vec<Message> = seed_run.into_iter().map(|m| match m {
                Message::ZeroConverged { vertex } =>
                    Message::ZeroConverged { vertex: vertex & limit },
                Message::ParentPair { child, parent_value } =>
                    Message::ParentPair { child: child & limit, parent_value: parent_value & limit },
                Message::Done => Message::Done,
            }).collect();
            let frame = encode_buffer(&run, width, blocks).unwrap();
            prop_assert_eq!(
                frame.len(),
                FRAME_HEADER_BYTES + run.len() * record_bytes(run[0].kind(), width)
            );
            let decoded = decode_buffer(&frame, width).unwrap();
            prop_assert_eq!(decoded.messages(), &run[..]);
            prop_assert_eq!(decoded.block_count(), blocks);
            let rejoined: Vec<Message> = decoded.blocks().flat_map(|b| b.to_vec()).collect();
            prop_assert_eq!(rejoined, run);
        }
    }
}
