//! Graph file formats.
//!
//! Text edge lists hold one `u v` pair per line; `#` starts a comment. A
//! comment of the form `# n <count>` declares the vertex count, which may
//! only enlarge the graph (it adds isolated tail vertices); endpoints at or
//! beyond a declared count are rejected.
//!
//! The binary container is little-endian throughout:
//!
//! ```text
//! magic "CCFB" | version u32 | n u64 | m u64 | offsets (n+1) x u64 | neighbors m x w
//! ```
//!
//! where `w` is 4 bytes when `n < 2^32` and 8 bytes otherwise.

use std::io::{BufRead, Read, Write};

use super::{EdgeList, Graph, GraphError};
use crate::VertexId;

pub const CCFB_MAGIC: [u8; 4] = *b"CCFB";
pub const CCFB_VERSION: u32 = 1;

/// Parses a text edge list. `n` is the maximum endpoint plus one unless a
/// `# n <count>` header declares a larger count.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<EdgeList, GraphError> {
    let mut declared: Option<u64> = None;
    let mut max_seen: Option<u64> = None;
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if declared.is_none() && tokens.len() == 2 && tokens[0] == "n" {
                declared = Some(tokens[1].parse().map_err(|_| GraphError::Parse {
                    line: lineno,
                    msg: format!("bad vertex count {:?} in header", tokens[1]),
                })?);
            }
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(GraphError::Parse {
                line: lineno,
                msg: format!("expected two endpoints, got {}", tokens.len()),
            });
        }
        let mut pair = [0u64; 2];
        for (slot, token) in pair.iter_mut().zip(&tokens) {
            *slot = token.parse().map_err(|_| GraphError::Parse {
                line: lineno,
                msg: format!("bad vertex id {token:?}"),
            })?;
        }
        let [u, v] = pair;
        if let Some(n) = declared {
            let worst = u.max(v);
            if worst >= n {
                return Err(GraphError::OutOfRange { v: worst, n });
            }
        }
        max_seen = Some(max_seen.map_or(u.max(v), |m: u64| m.max(u.max(v))));
        edges.push((u, v));
    }
    let n = declared.or(max_seen.map(|m| m + 1)).unwrap_or(0);
    Ok(EdgeList { n, edges })
}

/// Writes a text edge list with an explicit `# n` header so isolated tail
/// vertices survive a round trip.
pub fn write_edge_list<W: Write>(mut writer: W, list: &EdgeList) -> Result<(), GraphError> {
    writeln!(writer, "# n {}", list.n)?;
    for &(u, v) in &list.edges {
        writeln!(writer, "{u} {v}")?;
    }
    Ok(())
}

fn neighbor_width(n: u64) -> usize {
    if n < 1u64 << 32 {
        4
    } else {
        8
    }
}

/// Writes the binary CSR container.
pub fn write_ccfb<W: Write>(mut writer: W, graph: &Graph) -> Result<(), GraphError> {
    let n = graph.vertex_count();
    let w = neighbor_width(n);
    writer.write_all(&CCFB_MAGIC)?;
    writer.write_all(&CCFB_VERSION.to_le_bytes())?;
    writer.write_all(&n.to_le_bytes())?;
    writer.write_all(&graph.edge_count().to_le_bytes())?;
    for &off in graph.offsets() {
        writer.write_all(&off.to_le_bytes())?;
    }
    for v in graph.vertices() {
        for &t in graph.neighbors_of(v) {
            writer.write_all(&t.to_le_bytes()[..w])?;
        }
    }
    Ok(())
}

fn read_exact_or(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), GraphError> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            GraphError::Format(format!("truncated while reading {what}"))
        } else {
            GraphError::Io(e)
        }
    })
}

fn read_u64(reader: &mut impl Read, what: &str) -> Result<u64, GraphError> {
    let mut buf = [0u8; 8];
    read_exact_or(reader, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

/// Reads and validates the binary CSR container.
pub fn read_ccfb<R: Read>(mut reader: R) -> Result<Graph, GraphError> {
    let mut magic = [0u8; 4];
    read_exact_or(&mut reader, &mut magic, "magic")?;
    if magic != CCFB_MAGIC {
        return Err(GraphError::Format(format!("bad magic {magic:02x?}")));
    }
    let mut version = [0u8; 4];
    read_exact_or(&mut reader, &mut version, "version")?;
    let version = u32::from_le_bytes(version);
    if version != CCFB_VERSION {
        return Err(GraphError::Format(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut reader, "vertex count")?;
    let m = read_u64(&mut reader, "edge count")?;
    let mut offsets = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        offsets.push(read_u64(&mut reader, "offsets")?);
    }
    if offsets[0] != 0 || *offsets.last().unwrap() != m {
        return Err(GraphError::Format(
            "offsets must start at 0 and end at the edge count".into(),
        ));
    }
    if offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(GraphError::Format("offsets must be non-decreasing".into()));
    }
    let w = neighbor_width(n);
    let mut neighbors = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let mut buf = [0u8; 8];
        read_exact_or(&mut reader, &mut buf[..w], "neighbors")?;
        let v = u64::from_le_bytes(buf);
        if v >= n {
            return Err(GraphError::OutOfRange { v, n });
        }
        neighbors.push(v as VertexId);
    }
    // A well-formed container has nothing after the neighbor block.
    let mut tail = [0u8; 1];
    match reader.read(&mut tail)? {
        0 => Ok(Graph::from_parts(offsets, neighbors)),
        _ => Err(GraphError::Format("trailing bytes after neighbor block".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_csr;

    fn load(text: &str) -> Result<EdgeList, GraphError> {
        load_edge_list(text.as_bytes())
    }

    #[test]
    fn plain_edge_list() {
        let list = load("0 1\n1 2\n").unwrap();
        assert_eq!(list.n, 3);
        assert_eq!(list.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn header_enlarges_vertex_count() {
        let list = load("# n 5\n0 1\n").unwrap();
        assert_eq!(list.n, 5);
        assert_eq!(list.edges, vec![(0, 1)]);
    }

    #[test]
    fn header_too_small_is_a_bounds_error() {
        let err = load("# n 2\n0 3\n").unwrap_err();
        assert!(matches!(err, GraphError::OutOfRange { v: 3, n: 2 }));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let list = load("# generated by hand\n\n0 1\n# trailing note\n").unwrap();
        assert_eq!(list.edges, vec![(0, 1)]);
    }

    #[test]
    fn malformed_tokens_report_the_line() {
        match load("0 1\n0 x\n") {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match load("0 1 2\n") {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_the_empty_graph() {
        let list = load("").unwrap();
        assert_eq!(list.n, 0);
        assert!(list.edges.is_empty());
    }

    #[test]
    fn text_round_trip_preserves_isolated_tail() {
        let list = EdgeList::new(6, vec![(0, 1), (4, 2)]);
        let mut out = Vec::new();
        write_edge_list(&mut out, &list).unwrap();
        let back = load_edge_list(&out[..]).unwrap();
        assert_eq!(back, list);
    }

    #[test]
    fn binary_round_trip() {
        let g = build_csr(&EdgeList::new(5, vec![(0, 4), (0, 1), (3, 3), (4, 0)])).unwrap();
        let mut bytes = Vec::new();
        write_ccfb(&mut bytes, &g).unwrap();
        let back = read_ccfb(&bytes[..]).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn binary_round_trip_empty_graph() {
        let g = build_csr(&EdgeList::new(0, vec![])).unwrap();
        let mut bytes = Vec::new();
        write_ccfb(&mut bytes, &g).unwrap();
        assert_eq!(read_ccfb(&bytes[..]).unwrap(), g);
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        let g = build_csr(&EdgeList::new(3, vec![(0, 1), (1, 2)])).unwrap();
        let mut bytes = Vec::new();
        write_ccfb(&mut bytes, &g).unwrap();

        let mut garbled = bytes.clone();
        garbled[0] = b'X';
        assert!(matches!(read_ccfb(&garbled[..]), Err(GraphError::Format(_))));

        let truncated = &bytes[..bytes.len() - 1];
        assert!(matches!(read_ccfb(truncated), Err(GraphError::Format(_))));

        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(read_ccfb(&extended[..]), Err(GraphError::Format(_))));
    }

    #[test]
    fn binary_validates_offsets_and_neighbors() {
        let g = build_csr(&EdgeList::new(3, vec![(0, 1), (1, 2)])).unwrap();
        let mut bytes = Vec::new();
        write_ccfb(&mut bytes, &g).unwrap();
        // Neighbor ids start after magic, version, n, m and 4 offsets.
        let neighbor_base = 4 + 4 + 8 + 8 + 4 * 8;
        bytes[neighbor_base] = 7;
        assert!(matches!(
            read_ccfb(&bytes[..]),
            Err(GraphError::OutOfRange { v: 7, n: 3 })
        ));
    }
}
