//! Undirected simple graphs over nodes 0..n.
//!
//! Adjacency is stored as sorted neighbor lists. Construction rejects
//! self-loops and out-of-range endpoints and collapses duplicate edges
//! (either orientation), so every stored graph is simple.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<u32>>,
    edges: usize,
}

impl Graph {
    /// Build from an edge list over nodes 0..n. Duplicate edges are merged;
    /// self-loops and endpoints >= n are errors.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u == v {
                return Err(Error::param("edges", format!("self-loop at node {u}")));
            }
            for e in [u, v] {
                if e as usize >= n {
                    return Err(Error::NodeOutOfRange { node: e, nodes: n });
                }
            }
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        let mut edge_count = 0usize;
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        Ok(Graph {
            neighbors,
            edges: edge_count / 2,
        })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Number of undirected edges after deduplication.
    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Sorted neighbor list of node i.
    pub fn neighbors(&self, i: u32) -> &[u32] {
        &self.neighbors[i as usize]
    }

    pub fn degree(&self, i: u32) -> usize {
        self.neighbors[i as usize].len()
    }

    /// Nodes at graph distance exactly two from i (neighbors of neighbors,
    /// minus i and its direct neighbors), ascending.
    pub fn two_hop_exact(&self, i: u32) -> Vec<u32> {
        let mut blocked = vec![false; self.node_count()];
        blocked[i as usize] = true;
        for &j in self.neighbors(i) {
            blocked[j as usize] = true;
        }
        let mut out = Vec::new();
        for &j in self.neighbors(i) {
            for &k in self.neighbors(j) {
                if !blocked[k as usize] {
                    blocked[k as usize] = true;
                    out.push(k);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Parse a whitespace-separated edge list: one `u v` pair per line,
    /// 0-indexed. Blank lines and lines starting with `#` are skipped.
    /// Errors cite the 1-based line number.
    pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<(u32, u32)>> {
        let mut edges = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(format!("reading edge list line {line_no}"), e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let u = parse_endpoint(fields.next(), line_no)?;
            let v = parse_endpoint(fields.next(), line_no)?;
            if let Some(extra) = fields.next() {
                return Err(Error::EdgeList {
                    line: line_no,
                    reason: format!("unexpected trailing field {extra:?}"),
                });
            }
            if u == v {
                return Err(Error::EdgeList {
                    line: line_no,
                    reason: format!("self-loop at node {u}"),
                });
            }
            edges.push((u, v));
        }
        Ok(edges)
    }

    /// Parse and build in one step.
    pub fn from_edge_list<R: BufRead>(n: usize, reader: R) -> Result<Self> {
        let edges = Self::parse_edge_list(reader)?;
        Self::from_edges(n, &edges)
    }

    /// Write each undirected edge once as `u v` with u < v, sorted.
    pub fn write_edge_list<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (u, list) in self.neighbors.iter().enumerate() {
            for &v in list {
                if (u as u32) < v {
                    writeln!(w, "{u} {v}")?;
                }
            }
        }
        Ok(())
    }
}

fn parse_endpoint(field: Option<&str>, line_no: usize) -> Result<u32> {
    let field = field.ok_or_else(|| Error::EdgeList {
        line: line_no,
        reason: "expected two node indices".into(),
    })?;
    field.parse::<u32>().map_err(|_| Error::EdgeList {
        line: line_no,
        reason: format!("invalid node index {field:?}"),
    })
}
