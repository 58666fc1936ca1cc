//! Plain-text exchange formats.
//!
//! Graphs: a header line `n m` followed by `m` lines `u v cost`.
//! Partitions: one `node component` line per node, in node order.
//!
//! Costs are written with Rust's shortest round-trip float formatting, so
//! write-then-read reproduces every cost bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CostGraph, Partition};
use crate::error::{Error, Result};

pub fn graph_to_string(g: &CostGraph) -> String {
    let mut out = String::with_capacity(16 * (g.edge_count() + 1));
    writeln!(out, "{} {}", g.node_count(), g.edge_count()).unwrap();
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.u, e.v, e.cost).unwrap();
    }
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|e| parse_err(line, format!("bad {what} `{tok}`: {e}")))
}

pub fn graph_from_str(text: &str) -> Result<CostGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
    let mut tok = header.split_whitespace();
    let n: usize = field(tok.next(), hl, "node count")?;
    let m: usize = field(tok.next(), hl, "edge count")?;
    let mut edges = Vec::with_capacity(m);
    for (ln, line) in lines {
        let mut tok = line.split_whitespace();
        let u: usize = field(tok.next(), ln, "u")?;
        let v: usize = field(tok.next(), ln, "v")?;
        let c: f64 = field(tok.next(), ln, "cost")?;
        if tok.next().is_some() {
            return Err(parse_err(ln, "trailing fields"));
        }
        edges.push((u, v, c));
    }
    if edges.len() != m {
        return Err(Error::Parse(format!(
            "header declares {m} edges, found {}",
            edges.len()
        )));
    }
    CostGraph::from_edges(n, edges)
}

pub fn partition_to_string(p: &Partition) -> String {
    let mut out = String::with_capacity(8 * p.len());
    for (node, c) in p.labels().iter().enumerate() {
        writeln!(out, "{node} {c}").unwrap();
    }
    out
}

pub fn partition_from_str(text: &str) -> Result<Partition> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let node: usize = field(tok.next(), i + 1, "node")?;
        let comp: usize = field(tok.next(), i + 1, "component")?;
        if node != labels.len() {
            return Err(parse_err(i + 1, format!("expected node {}, found {node}", labels.len())));
        }
        labels.push(comp);
    }
    Ok(Partition::new(labels))
}

pub fn write_graph(path: &Path, g: &CostGraph) -> Result<()> {
    fs::write(path, graph_to_string(g)).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: &Path) -> Result<CostGraph> {
    graph_from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    fs::write(path, partition_to_string(p)).map_err(|e| Error::io(path, e))
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    partition_from_str(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
