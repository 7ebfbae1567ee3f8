//! CSV and JSON interchange formats.
//!
//! | file | header |
//! |------|--------|
//! | edge list | `src,dst` |
//! | labels, observations | `node,label` |
//! | test mask | `node,is_test` (0/1) |
//! | node marginals | `node,p0,...,p{c-1}` |
//! | edge marginals | `src,dst,p00,p01,...` row-major in `(y_src, y_dst)` |
//! | reliability table | `bin,lower,upper,count,mean_conf,accuracy` |
//!
//! Floats are written in Rust's shortest round-trip form, so every writer's
//! output reads back bit-identically. Rows may appear in any order; readers
//! sort by node or edge id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph, Labels, NodePartition};
use crate::inference::{per_edge_from_map, Observation, PairwiseMrf, PairwisePotentials};
use crate::marginals::{EdgeMarginals, NodeMarginals, ValidationMode};
use crate::metrics::{MetricReport, ReliabilityTable};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

struct CsvFile<'a> {
    path: &'a Path,
    headers: Vec<String>,
    reader: csv::Reader<File>,
}

impl<'a> CsvFile<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        Ok(CsvFile {
            path,
            headers,
            reader,
        })
    }

    /// Checks that the header starts with exactly `expected`.
    fn require_columns(&self, expected: &[String]) -> Result<()> {
        for (k, want) in expected.iter().enumerate() {
            match self.headers.get(k) {
                Some(got) if got == want => {}
                Some(got) => {
                    return Err(parse_err(
                        self.path,
                        1,
                        format!(
                            "expected column {want:?} at position {}, found {got:?}",
                            k + 1
                        ),
                    ))
                }
                None => return Err(parse_err(self.path, 1, format!("missing column {want:?}"))),
            }
        }
        if self.headers.len() > expected.len() {
            return Err(parse_err(
                self.path,
                1,
                format!("unexpected column {:?}", self.headers[expected.len()]),
            ));
        }
        Ok(())
    }

    /// Visits each data row with its line number and typed field accessor.
    fn for_each_row(mut self, mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {}
                Err(e) => return Err(csv_err(self.path, e)),
            }
            if record.iter().all(str::is_empty) {
                continue;
            }
            let line = record.position().map_or(0, |p| p.line());
            let row = Row {
                path: self.path,
                headers: &self.headers,
                record: &record,
                line,
            };
            if record.len() > self.headers.len() {
                return Err(row.error(format!(
                    "{} fields, header has {}",
                    record.len(),
                    self.headers.len()
                )));
            }
            f(&row)?;
        }
    }
}

struct Row<'a> {
    path: &'a Path,
    headers: &'a [String],
    record: &'a csv::StringRecord,
    line: u64,
}

impl Row<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        parse_err(self.path, self.line, message)
    }

    fn raw(&self, k: usize) -> Result<&str> {
        match self.record.get(k) {
            Some(v) if !v.is_empty() => Ok(v),
            _ => Err(self.error(format!("missing value for column {:?}", self.headers[k]))),
        }
    }

    fn usize(&self, k: usize) -> Result<usize> {
        let v = self.raw(k)?;
        v.parse().map_err(|_| {
            self.error(format!(
                "column {:?}: {v:?} is not a non-negative integer",
                self.headers[k]
            ))
        })
    }

    fn f64(&self, k: usize) -> Result<f64> {
        let v = self.raw(k)?;
        v.parse().map_err(|_| {
            self.error(format!(
                "column {:?}: {v:?} is not a number",
                self.headers[k]
            ))
        })
    }

    fn flag(&self, k: usize) -> Result<bool> {
        match self.raw(k)? {
            "0" | "false" => Ok(false),
            "1" | "true" => Ok(true),
            v => Err(self.error(format!("column {:?}: {v:?} is not 0 or 1", self.headers[k]))),
        }
    }
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Collects `(node, value)` rows into a dense vector over `0..n`.
fn dense<T>(path: &Path, what: &str, rows: Vec<(u64, usize, T)>) -> Result<Vec<T>> {
    let n = rows.len();
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    for (line, node, value) in rows {
        if node >= n {
            return Err(parse_err(
                path,
                line,
                format!("node {node} out of range: {what} must list nodes 0..{n} exactly once"),
            ));
        }
        if slots[node].is_some() {
            return Err(parse_err(path, line, format!("node {node} listed twice")));
        }
        slots[node] = Some(value);
    }
    // every slot is filled: n rows, distinct ids, all < n
    Ok(slots.into_iter().map(|s| s.expect("filled")).collect())
}

pub fn read_edge_list(path: &Path) -> Result<Vec<Edge>> {
    let csv = CsvFile::open(path)?;
    csv.require_columns(&cols(&["src", "dst"]))?;
    let mut out = Vec::new();
    csv.for_each_row(|r| {
        out.push((r.usize(0)?, r.usize(1)?));
        Ok(())
    })?;
    Ok(out)
}

/// Reads an edge list and validates it against `num_nodes`.
pub fn read_graph(path: &Path, num_nodes: usize) -> Result<Graph> {
    Graph::new(num_nodes, read_edge_list(path)?)
}

/// Raw `node,label` pairs, as used by label and observation files.
fn read_node_labels(path: &Path) -> Result<Vec<(u64, usize, usize)>> {
    let csv = CsvFile::open(path)?;
    csv.require_columns(&cols(&["node", "label"]))?;
    let mut out = Vec::new();
    csv.for_each_row(|r| {
        out.push((r.line, r.usize(0)?, r.usize(1)?));
        Ok(())
    })?;
    Ok(out)
}

/// Labels for nodes `0..n`; every node must be listed once.
pub fn read_labels(path: &Path, num_classes: usize) -> Result<Labels> {
    let rows = read_node_labels(path)?;
    Labels::new(dense(path, "labels", rows)?, num_classes)
}

pub fn read_observations(path: &Path) -> Result<Observation> {
    let mut obs = Observation::default();
    for (line, node, label) in read_node_labels(path)? {
        if obs.labels.insert(node, label).is_some() {
            return Err(parse_err(path, line, format!("node {node} observed twice")));
        }
    }
    Ok(obs)
}

pub fn read_mask(path: &Path) -> Result<NodePartition> {
    let csv = CsvFile::open(path)?;
    csv.require_columns(&cols(&["node", "is_test"]))?;
    let mut rows = Vec::new();
    csv.for_each_row(|r| {
        rows.push((r.line, r.usize(0)?, r.flag(1)?));
        Ok(())
    })?;
    Ok(NodePartition::new(dense(path, "mask", rows)?))
}

fn prob_columns(headers: &[String], skip: usize) -> usize {
    headers.len().saturating_sub(skip)
}

pub fn node_marginal_header(num_classes: usize) -> Vec<String> {
    std::iter::once("node".to_string())
        .chain((0..num_classes).map(|k| format!("p{k}")))
        .collect()
}

pub fn read_node_marginals(path: &Path, mode: ValidationMode) -> Result<NodeMarginals> {
    let csv = CsvFile::open(path)?;
    let c = prob_columns(&csv.headers, 1);
    if c < 2 {
        return Err(parse_err(
            path,
            1,
            format!(
                "missing column {:?}: need at least two probability columns",
                format!("p{c}")
            ),
        ));
    }
    csv.require_columns(&node_marginal_header(c))?;
    let mut rows = Vec::new();
    csv.for_each_row(|r| {
        let probs = (1..=c).map(|k| r.f64(k)).collect::<Result<Vec<_>>>()?;
        rows.push((r.line, r.usize(0)?, probs));
        Ok(())
    })?;
    NodeMarginals::from_rows(dense(path, "node marginals", rows)?, mode)
}

fn pair_column(num_classes: usize, l: usize, m: usize) -> String {
    if num_classes <= 10 {
        format!("p{l}{m}")
    } else {
        format!("p{l}_{m}")
    }
}

pub fn edge_marginal_header(num_classes: usize) -> Vec<String> {
    let mut h = vec!["src".to_string(), "dst".to_string()];
    for l in 0..num_classes {
        for m in 0..num_classes {
            h.push(pair_column(num_classes, l, m));
        }
    }
    h
}

pub fn read_edge_marginals(path: &Path, mode: ValidationMode) -> Result<EdgeMarginals> {
    let csv = CsvFile::open(path)?;
    let cc = prob_columns(&csv.headers, 2);
    let c = (cc as f64).sqrt().round() as usize;
    if c < 2 || c * c != cc {
        return Err(parse_err(
            path,
            1,
            format!("{cc} probability columns; expected c*c for some c >= 2"),
        ));
    }
    csv.require_columns(&edge_marginal_header(c))?;
    let mut entries = Vec::new();
    csv.for_each_row(|r| {
        let probs = (2..2 + cc).map(|k| r.f64(k)).collect::<Result<Vec<_>>>()?;
        entries.push(((r.usize(0)?, r.usize(1)?), probs));
        Ok(())
    })?;
    EdgeMarginals::from_entries(c, entries, mode)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    let go = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    };
    go().map_err(|e| io_err(path, e))
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_graph(path: &Path, graph: &Graph) -> Result<()> {
    write_lines(
        path,
        "src,dst",
        graph.edges().iter().map(|(i, j)| format!("{i},{j}")),
    )
}

pub fn write_labels(path: &Path, labels: &Labels) -> Result<()> {
    write_lines(
        path,
        "node,label",
        labels
            .values()
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{i},{l}")),
    )
}

pub fn write_mask(path: &Path, partition: &NodePartition) -> Result<()> {
    write_lines(
        path,
        "node,is_test",
        partition
            .mask()
            .iter()
            .enumerate()
            .map(|(i, &t)| format!("{i},{}", t as u8)),
    )
}

pub fn write_node_marginals(path: &Path, nm: &NodeMarginals) -> Result<()> {
    write_lines(
        path,
        &node_marginal_header(nm.num_classes()).join(","),
        nm.rows()
            .enumerate()
            .map(|(i, r)| format!("{i},{}", join(r))),
    )
}

pub fn write_edge_marginals(path: &Path, em: &EdgeMarginals) -> Result<()> {
    write_lines(
        path,
        &edge_marginal_header(em.num_classes()).join(","),
        em.edges()
            .iter()
            .enumerate()
            .map(|(k, (i, j))| format!("{i},{j},{}", join(em.matrix(k)))),
    )
}

pub fn write_reliability(path: &Path, table: &ReliabilityTable) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    write_lines(
        path,
        "bin,lower,upper,count,mean_conf,accuracy",
        table.bins.iter().map(|b| {
            format!(
                "{},{},{},{},{},{}",
                b.bin,
                b.lower,
                b.upper,
                b.count,
                opt(b.mean_confidence),
                opt(b.accuracy)
            )
        }),
    )
}

/// Writes pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

pub fn read_report(path: &Path) -> Result<MetricReport> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Potentials file:
/// `{"num_classes": c, "unary": [[..]; n], "pairwise": {"shared": [[..]]}}`
/// or `{"pairwise": {"per_edge": {"i-j": [[..]], ...}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialsFile {
    pub num_classes: usize,
    pub unary: Vec<Vec<f64>>,
    pub pairwise: PairwiseSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PairwiseSection {
    Shared(Vec<Vec<f64>>),
    PerEdge(BTreeMap<String, Vec<Vec<f64>>>),
}

fn flatten_matrix(what: &str, m: &[Vec<f64>], c: usize) -> Result<Vec<f64>> {
    if m.len() != c || m.iter().any(|r| r.len() != c) {
        return Err(Error::DimensionMismatch(format!("{what} must be {c}x{c}")));
    }
    Ok(m.concat())
}

fn parse_edge_key(key: &str) -> Option<Edge> {
    let (a, b) = key.split_once('-')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

impl PotentialsFile {
    /// Builds the MRF over `graph`. Per-edge keys `"i-j"` with `i > j` are
    /// transposed into canonical orientation.
    pub fn into_mrf(self, graph: Graph) -> Result<PairwiseMrf> {
        let c = self.num_classes;
        if self.unary.len() != graph.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} unary vectors for {} nodes",
                self.unary.len(),
                graph.num_nodes()
            )));
        }
        let pairwise = match self.pairwise {
            PairwiseSection::Shared(m) => {
                PairwisePotentials::Shared(flatten_matrix("shared pairwise matrix", &m, c)?)
            }
            PairwiseSection::PerEdge(map) => {
                let mut by_edge = BTreeMap::new();
                for (key, m) in map {
                    let (a, b) = parse_edge_key(&key).ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "per_edge key {key:?} is not of the form \"i-j\""
                        ))
                    })?;
                    let mut flat = flatten_matrix(&format!("pairwise matrix {key:?}"), &m, c)?;
                    if a > b {
                        flat = (0..c * c).map(|k| flat[(k % c) * c + k / c]).collect();
                    }
                    if by_edge.insert(canonical(a, b), flat).is_some() {
                        return Err(Error::InvalidParameter(format!("edge {key:?} given twice")));
                    }
                }
                per_edge_from_map(&graph, by_edge)?
            }
        };
        PairwiseMrf::new(graph, c, self.unary, pairwise)
    }
}

pub fn read_potentials(path: &Path) -> Result<PotentialsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}
