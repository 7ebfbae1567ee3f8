//! Undirected graphs, test-edge extraction and graph-level statistics.
//!
//! Edges are stored once, as `(i, j)` with `i < j`, sorted lexicographically.
//! Every edge subset produced here inherits that order, so downstream reports
//! are reproducible regardless of how the raw edge list was ordered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical undirected edge, `0 < 1`.
pub type Edge = (usize, usize);

/// Orders a pair so the smaller id comes first.
#[inline]
pub fn canonical(a: usize, b: usize) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Builds a graph from raw pairs in any orientation.
    ///
    /// Mirrored pairs `(a, b)` / `(b, a)` and exact repeats collapse to one
    /// edge. Self-loops and ids `>= num_nodes` are rejected.
    pub fn new<I>(num_nodes: usize, raw_edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = Vec::new();
        for (a, b) in raw_edges {
            for id in [a, b] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            edges.push(canonical(a, b));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Graph { num_nodes, edges })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Position of a canonical edge in [`Graph::edges`].
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&canonical(a, b)).ok()
    }

    /// Per-node list of `(neighbor, edge index)`, neighbors ascending.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            adj[i].push((j, e));
            adj[j].push((i, e));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// Ground-truth (or predicted) class per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    values: Vec<usize>,
    num_classes: usize,
}

impl Labels {
    pub fn new(values: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "num_classes must be >= 2, got {num_classes}"
            )));
        }
        if let Some((node, &class)) = values.iter().enumerate().find(|(_, &v)| v >= num_classes) {
            return Err(Error::ClassOutOfRange {
                node,
                class,
                num_classes,
            });
        }
        Ok(Labels {
            values,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, node: usize) -> usize {
        self.values[node]
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }
}

/// Split of nodes into test (`true`) and training (`false`) nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePartition {
    test_mask: Vec<bool>,
}

impl NodePartition {
    pub fn new(test_mask: Vec<bool>) -> Self {
        NodePartition { test_mask }
    }

    /// Every node is a test node.
    pub fn all_test(num_nodes: usize) -> Self {
        NodePartition {
            test_mask: vec![true; num_nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.test_mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.test_mask.is_empty()
    }

    pub fn is_test(&self, node: usize) -> bool {
        self.test_mask[node]
    }

    pub fn mask(&self) -> &[bool] {
        &self.test_mask
    }

    /// Test node ids in ascending order.
    pub fn test_nodes(&self) -> Vec<usize> {
        self.test_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &t)| t.then_some(i))
            .collect()
    }

    pub fn num_test(&self) -> usize {
        self.test_mask.iter().filter(|&&t| t).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetKind {
    AllTest,
    Agree,
    Disagree,
}

impl SubsetKind {
    pub fn name(self) -> &'static str {
        match self {
            SubsetKind::AllTest => "edgewise",
            SubsetKind::Agree => "agree",
            SubsetKind::Disagree => "disagree",
        }
    }
}

/// A sorted list of canonical edges together with how it was derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSubset {
    edges: Vec<Edge>,
    kind: SubsetKind,
}

impl EdgeSubset {
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn kind(&self) -> SubsetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {got} entries, graph has {want} nodes"
        )));
    }
    Ok(())
}

/// Edges whose two endpoints are both test nodes.
pub fn test_edge_subset(graph: &Graph, partition: &NodePartition) -> Result<EdgeSubset> {
    check_len("test mask", partition.len(), graph.num_nodes())?;
    let edges = graph
        .edges()
        .iter()
        .copied()
        .filter(|&(i, j)| partition.is_test(i) && partition.is_test(j))
        .collect();
    Ok(EdgeSubset {
        edges,
        kind: SubsetKind::AllTest,
    })
}

/// Splits test edges into those whose endpoints share a ground-truth label
/// (agree) and the rest (disagree).
pub fn agree_disagree_split(
    subset: &EdgeSubset,
    labels: &Labels,
) -> Result<(EdgeSubset, EdgeSubset)> {
    if subset.kind != SubsetKind::AllTest {
        return Err(Error::InvalidParameter(format!(
            "agree/disagree split needs the full test-edge subset, got {:?}",
            subset.kind
        )));
    }
    let (agree, disagree): (Vec<Edge>, Vec<Edge>) = subset
        .edges
        .iter()
        .partition(|&&(i, j)| labels.get(i) == labels.get(j));
    Ok((
        EdgeSubset {
            edges: agree,
            kind: SubsetKind::Agree,
        },
        EdgeSubset {
            edges: disagree,
            kind: SubsetKind::Disagree,
        },
    ))
}

/// Fraction of test edges that connect same-label nodes.
pub fn homophily_ratio(subset_all: &EdgeSubset, labels: &Labels) -> Result<f64> {
    if subset_all.is_empty() {
        return Err(Error::EmptySet("homophily ratio"));
    }
    let (agree, _) = agree_disagree_split(subset_all, labels)?;
    Ok(agree.len() as f64 / subset_all.len() as f64)
}

/// Fraction of test nodes incident to at least one edge of `subset`.
pub fn k_index(subset: &EdgeSubset, partition: &NodePartition) -> Result<f64> {
    let num_test = partition.num_test();
    if num_test == 0 {
        return Err(Error::EmptySet("K index"));
    }
    let mut kept = vec![false; partition.len()];
    for &(i, j) in subset.edges() {
        for v in [i, j] {
            if v >= kept.len() {
                return Err(Error::NodeOutOfRange {
                    id: v,
                    num_nodes: kept.len(),
                });
            }
            kept[v] = true;
        }
    }
    let count = kept
        .iter()
        .zip(partition.mask())
        .filter(|&(&k, &t)| k && t)
        .count();
    Ok(count as f64 / num_test as f64)
}
