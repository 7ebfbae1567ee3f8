//! Predicted node and edge marginal distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, EdgeSubset};

/// Row-sum tolerance for strict validation.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Magnitudes below this are treated as zero when validating.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Reject rows whose sum is off by more than [`SUM_TOLERANCE`].
    #[default]
    Strict,
    /// Divide each row by its sum.
    Renormalize,
}

fn validate_row(
    item: impl FnOnce() -> String,
    row: &mut [f64],
    mode: ValidationMode,
) -> Result<()> {
    let invalid = |reason: String, item: String| Error::InvalidDistribution { item, reason };
    if let Some(&v) = row.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("non-finite entry {v}"), item()));
    }
    if let Some(&v) = row.iter().find(|&&v| v < -PROB_FLOOR) {
        return Err(invalid(format!("negative entry {v}"), item()));
    }
    if let Some(&v) = row.iter().find(|&&v| v > 1.0 + SUM_TOLERANCE) {
        return Err(invalid(format!("entry {v} exceeds 1"), item()));
    }
    let sum: f64 = row.iter().sum();
    match mode {
        ValidationMode::Strict => {
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(invalid(format!("entries sum to {sum}"), item()));
            }
        }
        ValidationMode::Renormalize => {
            if sum <= PROB_FLOOR {
                return Err(invalid("entries sum to zero".into(), item()));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
    }
    Ok(())
}

/// Per-node categorical distributions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMarginals {
    num_classes: usize,
    probs: Vec<f64>,
}

impl NodeMarginals {
    pub fn from_rows(rows: Vec<Vec<f64>>, mode: ValidationMode) -> Result<Self> {
        let num_classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_classes) {
            return Err(Error::DimensionMismatch(
                "node marginal rows have different lengths".into(),
            ));
        }
        Self::from_flat(num_classes, rows.concat(), mode)
    }

    pub fn from_flat(
        num_classes: usize,
        mut probs: Vec<f64>,
        mode: ValidationMode,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "node marginals need at least 2 classes, got {num_classes}"
            )));
        }
        if !probs.len().is_multiple_of(num_classes) {
            return Err(Error::DimensionMismatch(format!(
                "{} values is not a multiple of {num_classes} classes",
                probs.len()
            )));
        }
        for (i, row) in probs.chunks_mut(num_classes).enumerate() {
            validate_row(|| format!("node {i}"), row, mode)?;
        }
        Ok(NodeMarginals { num_classes, probs })
    }

    pub(crate) fn from_parts(num_classes: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len() % num_classes, 0);
        NodeMarginals { num_classes, probs }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.num_classes
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.probs[node * self.num_classes..(node + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks(self.num_classes)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }
}

/// Read-only view of one edge's joint distribution in a chosen orientation.
#[derive(Debug, Clone, Copy)]
pub struct EdgeView<'a> {
    data: &'a [f64],
    num_classes: usize,
    transposed: bool,
}

impl EdgeView<'_> {
    /// Probability of `(first endpoint = l, second endpoint = m)` in the
    /// orientation the view was requested with.
    #[inline]
    pub fn at(&self, l: usize, m: usize) -> f64 {
        let c = self.num_classes;
        if self.transposed {
            self.data[m * c + l]
        } else {
            self.data[l * c + m]
        }
    }
}

/// Per-edge joint distributions over `(y_i, y_j)` for canonical `(i, j)`,
/// stored row-major in `y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMarginals {
    num_classes: usize,
    edges: Vec<Edge>,
    probs: Vec<f64>,
}

impl EdgeMarginals {
    /// Builds edge marginals from `(src, dst)` keyed matrices. Pairs with
    /// `src > dst` are transposed into canonical orientation.
    pub fn from_entries(
        num_classes: usize,
        entries: Vec<(Edge, Vec<f64>)>,
        mode: ValidationMode,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "edge marginals need at least 2 classes, got {num_classes}"
            )));
        }
        let c = num_classes;
        let mut canon: Vec<(Edge, Vec<f64>)> = Vec::with_capacity(entries.len());
        for ((a, b), mut m) in entries {
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if m.len() != c * c {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({a}, {b}) has {} entries, expected {}",
                    m.len(),
                    c * c
                )));
            }
            if a > b {
                m = transpose(&m, c);
            }
            validate_row(|| format!("edge ({a}, {b})"), &mut m, mode)?;
            canon.push((canonical(a, b), m));
        }
        canon.sort_by_key(|(e, _)| *e);
        if let Some(w) = canon.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(format!(
                "edge ({}, {}) listed more than once",
                w[0].0 .0, w[0].0 .1
            )));
        }
        let edges = canon.iter().map(|(e, _)| *e).collect();
        let probs = canon.into_iter().flat_map(|(_, m)| m).collect();
        Ok(EdgeMarginals {
            num_classes,
            edges,
            probs,
        })
    }

    pub(crate) fn from_parts(num_classes: usize, edges: Vec<Edge>, probs: Vec<f64>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(probs.len(), edges.len() * num_classes * num_classes);
        EdgeMarginals {
            num_classes,
            edges,
            probs,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Canonical-orientation matrix of the `idx`-th stored edge.
    pub fn matrix(&self, idx: usize) -> &[f64] {
        let cc = self.num_classes * self.num_classes;
        &self.probs[idx * cc..(idx + 1) * cc]
    }

    /// Joint distribution of `(y_a, y_b)`; the transpose of the stored
    /// matrix when `a > b`.
    pub fn get(&self, a: usize, b: usize) -> Option<EdgeView<'_>> {
        let idx = self.edges.binary_search(&canonical(a, b)).ok()?;
        Some(EdgeView {
            data: self.matrix(idx),
            num_classes: self.num_classes,
            transposed: a > b,
        })
    }

    /// Marginal of the first (smaller id) endpoint of the `idx`-th edge.
    pub fn first_marginal(&self, idx: usize) -> Vec<f64> {
        self.matrix(idx)
            .chunks(self.num_classes)
            .map(|r| r.iter().sum())
            .collect()
    }

    /// Marginal of the second (larger id) endpoint of the `idx`-th edge.
    pub fn second_marginal(&self, idx: usize) -> Vec<f64> {
        let c = self.num_classes;
        let m = self.matrix(idx);
        (0..c)
            .map(|col| (0..c).map(|row| m[row * c + col]).sum())
            .collect()
    }

    /// Copy restricted to the edges of `subset`.
    pub fn restrict(&self, subset: &EdgeSubset) -> Result<EdgeMarginals> {
        let cc = self.num_classes * self.num_classes;
        let mut probs = Vec::with_capacity(subset.len() * cc);
        for &(i, j) in subset.edges() {
            let idx = self
                .edges
                .binary_search(&(i, j))
                .map_err(|_| Error::MissingEdge(i, j))?;
            probs.extend_from_slice(self.matrix(idx));
        }
        Ok(Self::from_parts(
            self.num_classes,
            subset.edges().to_vec(),
            probs,
        ))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }
}

fn transpose(m: &[f64], c: usize) -> Vec<f64> {
    (0..c * c).map(|k| m[(k % c) * c + k / c]).collect()
}

/// Edge marginals under a fully factorized joint: `p_i ⊗ p_j`.
pub fn mean_field_edge_marginals(nm: &NodeMarginals, subset: &EdgeSubset) -> Result<EdgeMarginals> {
    let c = nm.num_classes();
    let mut probs = Vec::with_capacity(subset.len() * c * c);
    for &(i, j) in subset.edges() {
        if i.max(j) >= nm.len() {
            return Err(Error::NodeOutOfRange {
                id: i.max(j),
                num_nodes: nm.len(),
            });
        }
        let (pi, pj) = (nm.row(i), nm.row(j));
        for &a in pi {
            probs.extend(pj.iter().map(|&b| a * b));
        }
    }
    Ok(EdgeMarginals::from_parts(c, subset.edges().to_vec(), probs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub label: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePrediction {
    pub labels: (usize, usize),
    pub confidence: f64,
}

/// Index and value of the maximum; ties go to the lowest index.
fn argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (k, &v) in xs.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (k, v);
        }
    }
    best
}

pub fn node_predictions(nm: &NodeMarginals) -> Vec<NodePrediction> {
    nm.rows()
        .map(|r| {
            let (label, confidence) = argmax(r);
            NodePrediction { label, confidence }
        })
        .collect()
}

/// Row-major argmax of each joint matrix.
pub fn edge_predictions(em: &EdgeMarginals) -> Vec<EdgePrediction> {
    let c = em.num_classes();
    (0..em.len())
        .map(|idx| {
            let (k, confidence) = argmax(em.matrix(idx));
            EdgePrediction {
                labels: (k / c, k % c),
                confidence,
            }
        })
        .collect()
}
